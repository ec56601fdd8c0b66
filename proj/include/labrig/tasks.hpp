#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "labrig/plan.hpp"
#include "labrig/rng.hpp"
#include "labrig/symbolic.hpp"

namespace labrig {

struct TaskSpec {
  TaskKind kind = TaskKind::Freeform;
  std::map<std::string, std::string> bindings;  // slot -> catalog id
  std::string success_predicate;                // named per task

  bool valid() const { return kind != TaskKind::Freeform; }
};

inline std::string display_name(std::string id) {
  std::replace(id.begin(), id.end(), '_', ' ');
  return id;
}

inline std::string id_name(std::string display) {
  std::replace(display.begin(), display.end(), ' ', '_');
  return display;
}

// ---- default bindings & schemas ----

inline TaskSpec default_task_spec(TaskKind kind) {
  TaskSpec spec;
  spec.kind = kind;
  spec.success_predicate = task_kind_name(kind);
  switch (kind) {
    case TaskKind::PickPlace:
      spec.bindings = {{"object", "cuboid"}, {"dest", "beaker"}};
      break;
    case TaskKind::Pour:
      spec.bindings = {{"liquid", "water"}, {"source", "cup"}, {"dest", "beaker"}};
      break;
    case TaskKind::Stir:
      spec.bindings = {{"container", "beaker"}, {"stirrer", "stick"}};
      break;
    case TaskKind::Mix:
      spec.bindings = {{"liquid_a", "reagent_a"}, {"cup_a", "cup_a"},
                       {"liquid_b", "reagent_b"}, {"cup_b", "cup_b"},
                       {"dest", "beaker"},        {"stirrer", "stick"}};
      break;
    case TaskKind::Crystallize:
      spec.bindings = {{"solution", "salt_solution"},
                       {"cup", "cup"},
                       {"dish", "petri_dish"},
                       {"seed", "cuboid"}};
      break;
    case TaskKind::Weigh:
      spec.bindings = {{"container", "cup"}, {"liquid", "water"}};
      break;
    case TaskKind::Shake:
      spec.bindings = {{"container", "cup"}, {"liquid_a", "reagent_a"}, {"liquid_b", "reagent_b"}};
      break;
    case TaskKind::Freeform:
      break;
  }
  return spec;
}

namespace detail {
inline SchemaObject make_obj(const std::string& id, ObjectClass cls,
                             std::map<std::string, int> contents = {},
                             const std::string& station = "") {
  bool graspable = cls == ObjectClass::Cuboid || cls == ObjectClass::Cylinder ||
                   cls == ObjectClass::Cup || cls == ObjectClass::Stick;
  bool container =
      cls == ObjectClass::Cup || cls == ObjectClass::Beaker || cls == ObjectClass::PetriDish;
  return {id, cls, graspable, container, std::move(contents), station};
}
}  // namespace detail

inline WorldSchema task_schema(const TaskSpec& spec) {
  using detail::make_obj;
  WorldSchema s;
  s.stations = {kStationBalance, kStationShaker, kStationCrystallization, kStationBench};
  s.predicates = default_predicates();
  switch (spec.kind) {
    case TaskKind::PickPlace:
      s.objects = {make_obj("cuboid", ObjectClass::Cuboid),
                   make_obj("cylinder", ObjectClass::Cylinder),
                   make_obj("beaker", ObjectClass::Beaker),
                   make_obj("petri_dish", ObjectClass::PetriDish)};
      break;
    case TaskKind::Pour:
      s.objects = {make_obj("cup", ObjectClass::Cup, {{"water", 50}}),
                   make_obj("beaker", ObjectClass::Beaker),
                   make_obj("cuboid", ObjectClass::Cuboid)};
      s.liquids = {"water"};
      break;
    case TaskKind::Stir:
      s.objects = {make_obj("beaker", ObjectClass::Beaker, {{"water", 30}, {"reagent_a", 20}}),
                   make_obj("stick", ObjectClass::Stick)};
      s.liquids = {"water", "reagent_a"};
      break;
    case TaskKind::Mix:
      s.objects = {make_obj("cup_a", ObjectClass::Cup, {{"reagent_a", 40}}),
                   make_obj("cup_b", ObjectClass::Cup, {{"reagent_b", 40}}),
                   make_obj("beaker", ObjectClass::Beaker),
                   make_obj("stick", ObjectClass::Stick)};
      s.liquids = {"reagent_a", "reagent_b"};
      break;
    case TaskKind::Crystallize:
      s.objects = {make_obj("cup", ObjectClass::Cup, {{"salt_solution", 30}}),
                   make_obj("petri_dish", ObjectClass::PetriDish, {}, kStationCrystallization),
                   make_obj("cuboid", ObjectClass::Cuboid)};
      s.liquids = {"salt_solution"};
      break;
    case TaskKind::Weigh:
      s.objects = {make_obj("cup", ObjectClass::Cup, {{"water", 50}}),
                   make_obj("cuboid", ObjectClass::Cuboid)};
      s.liquids = {"water"};
      break;
    case TaskKind::Shake:
      s.objects = {make_obj("cup", ObjectClass::Cup, {{"reagent_a", 20}, {"reagent_b", 20}}),
                   make_obj("cuboid", ObjectClass::Cuboid)};
      s.liquids = {"reagent_a", "reagent_b"};
      break;
    case TaskKind::Freeform:
      break;
  }
  return s;
}

// ---- canonical task knowledge (objective, prerequisites, plan) ----

inline std::string canonical_objective(TaskKind kind) {
  switch (kind) {
    case TaskKind::PickPlace:   return "Basic object relocation.";
    case TaskKind::Pour:        return "Single-step pouring of liquid.";
    case TaskKind::Stir:        return "Stir the liquid in a container.";
    case TaskKind::Mix:         return "Multi-step reactant mixing experiment.";
    case TaskKind::Crystallize: return "Crystallization cultivation experiment.";
    case TaskKind::Weigh:       return "Weigh the liquid content within the container.";
    case TaskKind::Shake:       return "Load the container onto the shaker.";
    case TaskKind::Freeform:    return "";
  }
  return "";
}

inline std::optional<TaskKind> task_of_objective(const std::string& objective) {
  for (TaskKind k : all_template_tasks())
    if (starts_with(objective, canonical_objective(k))) return k;
  return std::nullopt;
}

inline PrerequisiteSet task_prerequisites(const TaskSpec& spec) {
  auto b = [&](const char* slot) {
    auto it = spec.bindings.find(slot);
    return it == spec.bindings.end() ? std::string() : it->second;
  };
  PrerequisiteSet p;
  switch (spec.kind) {
    case TaskKind::PickPlace:
      p.required_objects = {b("object"), b("dest")};
      break;
    case TaskKind::Pour:
      p.required_objects = {b("source"), b("dest")};
      p.required_conditions = {"container-has(" + b("source") + ", " + b("liquid") + ")"};
      break;
    case TaskKind::Stir:
      p.required_objects = {b("container"), b("stirrer")};
      p.required_conditions = {"container-has(" + b("container") + ", *)"};
      break;
    case TaskKind::Mix:
      p.required_objects = {b("dest"), b("cup_a"), b("cup_b"), b("stirrer")};
      p.required_conditions = {"container-empty(" + b("dest") + ")",
                               "container-has(" + b("cup_a") + ", " + b("liquid_a") + ")",
                               "container-has(" + b("cup_b") + ", " + b("liquid_b") + ")"};
      break;
    case TaskKind::Crystallize:
      p.required_objects = {b("cup"), b("dish"), b("seed")};
      p.required_conditions = {"container-has(" + b("cup") + ", " + b("solution") + ")",
                               "at-station(" + b("dish") + ", crystallization)"};
      break;
    case TaskKind::Weigh:
      p.required_objects = {b("container")};
      p.required_conditions = {"container-has(" + b("container") + ", " + b("liquid") + ")"};
      break;
    case TaskKind::Shake:
      p.required_objects = {b("container")};
      p.required_conditions = {"container-has(" + b("container") + ", " + b("liquid_a") + ")",
                               "container-has(" + b("container") + ", " + b("liquid_b") + ")"};
      break;
    case TaskKind::Freeform:
      break;
  }
  return p;
}

inline std::vector<std::string> canonical_plan_texts(const TaskSpec& spec) {
  auto b = [&](const char* slot) {
    auto it = spec.bindings.find(slot);
    return it == spec.bindings.end() ? std::string() : display_name(it->second);
  };
  switch (spec.kind) {
    case TaskKind::PickPlace:
      return {"pick up " + b("object"), "place " + b("object") + " in " + b("dest")};
    case TaskKind::Pour:
      return {"pick up " + b("source"), "pour " + b("liquid") + " into " + b("dest"),
              "place " + b("source") + " on bench"};
    case TaskKind::Stir:
      return {"stir the solution in " + b("container")};
    case TaskKind::Mix:
      return {"add " + b("liquid_a") + " to " + b("dest"),
              "add " + b("liquid_b") + " to " + b("dest"),
              "stir the solution in " + b("dest")};
    case TaskKind::Crystallize:
      return {"pick up " + b("cup"),
              "pour " + b("solution") + " into " + b("dish"),
              "place " + b("cup") + " on bench",
              "pick up " + b("seed"),
              "place " + b("seed") + " in " + b("dish"),
              "wait for crystallization"};
    case TaskKind::Weigh:
      return {"weigh " + b("container") + " with the balance"};
    case TaskKind::Shake:
      return {"pick up " + b("container"), "place " + b("container") + " on shaker",
              "shake " + b("container")};
    case TaskKind::Freeform:
      return {};
  }
  return {};
}

// ---- prompt template pools (20 paraphrases per task) ----

inline const std::vector<std::string>& prompt_pool(TaskKind kind) {
  static const std::map<TaskKind, std::vector<std::string>> pools = {
      {TaskKind::PickPlace,
       {
           "Move {object} to {dest}.",
           "Put {object} on {dest}.",
           "Place {object} next to {dest}.",
           "Pick up {object} and place it in {dest}.",
           "Relocate {object} to {dest}.",
           "Take {object} over to {dest}.",
           "Grab {object} and set it down in {dest}.",
           "Transfer {object} into {dest}.",
           "Carry {object} to {dest}.",
           "Move the {object} into the {dest}.",
           "Please move {object} to {dest}.",
           "Set {object} in {dest}.",
           "Bring {object} to {dest}.",
           "Position {object} at {dest}.",
           "Put the {object} into the {dest}.",
           "Pick {object} and move it to {dest}.",
           "Shift {object} over to {dest}.",
           "Deposit {object} in {dest}.",
           "Take the {object} and put it in the {dest}.",
           "Move {object} over to the {dest}.",
       }},
      {TaskKind::Pour,
       {
           "Pour {liquid}.",
           "Pour {liquid} into {dest}.",
           "Pour {liquid} from {source}.",
           "Empty the {source} into the {dest}.",
           "Decant {liquid} into {dest}.",
           "Transfer the {liquid} into the {dest}.",
           "Pour the {liquid} from the {source} into the {dest}.",
           "Tip the {liquid} into {dest}.",
           "Pour out the {liquid}.",
           "Please pour {liquid} into {dest}.",
           "Move the {liquid} into the {dest}.",
           "Pour the contents of the {source} into the {dest}.",
           "Empty {source} into {dest}.",
           "Add the {liquid} to the {dest} by pouring.",
           "Get the {liquid} into the {dest}.",
           "Carefully pour {liquid} into the {dest}.",
           "Pour all the {liquid} into {dest}.",
           "Decant the {source} into the {dest}.",
           "Transfer {liquid} from {source} to {dest}.",
           "Pour {liquid} out of the {source} into the {dest}.",
       }},
      {TaskKind::Stir,
       {
           "Stir {display_liquid}.",
           "Stir {display_liquid} in {container}.",
           "Perform stirring.",
           "Stir the contents of the {container}.",
           "Give the {container} a stir.",
           "Mix the liquid in the {container} with the stirrer.",
           "Stir the solution in the {container}.",
           "Use the stick to stir the {container}.",
           "Please stir the {container}.",
           "Agitate the liquid in the {container} by stirring.",
           "Stir everything in the {container}.",
           "Blend the liquids in the {container}.",
           "Stir the mixture.",
           "Stir the mixture in the {container}.",
           "Carry out a stirring operation.",
           "Stir the liquid thoroughly.",
           "Do the stirring step.",
           "Stir the solution.",
           "Perform the stirring procedure on the {container}.",
           "Mix the contents of the {container} by stirring.",
       }},
      {TaskKind::Mix,
       {
           "Conduct reactant mixing experiment.",
           "Perform multi-step mixing.",
           "Combine {liquid_a} and {liquid_b}.",
           "Mix {liquid_a} with {liquid_b}.",
           "Run the reactant mixing procedure.",
           "Combine the two reagents in the {dest}.",
           "Mix {liquid_a} and {liquid_b} in the {dest}.",
           "Carry out the mixing experiment.",
           "Prepare a mixture of {liquid_a} and {liquid_b}.",
           "Perform the reactant mixing experiment.",
           "Do the multi-step mixing task.",
           "Combine the reagents and stir.",
           "Mix the two liquids together.",
           "Blend {liquid_a} and {liquid_b} in the {dest}.",
           "Execute the mixing protocol.",
           "Combine both reagents into one container.",
           "Make a mixture from {liquid_a} and {liquid_b}.",
           "Run a mixing experiment with the two reagents.",
           "Mix the reactants.",
           "Conduct the mixing procedure.",
       }},
      {TaskKind::Crystallize,
       {
           "Conduct crystallization.",
           "Grow {seed} from {display_solution}.",
           "Perform crystallization cultivation.",
           "Run the crystallization experiment.",
           "Carry out crystallization cultivation.",
           "Start a crystal growth experiment.",
           "Cultivate crystals in the {dish}.",
           "Grow crystals from the {display_solution}.",
           "Set up the crystallization procedure.",
           "Perform the crystal cultivation experiment.",
           "Conduct the crystallization cultivation experiment.",
           "Begin crystallization.",
           "Do the crystallization task.",
           "Prepare the {dish} for crystal growth.",
           "Grow a crystal using the {display_solution}.",
           "Run crystal cultivation.",
           "Execute the crystallization protocol.",
           "Crystallize the solution in the {dish}.",
           "Carry out the crystal growing procedure.",
           "Perform crystallization in the {dish}.",
       }},
      {TaskKind::Weigh,
       {
           "Weigh {container}.",
           "Weigh {container} with the balance.",
           "Measure the weight of the {container}.",
           "Put the {container} on the balance and weigh it.",
           "Weigh the {container} on the balance.",
           "Find out how much the {container} weighs.",
           "Determine the weight of the {container}.",
           "Use the balance to weigh the {container}.",
           "Weigh the contents of the {container}.",
           "Please weigh the {container}.",
           "Measure how heavy the {container} is.",
           "Weigh the liquid in the {container}.",
           "Check the weight of the {container}.",
           "Take a weight reading of the {container}.",
           "Weigh the {container} using the laboratory balance.",
           "Record the weight of the {container}.",
           "Get the {container} weighed.",
           "Perform the weighing step on the {container}.",
           "Measure the {container} on the balance.",
           "Carry out the weighing procedure.",
       }},
      {TaskKind::Shake,
       {
           "Load {container} onto the shaker.",
           "Shake {container}.",
           "Put the {container} on the shaker.",
           "Place the {container} onto the shaker and run it.",
           "Shake the {container} on the shaker.",
           "Load the {container} on the shaker and start shaking.",
           "Use the shaker to mix the {container}.",
           "Please shake the {container}.",
           "Agitate the {container} on the shaker.",
           "Run the shaker with the {container} loaded.",
           "Mix the {container} by shaking.",
           "Set the {container} on the shaker.",
           "Shake up the {container}.",
           "Perform the shaking step on the {container}.",
           "Put the {container} onto the shaker and shake it.",
           "Load the {container} onto the laboratory shaker.",
           "Start the shaking procedure for the {container}.",
           "Shake the contents of the {container}.",
           "Carry out shaking on the {container}.",
           "Agitate the {container} using the shaker.",
       }},
  };
  static const std::vector<std::string> empty;
  auto it = pools.find(kind);
  return it == pools.end() ? empty : it->second;
}

// Slot values as they appear in prompt text.
inline std::map<std::string, std::string> prompt_slots(const TaskSpec& spec) {
  std::map<std::string, std::string> slots;
  for (const auto& [k, v] : spec.bindings) slots[k] = display_name(v);
  // natural-language aliases used by some templates
  if (spec.kind == TaskKind::Stir) slots["display_liquid"] = "the liquid";
  if (spec.kind == TaskKind::Crystallize) {
    auto it = spec.bindings.find("solution");
    slots["display_solution"] = it == spec.bindings.end() ? "solution" : display_name(it->second);
  }
  return slots;
}

inline std::string fill_slots(const std::string& tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      size_t close = tmpl.find('}', i);
      std::string key = tmpl.substr(i + 1, close - i - 1);
      auto it = slots.find(key);
      out += it == slots.end() ? "{" + key + "}" : it->second;
      i = close + 1;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

inline std::string sample_prompt(const TaskSpec& spec, Rng& rng) {
  const auto& pool = prompt_pool(spec.kind);
  if (pool.empty()) return "";
  return fill_slots(pool[rng.index(pool.size())], prompt_slots(spec));
}

// ---- goal interpretation by template matching ----

namespace detail {

// Match `text` against a template with {slots}: literal segments must match
// (case-insensitive), slots capture lazily.
inline bool match_template(const std::string& tmpl, const std::string& text,
                           std::map<std::string, std::string>& captures) {
  std::string t = to_lower(trim(text));
  std::string p = to_lower(tmpl);
  std::function<bool(size_t, size_t)> go = [&](size_t pi, size_t ti) -> bool {
    while (pi < p.size() && p[pi] != '{') {
      if (ti >= t.size() || p[pi] != t[ti]) return false;
      ++pi;
      ++ti;
    }
    if (pi >= p.size()) return ti >= t.size();
    size_t close = p.find('}', pi);
    std::string key = p.substr(pi + 1, close - pi - 1);
    size_t rest = close + 1;
    // lazy capture: shortest non-empty span first
    for (size_t len = 1; ti + len <= t.size(); ++len) {
      std::string cand = t.substr(ti, len);
      auto saved = captures;
      captures[key] = cand;
      if (go(rest, ti + len)) return true;
      captures = saved;
    }
    return false;
  };
  return go(0, 0);
}

}  // namespace detail

struct GoalMatch {
  TaskKind kind;
  std::map<std::string, std::string> bindings;           // defaults overridden by captures
  std::map<std::string, std::string> explicit_bindings;  // only what the goal named
  int template_index;
};

inline std::optional<GoalMatch> match_goal(const std::string& goal_text) {
  for (TaskKind kind : all_template_tasks()) {
    const auto& pool = prompt_pool(kind);
    TaskSpec dflt = default_task_spec(kind);
    auto dflt_slots = prompt_slots(dflt);
    for (size_t ti = 0; ti < pool.size(); ++ti) {
      std::map<std::string, std::string> captures;
      if (!detail::match_template(pool[ti], goal_text, captures)) continue;
      // captured display names must resolve in the task's catalog
      TaskSpec spec = dflt;
      WorldSchema schema = task_schema(dflt);
      std::map<std::string, std::string> named;
      bool ok = true;
      for (auto& [slot, cap] : captures) {
        if (starts_with(slot, "display_")) {  // alias slots are fixed phrases
          auto al = dflt_slots.find(slot);
          if (al == dflt_slots.end() || to_lower(al->second) != trim(cap)) ok = false;
          if (!ok) break;
          continue;
        }
        std::string id = id_name(trim(cap));
        if (!schema.resolves(id)) { ok = false; break; }
        if (spec.bindings.count(slot)) {
          spec.bindings[slot] = id;
          named[slot] = id;
        }
      }
      if (!ok) continue;
      return GoalMatch{kind, spec.bindings, named, static_cast<int>(ti)};
    }
  }
  return std::nullopt;
}

// Objective string format: Table-style description, plus explicit bindings
// when the goal named any.
inline std::string objective_for(TaskKind kind, const std::map<std::string, std::string>& explicit_bindings) {
  std::string obj = canonical_objective(kind);
  if (!explicit_bindings.empty()) {
    std::vector<std::string> parts;
    for (const auto& [k, v] : explicit_bindings) parts.push_back(k + "=" + v);
    obj += " (" + join(parts, "; ") + ")";
  }
  return obj;
}

inline std::map<std::string, std::string> bindings_of_objective(const std::string& objective);

// Inverse of objective_for over known tasks; Freeform (invalid) otherwise.
inline TaskSpec spec_of_objective(const std::string& objective) {
  auto kind = task_of_objective(objective);
  if (!kind) return TaskSpec{};
  TaskSpec spec = default_task_spec(*kind);
  for (const auto& [slot, id] : bindings_of_objective(objective))
    if (spec.bindings.count(slot)) spec.bindings[slot] = id;
  return spec;
}

inline std::map<std::string, std::string> bindings_of_objective(const std::string& objective) {
  std::map<std::string, std::string> out;
  size_t open = objective.find('(');
  if (open == std::string::npos) return out;
  size_t close = objective.rfind(')');
  if (close == std::string::npos || close <= open) return out;
  std::string inner = objective.substr(open + 1, close - open - 1);
  std::string cur;
  std::vector<std::string> parts;
  for (char c : inner) {
    if (c == ';') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  for (auto& p : parts) {
    auto eq = p.find('=');
    if (eq == std::string::npos) continue;
    out[trim(p.substr(0, eq))] = trim(p.substr(eq + 1));
  }
  return out;
}

}  // namespace labrig
