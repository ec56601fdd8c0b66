#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "labrig/plan.hpp"

namespace labrig {

// Rule ids the symbolic executor understands. A constraint pack is the subset
// of these it should enforce; packs are data, semantics live in the executor.
namespace rules {
inline constexpr const char* duplicate_step = "duplicate-step";
inline constexpr const char* vacuous_step = "vacuous-step";
inline constexpr const char* unknown_verb = "unknown-verb";
inline constexpr const char* gripper_free = "gripper-free";
inline constexpr const char* graspable_target = "graspable-target";
inline constexpr const char* pour_source_nonempty = "pour-source-nonempty";
inline constexpr const char* pour_source_held = "pour-source-held";
inline constexpr const char* pour_needs_destination = "pour-needs-destination";
inline constexpr const char* add_source_available = "add-source-available";
inline constexpr const char* place_requires_held = "place-requires-held";
inline constexpr const char* stir_requires_stirrer = "stir-requires-stirrer";
inline constexpr const char* stir_has_liquid = "stir-has-liquid";
inline constexpr const char* shake_on_shaker = "shake-on-shaker";
inline constexpr const char* weigh_after_fill = "weigh-after-fill";
inline constexpr const char* wait_pending = "wait-pending";
inline constexpr const char* place_destination = "place-destination";
inline constexpr const char* container_target = "container-target";
inline constexpr const char* avoid_object = "avoid-object";  // discovered at runtime, never default
}  // namespace rules

using ConstraintPack = std::vector<Constraint>;

inline ConstraintPack default_constraint_pack() {
  auto c = [](ConstraintKind k, const char* name, const char* desc) {
    return Constraint{k, name, "*", desc};
  };
  return {
      c(ConstraintKind::Causal, rules::duplicate_step, "a step must not repeat the immediately preceding step"),
      c(ConstraintKind::Causal, rules::vacuous_step, "a step whose postcondition already holds is redundant"),
      c(ConstraintKind::Causal, rules::unknown_verb, "every step must use a known operation"),
      c(ConstraintKind::Physical, rules::gripper_free, "grasping requires a free gripper"),
      c(ConstraintKind::Physical, rules::graspable_target, "only graspable objects can be picked"),
      c(ConstraintKind::Physical, rules::pour_source_nonempty, "pouring requires contents in the source"),
      c(ConstraintKind::Physical, rules::pour_source_held, "pouring requires holding the source container"),
      c(ConstraintKind::Physical, rules::pour_needs_destination, "pouring requires a destination container"),
      c(ConstraintKind::Physical, rules::add_source_available, "adding a liquid requires a container that holds it"),
      c(ConstraintKind::Physical, rules::place_requires_held, "placing requires holding the object"),
      c(ConstraintKind::Physical, rules::stir_requires_stirrer, "stirring requires a stirrer in the scene"),
      c(ConstraintKind::Physical, rules::stir_has_liquid, "stirring requires liquid in the container"),
      c(ConstraintKind::Physical, rules::shake_on_shaker, "shaking requires the container on the shaker"),
      c(ConstraintKind::Temporal, rules::weigh_after_fill, "measuring an empty container precedes synthesis"),
      c(ConstraintKind::Temporal, rules::wait_pending, "waiting requires a pending process"),
      c(ConstraintKind::Physical, rules::place_destination, "placement destination must hold or host the object"),
      c(ConstraintKind::Physical, rules::container_target, "operation target must be a container"),
  };
}

inline json constraint_pack_to_json(const ConstraintPack& pack) {
  json arr = json::array();
  for (const auto& c : pack)
    arr.push_back({{"kind", constraint_kind_name(c.kind)},
                   {"name", c.name},
                   {"args", c.arg_pattern},
                   {"description", c.description}});
  return arr;
}

inline ConstraintPack constraint_pack_from_json(const json& arr) {
  ConstraintPack pack;
  for (const auto& e : arr)
    pack.push_back({constraint_kind_from(e.at("kind").get<std::string>()),
                    e.at("name").get<std::string>(), e.value("args", "*"),
                    e.value("description", "")});
  return pack;
}

inline bool pack_has(const ConstraintPack& pack, const std::string& rule) {
  for (const auto& c : pack)
    if (c.name == rule) return true;
  return false;
}

// avoid-object constraints name their target in arg_pattern
inline bool pack_avoids(const ConstraintPack& pack, const std::string& id) {
  for (const auto& c : pack)
    if (c.name == rules::avoid_object && c.arg_pattern == id) return true;
  return false;
}

inline json violations_to_json(const std::vector<Violation>& vs) {
  json arr = json::array();
  for (const auto& v : vs)
    arr.push_back({{"step", v.step_index},
                   {"category", v.category == ErrorCat::E1_Redundant ? "E1" : "E2"},
                   {"kind", constraint_kind_name(v.constraint_kind)},
                   {"message", v.message},
                   {"rule", v.rule},
                   {"fix_args", v.fix_args}});
  return arr;
}

inline std::vector<Violation> violations_from_json(const json& arr) {
  std::vector<Violation> vs;
  for (const auto& e : arr) {
    Violation v;
    v.step_index = e.at("step").get<int>();
    v.category = e.at("category") == "E1" ? ErrorCat::E1_Redundant : ErrorCat::E2_Logical;
    v.constraint_kind = constraint_kind_from(e.value("kind", "physical"));
    v.message = e.value("message", "");
    v.rule = e.at("rule").get<std::string>();
    if (e.contains("fix_args"))
      for (auto it = e["fix_args"].begin(); it != e["fix_args"].end(); ++it)
        v.fix_args[it.key()] = it.value().get<std::string>();
    vs.push_back(v);
  }
  return vs;
}

// ---- fix table: rule id -> corrective edit ----

struct FixAction {
  enum class Kind { DeleteStep, InsertEnabler };
  Kind kind = Kind::DeleteStep;
  // step template with {placeholders} filled from Violation::fix_args;
  // falls back to deletion when a placeholder has no binding
  std::string enabler;
};

using FixTable = std::map<std::string, FixAction>;

inline FixTable default_fix_table() {
  FixTable t;
  t[rules::duplicate_step] = {FixAction::Kind::DeleteStep, ""};
  t[rules::vacuous_step] = {FixAction::Kind::DeleteStep, ""};
  t[rules::unknown_verb] = {FixAction::Kind::DeleteStep, ""};
  t[rules::gripper_free] = {FixAction::Kind::InsertEnabler, "place {held} on bench"};
  t[rules::graspable_target] = {FixAction::Kind::DeleteStep, ""};
  t[rules::pour_source_nonempty] = {FixAction::Kind::InsertEnabler, "add {liquid} to {source}"};
  t[rules::pour_source_held] = {FixAction::Kind::InsertEnabler, "pick up {source}"};
  t[rules::pour_needs_destination] = {FixAction::Kind::DeleteStep, ""};
  t[rules::add_source_available] = {FixAction::Kind::DeleteStep, ""};
  t[rules::place_requires_held] = {FixAction::Kind::InsertEnabler, "pick up {object}"};
  t[rules::stir_requires_stirrer] = {FixAction::Kind::DeleteStep, ""};
  t[rules::stir_has_liquid] = {FixAction::Kind::InsertEnabler, "add {liquid} to {container}"};
  t[rules::shake_on_shaker] = {FixAction::Kind::InsertEnabler, "place {container} on shaker"};
  t[rules::weigh_after_fill] = {FixAction::Kind::InsertEnabler, "add {liquid} to {container}"};
  t[rules::wait_pending] = {FixAction::Kind::DeleteStep, ""};
  t[rules::place_destination] = {FixAction::Kind::DeleteStep, ""};
  t[rules::container_target] = {FixAction::Kind::DeleteStep, ""};
  t[rules::avoid_object] = {FixAction::Kind::DeleteStep, ""};
  return t;
}

inline json fix_table_to_json(const FixTable& t) {
  json obj = json::object();
  for (const auto& [rule, action] : t) {
    if (action.kind == FixAction::Kind::DeleteStep)
      obj[rule] = {{"action", "delete"}};
    else
      obj[rule] = {{"action", "insert_enabler"}, {"enabler", action.enabler}};
  }
  return obj;
}

inline FixTable fix_table_from_json(const json& obj) {
  FixTable t;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const json& e = it.value();
    if (e.at("action") == "delete")
      t[it.key()] = {FixAction::Kind::DeleteStep, ""};
    else
      t[it.key()] = {FixAction::Kind::InsertEnabler, e.at("enabler").get<std::string>()};
  }
  return t;
}

// Fill {placeholders}; nullopt when any placeholder has no binding.
inline std::optional<std::string> fill_template(const std::string& tmpl,
                                                const std::map<std::string, std::string>& args) {
  std::string out;
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      size_t close = tmpl.find('}', i);
      if (close == std::string::npos) return std::nullopt;
      std::string key = tmpl.substr(i + 1, close - i - 1);
      auto it = args.find(key);
      if (it == args.end() || it->second.empty()) return std::nullopt;
      std::string v = it->second;
      std::replace(v.begin(), v.end(), '_', ' ');
      out += v;
      i = close + 1;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

// f_corr for the rule backend: delete redundant steps, insert enabling steps
// before logical errors. One edit per violating step per pass.
inline Plan apply_fixes(const Plan& plan, const std::vector<Violation>& violations,
                        const WorldSchema& schema, const FixTable& table = default_fix_table()) {
  std::vector<PlanEdit> edits;
  std::set<int> touched;
  for (const auto& v : violations) {
    if (touched.count(v.step_index)) continue;
    touched.insert(v.step_index);
    auto it = table.find(v.rule);
    if (it == table.end()) continue;  // no fix known: leave the step alone
    size_t pos = static_cast<size_t>(v.step_index - 1);
    if (pos >= plan.steps.size()) continue;
    if (it->second.kind == FixAction::Kind::DeleteStep) {
      edits.push_back({EditKind::Delete, pos, plan.steps[pos]});
      continue;
    }
    auto text = fill_template(it->second.enabler, v.fix_args);
    if (!text) {  // unfillable enabler: deleting beats leaving a broken step
      edits.push_back({EditKind::Delete, pos, plan.steps[pos]});
      continue;
    }
    edits.push_back({EditKind::Insert, pos, parse_subtask(0, *text, &schema)});
  }
  std::stable_sort(edits.begin(), edits.end(),
                   [](const PlanEdit& a, const PlanEdit& b) { return a.pos < b.pos; });
  Plan out = plan;
  long delta = 0;
  for (const auto& e : edits) {
    long at = static_cast<long>(e.pos) + delta;
    if (e.kind == EditKind::Delete) {
      out.steps.erase(out.steps.begin() + at);
      --delta;
    } else {
      out.steps.insert(out.steps.begin() + at, e.payload);
      ++delta;
    }
  }
  for (size_t i = 0; i < out.steps.size(); ++i) out.steps[i].index = static_cast<int>(i) + 1;
  return out;
}

}  // namespace labrig
