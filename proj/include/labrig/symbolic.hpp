#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "labrig/constraints.hpp"
#include "labrig/plan.hpp"

namespace labrig {

inline constexpr const char* kStationBalance = "balance";
inline constexpr const char* kStationShaker = "shaker";
inline constexpr const char* kStationCrystallization = "crystallization";
inline constexpr const char* kStationBench = "bench";

// Abstract world state over booleans and containment; the concrete simulator
// owns geometry, this owns plan-level truth.
struct SymState {
  std::map<std::string, std::map<std::string, int>> contents;  // container -> liquid -> mL
  std::map<std::string, std::string> location;                 // object -> host object ("" = bench)
  std::map<std::string, std::string> at_station;               // object -> station ("" = none)
  std::set<std::string> mixed, crystallized, shaken, weighed;
  std::string held;
  std::map<std::string, int> sink;  // liquid poured without a destination

  static SymState init(const WorldSchema& schema) {
    SymState st;
    for (const auto& o : schema.objects) {
      if (o.container) st.contents[o.id] = o.contents;
      st.location[o.id] = "";
      st.at_station[o.id] = o.at_station;
    }
    return st;
  }

  int total_volume(const std::string& container) const {
    auto it = contents.find(container);
    if (it == contents.end()) return 0;
    int sum = 0;
    for (const auto& [liq, ml] : it->second) sum += ml;
    return sum;
  }

  bool has_liquid(const std::string& container, const std::string& liquid) const {
    auto it = contents.find(container);
    if (it == contents.end()) return false;
    auto jt = it->second.find(liquid);
    return jt != it->second.end() && jt->second > 0;
  }

  int liquid_count(const std::string& container) const {
    auto it = contents.find(container);
    if (it == contents.end()) return 0;
    int n = 0;
    for (const auto& [liq, ml] : it->second)
      if (ml > 0) ++n;
    return n;
  }
};

struct SymbolicResult {
  SymState state;
  std::vector<Violation> violations;
  std::vector<std::string> notes;
};

namespace detail {

// Per-step dispatch. Each handler runs its checks in order and reports only
// the first violated one; a check whose rule is absent from the pack is
// skipped entirely, so execution falls through to the step's effects where
// those are still modellable.
struct SymExec {
  const WorldSchema& schema;
  const ConstraintPack& pack;
  SymState st;
  SymbolicResult out;

  SymExec(const WorldSchema& s, const ConstraintPack& p) : schema(s), pack(p), st(SymState::init(s)) {}

  bool enabled(const std::string& rule) const { return pack_has(pack, rule); }

  bool e1(const Subtask& step, const char* rule, ConstraintKind kind, const std::string& msg,
          std::map<std::string, std::string> fix_args = {}) {
    if (!enabled(rule)) return false;
    out.violations.push_back({step.index, ErrorCat::E1_Redundant, kind, msg, rule, std::move(fix_args)});
    return true;
  }

  bool e2(const Subtask& step, const char* rule, ConstraintKind kind, const std::string& msg,
          std::map<std::string, std::string> fix_args = {}) {
    if (!enabled(rule)) return false;
    out.violations.push_back({step.index, ErrorCat::E2_Logical, kind, msg, rule, std::move(fix_args)});
    return true;
  }

  bool is_container(const std::string& id) const {
    const auto* o = schema.find(id);
    return o && o->container;
  }
  bool is_graspable(const std::string& id) const {
    const auto* o = schema.find(id);
    return o && o->graspable;
  }
  bool avoided(const std::string& id) const { return pack_avoids(pack, id); }

  // first (liquid, container) with volume, skipping `exclude`; empty ids if none
  std::pair<std::string, std::string> find_liquid_source(const std::string& exclude) const {
    for (const auto& o : schema.objects) {
      if (!o.container || o.id == exclude) continue;
      auto it = st.contents.find(o.id);
      if (it == st.contents.end()) continue;
      for (const auto& [liq, ml] : it->second)
        if (ml > 0) return {liq, o.id};
    }
    return {"", ""};
  }

  std::vector<std::string> containers_with(const std::string& liquid,
                                           const std::string& exclude = "") const {
    std::vector<std::string> found;
    for (const auto& o : schema.objects)
      if (o.container && o.id != exclude && st.has_liquid(o.id, liquid)) found.push_back(o.id);
    return found;
  }

  void check_args_resolve(const Subtask& step) const {
    for (const auto& a : step.args)
      if (!schema.resolves(a)) throw UnresolvedReference(a);
    if (!step.verb_recognized) return;  // handled as a violation, not a throw
    for (const auto& u : step.unresolved)
      if (!schema.resolves(u)) throw UnresolvedReference(u);
  }

  std::string arg_or(const Subtask& step, size_t i, const std::string& dflt = "") const {
    return i < step.args.size() ? step.args[i] : dflt;
  }
  std::string prep_of(const Subtask& step, size_t i) const {
    return i < step.arg_preps.size() ? step.arg_preps[i] : "";
  }

  void relocate(const std::string& obj, const std::string& dest, const std::string& prep) {
    if (dest.empty()) {
      st.location[obj] = "";
      st.at_station[obj] = "";
    } else if (schema.is_station(dest)) {
      st.at_station[obj] = dest;
      st.location[obj] = "";
    } else {
      st.location[obj] = dest;  // in or beside: symbolic truth is "co-located"
      st.at_station[obj] = "";
      (void)prep;
    }
  }

  void release_if_holding(const std::string& obj) {
    if (st.held == obj) st.held = "";
  }

  bool located_at(const std::string& obj, const std::string& dest) const {
    auto l = st.location.find(obj);
    if (l != st.location.end() && l->second == dest) return true;
    auto s = st.at_station.find(obj);
    return s != st.at_station.end() && !dest.empty() && s->second == dest;
  }

  void run_step(const Subtask& step, const Subtask* prev) {
    check_args_resolve(step);

    // Redundancy has precedence: an exact duplicate of the immediately
    // preceding step is reported as such even when its preconditions fail too.
    if (prev && prev->text == step.text &&
        e1(step, rules::duplicate_step, ConstraintKind::Causal,
           "step repeats the immediately preceding step"))
      return;
    if (!step.verb_recognized) {
      e2(step, rules::unknown_verb, ConstraintKind::Causal,
         "instruction uses no known operation: " + step.text);
      return;  // no semantics to apply either way
    }
    switch (step.verb) {
      case Verb::Pick:  return run_pick(step);
      case Verb::Place: return run_place(step);
      case Verb::Move:  return run_move(step);
      case Verb::Pour:  return run_pour(step);
      case Verb::Stir:  return run_stir(step);
      case Verb::Add:   return run_add(step);
      case Verb::Wait:  return run_wait(step);
      case Verb::Weigh: return run_weigh(step);
      case Verb::Shake: return run_shake(step);
    }
  }

  void run_pick(const Subtask& step) {
    std::string obj = arg_or(step, 0);
    if (obj.empty() || !schema.find(obj)) {
      e2(step, rules::graspable_target, ConstraintKind::Physical, "nothing graspable named");
      return;
    }
    if (st.held == obj &&
        e1(step, rules::vacuous_step, ConstraintKind::Causal, obj + " is already held"))
      return;
    if (avoided(obj) &&
        e2(step, rules::avoid_object, ConstraintKind::Physical, obj + " must be avoided"))
      return;
    if (!is_graspable(obj) &&
        e2(step, rules::graspable_target, ConstraintKind::Physical, obj + " is not graspable"))
      return;
    if (!st.held.empty() && st.held != obj &&
        e2(step, rules::gripper_free, ConstraintKind::Physical, "gripper already holds " + st.held,
           {{"held", st.held}}))
      return;
    st.held = obj;
    st.location[obj] = "";
    st.at_station[obj] = "";
  }

  void run_place(const Subtask& step) {
    std::string obj = arg_or(step, 0);
    std::string dest = arg_or(step, 1);
    if (obj.empty() || !schema.find(obj)) {
      e2(step, rules::place_requires_held, ConstraintKind::Physical, "no object to place",
         {{"object", obj}});
      return;
    }
    if (st.held != obj && !dest.empty() && located_at(obj, dest) &&
        e1(step, rules::vacuous_step, ConstraintKind::Causal, obj + " is already at " + dest))
      return;
    if (st.held != obj &&
        e2(step, rules::place_requires_held, ConstraintKind::Physical, obj + " is not held",
           {{"object", obj}}))
      return;
    if (!dest.empty() && !schema.is_station(dest)) {
      const auto* d = schema.find(dest);
      std::string prep = prep_of(step, 1);
      bool beside = (prep == "next to" || prep == "beside" || prep == "near" || prep == "by");
      if ((!d || (!d->container && !beside)) &&
          e2(step, rules::place_destination, ConstraintKind::Physical,
             dest + " cannot receive " + obj))
        return;
    }
    release_if_holding(obj);
    relocate(obj, dest, prep_of(step, 1));
  }

  void run_move(const Subtask& step) {
    std::string obj = arg_or(step, 0);
    std::string dest = arg_or(step, 1);
    if (obj.empty() || !schema.find(obj)) {
      e2(step, rules::graspable_target, ConstraintKind::Physical, "nothing movable named");
      return;
    }
    if (!dest.empty() && st.held != obj && located_at(obj, dest) &&
        e1(step, rules::vacuous_step, ConstraintKind::Causal, obj + " is already at " + dest))
      return;
    if (avoided(obj) &&
        e2(step, rules::avoid_object, ConstraintKind::Physical, obj + " must be avoided"))
      return;
    if (!is_graspable(obj) &&
        e2(step, rules::graspable_target, ConstraintKind::Physical, obj + " is not graspable"))
      return;
    if (!st.held.empty() && st.held != obj &&
        e2(step, rules::gripper_free, ConstraintKind::Physical, "gripper already holds " + st.held,
           {{"held", st.held}}))
      return;
    if (!dest.empty() && !schema.is_station(dest) && !schema.find(dest) &&
        e2(step, rules::place_destination, ConstraintKind::Physical, "unknown destination " + dest))
      return;
    release_if_holding(obj);
    relocate(obj, dest, prep_of(step, 1));
  }

  void run_pour(const Subtask& step) {
    // container-source form: "pour contents from X [into Y]"
    std::string p0 = prep_of(step, 0);
    if (!step.args.empty() && (p0 == "from" || p0 == "of")) {
      std::string src = step.args[0];
      std::string dest = arg_or(step, 1);
      if (st.total_volume(src) <= 0) {
        auto [liq, other] = find_liquid_source(src);
        std::map<std::string, std::string> fix = {{"source", src}};
        if (!liq.empty() && is_container(src)) fix["liquid"] = liq;
        if (e2(step, rules::pour_source_nonempty, ConstraintKind::Physical,
               "nothing to pour from " + src, std::move(fix)))
          return;
      }
      if (st.held != src &&
          e2(step, rules::pour_source_held, ConstraintKind::Physical,
             src + " must be held to pour", {{"source", src}}))
        return;
      for (auto& [liq, ml] : st.contents[src]) {
        if (!dest.empty() && is_container(dest))
          st.contents[dest][liq] += ml;
        else
          st.sink[liq] += ml;
        ml = 0;
      }
      return;
    }

    // liquid form: "pour L [into C]"
    std::string liquid, dest;
    for (size_t i = 0; i < step.args.size(); ++i) {
      if (schema.is_liquid(step.args[i]) && liquid.empty()) liquid = step.args[i];
      else if (schema.find(step.args[i]) && dest.empty()) dest = step.args[i];
    }
    if (liquid.empty()) {
      e2(step, rules::pour_source_nonempty, ConstraintKind::Physical, "no liquid named to pour");
      return;
    }
    std::string source;
    if (!st.held.empty() && st.has_liquid(st.held, liquid)) {
      source = st.held;
    } else {
      auto cands = containers_with(liquid);
      if (cands.size() == 1) source = cands[0];
    }
    // redundancy before failed preconditions: re-pouring an already-delivered liquid
    if (!dest.empty() && st.has_liquid(dest, liquid) && source.empty() &&
        e1(step, rules::vacuous_step, ConstraintKind::Causal,
           dest + " already contains " + liquid + " and no source remains"))
      return;
    if (source.empty()) {
      std::map<std::string, std::string> fix = {{"liquid", liquid}};
      if (!st.held.empty() && is_container(st.held)) fix["source"] = st.held;
      e2(step, rules::pour_source_nonempty, ConstraintKind::Physical,
         "no container holds " + liquid, std::move(fix));
      return;  // no source: the transfer cannot be modelled
    }
    if (st.held != source &&
        e2(step, rules::pour_source_held, ConstraintKind::Physical,
           source + " must be held to pour", {{"source", source}}))
      return;
    if (dest.empty()) {
      std::vector<std::string> others;
      for (const auto& o : schema.objects)
        if (o.container && o.id != source) others.push_back(o.id);
      if (others.size() == 1) dest = others[0];
    }
    if ((dest.empty() || !is_container(dest)) &&
        e2(step, rules::pour_needs_destination, ConstraintKind::Physical,
           "no destination container for " + liquid))
      return;
    for (auto& [liq, ml] : st.contents[source]) {
      if (!dest.empty() && is_container(dest))
        st.contents[dest][liq] += ml;
      else
        st.sink[liq] += ml;
      ml = 0;
    }
  }

  void run_stir(const Subtask& step) {
    std::string c = step.args.empty() ? "" : step.args.back();
    if (c.empty()) {
      // "perform stirring": pick the container that needs it
      for (const auto& o : schema.objects)
        if (o.container && st.liquid_count(o.id) >= 2 && !st.mixed.count(o.id)) { c = o.id; break; }
      if (c.empty())
        for (const auto& o : schema.objects)
          if (o.container && st.total_volume(o.id) > 0) { c = o.id; break; }
    }
    if (c.empty() || !is_container(c)) {
      e2(step, rules::container_target, ConstraintKind::Physical, "nothing to stir in");
      return;
    }
    if (st.mixed.count(c) &&
        e1(step, rules::vacuous_step, ConstraintKind::Causal, c + " is already mixed"))
      return;
    bool have_stirrer = false;
    for (const auto& o : schema.objects)
      if (o.cls == ObjectClass::Stick && !avoided(o.id)) have_stirrer = true;
    if (!have_stirrer &&
        e2(step, rules::stir_requires_stirrer, ConstraintKind::Physical, "no stirrer in the scene"))
      return;
    if (st.total_volume(c) <= 0) {
      auto [liq, other] = find_liquid_source(c);
      std::map<std::string, std::string> fix = {{"container", c}};
      if (!liq.empty()) fix["liquid"] = liq;
      if (e2(step, rules::stir_has_liquid, ConstraintKind::Physical,
             c + " holds no liquid to stir", std::move(fix)))
        return;
    }
    if (!st.held.empty() && schema.find(st.held) &&
        schema.find(st.held)->cls != ObjectClass::Stick &&
        e2(step, rules::gripper_free, ConstraintKind::Physical, "gripper already holds " + st.held,
           {{"held", st.held}}))
      return;
    if (st.liquid_count(c) >= 2)
      st.mixed.insert(c);
    else
      out.notes.push_back("stir no-op: " + c + " holds a single liquid");
    if (!st.held.empty() && schema.find(st.held) && schema.find(st.held)->cls == ObjectClass::Stick)
      st.held = "";  // stirrer stays with the container
  }

  void run_add(const Subtask& step) {
    std::string liquid = arg_or(step, 0);
    std::string dest = arg_or(step, 1);
    if (!schema.is_liquid(liquid)) {
      e2(step, rules::add_source_available, ConstraintKind::Physical,
         liquid + " is not a known liquid");
      return;
    }
    if (dest.empty() || !is_container(dest)) {
      e2(step, rules::pour_needs_destination, ConstraintKind::Physical,
         "no destination container for " + liquid);
      return;
    }
    auto cands = containers_with(liquid, dest);
    if (st.has_liquid(dest, liquid) && cands.empty() &&
        e1(step, rules::vacuous_step, ConstraintKind::Causal, dest + " already contains " + liquid))
      return;
    if (cands.empty()) {
      e2(step, rules::add_source_available, ConstraintKind::Physical,
         "no container holds " + liquid, {{"liquid", liquid}});
      return;  // nothing to transfer either way
    }
    std::string source = cands[0];
    if (!st.held.empty() && st.held != source &&
        e2(step, rules::gripper_free, ConstraintKind::Physical, "gripper already holds " + st.held,
           {{"held", st.held}}))
      return;
    for (auto& [liq, ml] : st.contents[source]) {
      st.contents[dest][liq] += ml;
      ml = 0;
    }
    release_if_holding(source);
  }

  void run_wait(const Subtask& step) {
    std::vector<std::string> pending;
    for (const auto& o : schema.objects)
      if (o.container && st.at_station[o.id] == kStationCrystallization &&
          st.total_volume(o.id) > 0 && !st.crystallized.count(o.id))
        pending.push_back(o.id);
    if (pending.empty()) {
      e1(step, rules::wait_pending, ConstraintKind::Temporal,
         "nothing is pending; waiting is redundant");
      return;  // nothing happens while waiting regardless
    }
    for (const auto& c : pending) st.crystallized.insert(c);
  }

  void run_weigh(const Subtask& step) {
    std::string c;
    for (const auto& a : step.args)
      if (schema.find(a)) { c = a; break; }
    if (c.empty() || !is_container(c)) {
      e2(step, rules::container_target, ConstraintKind::Physical, "weighing needs a container");
      return;
    }
    if (st.weighed.count(c) &&
        e1(step, rules::vacuous_step, ConstraintKind::Causal, c + " was already weighed"))
      return;
    if (st.total_volume(c) <= 0) {
      auto [liq, other] = find_liquid_source(c);
      std::map<std::string, std::string> fix = {{"container", c}};
      if (!liq.empty()) fix["liquid"] = liq;
      if (e2(step, rules::weigh_after_fill, ConstraintKind::Temporal,
             "measuring " + c + " before it holds anything", std::move(fix)))
        return;
    }
    if (!st.held.empty() && st.held != c &&
        e2(step, rules::gripper_free, ConstraintKind::Physical, "gripper already holds " + st.held,
           {{"held", st.held}}))
      return;
    if (!is_graspable(c) && st.at_station[c] != kStationBalance &&
        e2(step, rules::graspable_target, ConstraintKind::Physical,
           c + " cannot be brought to the balance"))
      return;
    if (is_graspable(c)) {
      st.at_station[c] = kStationBalance;
      st.location[c] = "";
    }
    st.weighed.insert(c);
    release_if_holding(c);
  }

  void run_shake(const Subtask& step) {
    std::string c = arg_or(step, 0);
    if (c.empty() || !is_container(c)) {
      e2(step, rules::container_target, ConstraintKind::Physical, "shaking needs a container");
      return;
    }
    if (st.shaken.count(c) &&
        e1(step, rules::vacuous_step, ConstraintKind::Causal, c + " was already shaken"))
      return;
    if (st.at_station[c] != kStationShaker &&
        e2(step, rules::shake_on_shaker, ConstraintKind::Physical, c + " is not on the shaker",
           {{"container", c}}))
      return;
    st.shaken.insert(c);
    if (st.liquid_count(c) >= 2) st.mixed.insert(c);
  }
};

}  // namespace detail

inline SymbolicResult symbolic_execute(const Plan& plan, const WorldSchema& schema,
                                       const ConstraintPack& pack = default_constraint_pack()) {
  detail::SymExec exec(schema, pack);
  const Subtask* prev = nullptr;
  for (const auto& step : plan.steps) {
    exec.run_step(step, prev);
    prev = &step;
  }
  exec.out.state = exec.st;
  return exec.out;
}

// Task-level goal predicates over the abstract state; the simulator's
// check_success is the concrete mirror of these.
inline bool symbolic_goal_holds(TaskKind kind, const std::map<std::string, std::string>& slots,
                                const SymState& st) {
  auto slot = [&](const char* k) -> std::string {
    auto it = slots.find(k);
    return it == slots.end() ? "" : it->second;
  };
  auto at_station = [&](const std::string& obj, const char* station) {
    auto it = st.at_station.find(obj);
    return it != st.at_station.end() && it->second == station;
  };
  switch (kind) {
    case TaskKind::PickPlace: {
      auto it = st.location.find(slot("object"));
      return it != st.location.end() && it->second == slot("dest");
    }
    case TaskKind::Pour:
      return st.has_liquid(slot("dest"), slot("liquid"));
    case TaskKind::Stir:
      return st.mixed.count(slot("container")) > 0;
    case TaskKind::Mix:
      return st.has_liquid(slot("dest"), slot("liquid_a")) &&
             st.has_liquid(slot("dest"), slot("liquid_b")) && st.mixed.count(slot("dest")) > 0;
    case TaskKind::Crystallize: {
      auto seed = st.location.find(slot("seed"));
      return at_station(slot("dish"), kStationCrystallization) &&
             st.has_liquid(slot("dish"), slot("solution")) &&
             seed != st.location.end() && seed->second == slot("dish") &&
             st.crystallized.count(slot("dish")) > 0;
    }
    case TaskKind::Weigh:
      return st.weighed.count(slot("container")) > 0 &&
             at_station(slot("container"), kStationBalance);
    case TaskKind::Shake:
      return st.shaken.count(slot("container")) > 0 && at_station(slot("container"), kStationShaker);
    case TaskKind::Freeform:
      return false;
  }
  return false;
}

}  // namespace labrig
