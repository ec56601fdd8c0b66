#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "labrig/common.hpp"
#include "labrig/control_types.hpp"
#include "labrig/grounder.hpp"
#include "labrig/rng.hpp"
#include "labrig/tasks.hpp"

namespace labrig {

struct PlacementFailed : std::runtime_error {
  explicit PlacementFailed(const std::string& id)
      : std::runtime_error("no clear placement found for " + id) {}
};

struct UnknownId : std::runtime_error {
  explicit UnknownId(const std::string& id) : std::runtime_error("unknown object " + id) {}
};

struct StationGeom {
  std::string name;
  Vec2 center;
  double radius = 0.10;
};

inline double object_radius(ObjectClass c) {
  switch (c) {
    case ObjectClass::Cuboid:    return 0.030;
    case ObjectClass::Cylinder:  return 0.030;
    case ObjectClass::Cup:       return 0.035;
    case ObjectClass::Stick:     return 0.020;
    case ObjectClass::Beaker:    return 0.045;
    case ObjectClass::PetriDish: return 0.050;
  }
  return 0.030;
}

// Desk geometry and execution thresholds. Stations line the top edge; loose
// objects sample inside the bench rectangle below them, so a fresh scene never
// starts with anything already on a station unless the task says so.
struct WorldConfig {
  double arena_min = 0.0, arena_max = 1.0;
  std::vector<StationGeom> stations = {{kStationBalance, {0.15, 0.85}, 0.10},
                                       {kStationShaker, {0.50, 0.85}, 0.10},
                                       {kStationCrystallization, {0.85, 0.85}, 0.10},
                                       {kStationBench, {0.50, 0.30}, 0.14}};
  double bench_x0 = 0.18, bench_x1 = 0.82, bench_y0 = 0.10, bench_y1 = 0.54;
  Vec2 home{0.50, 0.05};
  double clearance_factor = 1.5;  // × (r_i + r_j) center distance at sampling time
  int placement_attempts = 1000;
  double eps_reach = 0.02;
  double eps_grasp = 0.03;
  double eps_pour = 0.06;
  double eps_place = 0.05;
  double v_max = 0.05;    // m per tick
  int tick_budget = 400;  // per move primitive
  double spill_fraction = 0.0;
  bool record_trace = true;
};

struct WorldObject {
  std::string id;
  ObjectClass cls = ObjectClass::Cuboid;
  Vec2 pos;
  double radius = 0.03;
  bool graspable = false;
};

struct ContainerState {
  std::map<std::string, int> contents;  // liquid -> mL; entries are always > 0
  bool mixed = false;
  bool crystallized = false;
  bool shaken = false;
  bool weighed = false;

  int total() const {
    int s = 0;
    for (const auto& [liq, ml] : contents) s += ml;
    return s;
  }
};

struct ArmState {
  Vec2 ee;
  bool engaged = false;
  std::string held;  // object id, empty when free
};

struct LabWorld {
  WorldConfig cfg;
  std::vector<WorldObject> objects;
  std::map<std::string, ContainerState> containers;
  ArmState arm;
  std::map<std::string, double> weight_readings;  // grams, latest balance reading
  int spilled = 0;                                // mL lost to the spill fraction
  uint64_t seed = 0;

  const WorldObject* find(const std::string& id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
  WorldObject* find(const std::string& id) {
    return const_cast<WorldObject*>(static_cast<const LabWorld*>(this)->find(id));
  }

  bool is_container(const std::string& id) const { return containers.count(id) > 0; }

  int total_volume(const std::string& id) const {
    auto it = containers.find(id);
    return it == containers.end() ? 0 : it->second.total();
  }

  // Includes spilled liquid so the ledger balances under any spill fraction.
  int total_liquid() const {
    int s = spilled;
    for (const auto& [id, c] : containers) s += c.total();
    return s;
  }

  const StationGeom* station(const std::string& name) const {
    for (const auto& s : cfg.stations)
      if (s.name == name) return &s;
    return nullptr;
  }
};

// ---- distance & collision sensing ----

inline double center_distance(const LabWorld& w, const std::string& a, const std::string& b) {
  const WorldObject* oa = w.find(a);
  const WorldObject* ob = w.find(b);
  if (!oa) throw UnknownId(a);
  if (!ob) throw UnknownId(b);
  return (oa->pos - ob->pos).norm();
}

// Surface separation: center distance minus both radii, clamped at contact.
inline double distance(const LabWorld& w, const std::string& a, const std::string& b) {
  const WorldObject* oa = w.find(a);
  const WorldObject* ob = w.find(b);
  if (!oa) throw UnknownId(a);
  if (!ob) throw UnknownId(b);
  return std::max(0.0, (oa->pos - ob->pos).norm() - oa->radius - ob->radius);
}

// Any two resting discs overlapping. A held object is lifted off the desk and
// does not count.
inline bool detect_collision(const LabWorld& w) {
  for (size_t i = 0; i < w.objects.size(); ++i)
    for (size_t j = i + 1; j < w.objects.size(); ++j) {
      if (w.objects[i].id == w.arm.held || w.objects[j].id == w.arm.held) continue;
      if ((w.objects[i].pos - w.objects[j].pos).norm() <
          w.objects[i].radius + w.objects[j].radius)
        return true;
    }
  return false;
}

// Station containment is by center point; anything outside the named regions
// is loose on the bench and reports no station.
inline std::string station_of(const LabWorld& w, const Vec2& p) {
  for (const auto& s : w.cfg.stations) {
    if (s.name == kStationBench) continue;
    if ((p - s.center).norm() <= s.radius) return s.name;
  }
  return "";
}

inline std::string station_of(const LabWorld& w, const std::string& id) {
  const WorldObject* o = w.find(id);
  if (!o) throw UnknownId(id);
  return station_of(w, o->pos);
}

// ---- scene sampling ----

inline LabWorld sample_scene(const TaskSpec& spec, uint64_t seed, WorldConfig cfg = {}) {
  if (!spec.valid()) throw std::invalid_argument("scene sampling needs a template task");
  WorldSchema schema = task_schema(spec);
  LabWorld w;
  w.cfg = std::move(cfg);
  w.seed = seed;
  w.arm.ee = w.cfg.home;
  Rng rng(mix_seed({0x5ce9e5ull, seed}));
  for (const auto& so : schema.objects) {
    WorldObject o{so.id, so.cls, {}, object_radius(so.cls), so.graspable};
    const StationGeom* region = so.at_station.empty() ? nullptr : w.station(so.at_station);
    bool placed = false;
    for (int attempt = 0; attempt < w.cfg.placement_attempts && !placed; ++attempt) {
      Vec2 p;
      if (region) {
        double rmax = std::max(0.0, region->radius - o.radius - 0.005);
        double r = rmax * std::sqrt(rng.uniform01());
        double a = 2.0 * std::numbers::pi * rng.uniform01();
        p = region->center + Vec2{r * std::cos(a), r * std::sin(a)};
      } else {
        p = {rng.uniform(w.cfg.bench_x0, w.cfg.bench_x1),
             rng.uniform(w.cfg.bench_y0, w.cfg.bench_y1)};
      }
      placed = true;
      for (const auto& other : w.objects)
        if ((p - other.pos).norm() < w.cfg.clearance_factor * (o.radius + other.radius)) {
          placed = false;
          break;
        }
      if (placed) o.pos = p;
    }
    if (!placed) throw PlacementFailed(so.id);
    w.objects.push_back(o);
    if (so.container) w.containers[so.id].contents = so.contents;
  }
  return w;
}

// ---- observation ----

inline SceneDigest digest_of(const LabWorld& w) {
  SceneDigest d;
  d.held = w.arm.held;
  for (const auto& o : w.objects) {
    SceneDigest::Entry e;
    e.id = o.id;
    e.cls = o.cls;
    e.station = station_of(w, o.pos);
    if (auto it = w.containers.find(o.id); it != w.containers.end())
      e.contents = it->second.contents;
    d.entries.push_back(std::move(e));
  }
  return d;
}

// Which objects fill the state-vector slots for a task; order is fixed so
// datasets and predictions line up across runs.
inline std::vector<std::string> tracked_ids(const TaskSpec& spec) {
  auto b = [&](const char* slot) {
    auto it = spec.bindings.find(slot);
    return it == spec.bindings.end() ? std::string() : it->second;
  };
  std::vector<std::string> ids;
  switch (spec.kind) {
    case TaskKind::PickPlace:   ids = {b("object"), b("dest")}; break;
    case TaskKind::Pour:        ids = {b("source"), b("dest")}; break;
    case TaskKind::Stir:        ids = {b("container"), b("stirrer")}; break;
    case TaskKind::Mix:         ids = {b("cup_a"), b("cup_b"), b("dest")}; break;
    case TaskKind::Crystallize: ids = {b("cup"), b("dish"), b("seed")}; break;
    case TaskKind::Weigh:       ids = {b("container")}; break;
    case TaskKind::Shake:       ids = {b("container")}; break;
    case TaskKind::Freeform:    break;
  }
  ids.erase(std::remove(ids.begin(), ids.end(), std::string()), ids.end());
  return ids;
}

inline StateVec state_of(const LabWorld& w, const std::vector<std::string>& tracked,
                         double phase = 0.0) {
  StateVec s = zero_state();
  s[sv::gripper_x] = w.arm.ee.x;
  s[sv::gripper_y] = w.arm.ee.y;
  s[sv::engaged] = w.arm.engaged ? 1.0 : 0.0;
  int oi = 0, vi = 0;
  for (const auto& id : tracked) {
    const WorldObject* o = w.find(id);
    if (!o) throw UnknownId(id);
    if (oi < sv::objects) {
      s[static_cast<size_t>(sv::object_xy + 2 * oi)] = o->pos.x;
      s[static_cast<size_t>(sv::object_xy + 2 * oi + 1)] = o->pos.y;
      ++oi;
    }
    if (vi < sv::volumes && w.is_container(id)) {
      s[static_cast<size_t>(sv::volume + vi)] = w.total_volume(id) / 100.0;  // mL at O(1) scale
      ++vi;
    }
  }
  s[sv::phase] = phase;
  return s;
}

struct Observation {
  StateVec state;
  SceneDigest digest;
  std::string summary;
};

inline Observation observe(const LabWorld& w, const std::vector<std::string>& tracked,
                           double phase = 0.0) {
  Observation o;
  o.state = state_of(w, tracked, phase);
  o.digest = digest_of(w);
  o.summary = render_scene_digest(o.digest);
  return o;
}

// ---- primitive execution ----

struct TickRecord {
  int t = 0;
  Vec2 ee;
  bool engaged = false;
  std::string held;
  std::string event;  // "", collision, grasp, release, pour, stir
  std::vector<std::pair<std::string, Vec2>> objects;
  std::map<std::string, ContainerState> containers;
};

struct ExecutionResult {
  enum class Outcome { Done, PreconditionFailed, Collision, Timeout };
  Outcome outcome = Outcome::Done;
  int ticks = 0;
  double reward = 0.0;
  std::string note;  // failed precondition or no-op detail
  std::vector<TickRecord> trace;
};

inline const char* outcome_name(ExecutionResult::Outcome o) {
  switch (o) {
    case ExecutionResult::Outcome::Done:               return "done";
    case ExecutionResult::Outcome::PreconditionFailed: return "precondition_failed";
    case ExecutionResult::Outcome::Collision:          return "collision";
    case ExecutionResult::Outcome::Timeout:            return "timeout";
  }
  return "done";
}

using ControlFn = std::function<ControlAction(const ControlObservation&)>;

namespace detail {

struct ResolvedTarget {
  Vec2 point;
  std::string object_id;  // empty when the target is a station region
  bool ok = false;
};

// Deterministic free spot inside a station region: the center, then rings
// outward. Keeps releases from stacking objects on one point.
inline Vec2 free_drop_point(const LabWorld& w, const StationGeom& st, double payload_r) {
  auto clear = [&](const Vec2& p) {
    if (p.x < w.cfg.arena_min + 0.03 || p.x > w.cfg.arena_max - 0.03 ||
        p.y < w.cfg.arena_min + 0.03 || p.y > w.cfg.arena_max - 0.03)
      return false;
    for (const auto& o : w.objects) {
      if (o.id == w.arm.held) continue;
      if ((p - o.pos).norm() < payload_r + o.radius + 0.002) return false;
    }
    return true;
  };
  if (clear(st.center)) return st.center;
  // Containment is by center point, so rings may run almost to the region
  // edge even when the payload disc pokes out.
  double rmax = std::max(0.0, st.radius - 0.005);
  for (int ring = 1; ring * 0.025 <= rmax; ++ring) {
    double r = ring * 0.025;
    int n = 8 * ring;
    for (int k = 0; k < n; ++k) {
      double a = 2.0 * std::numbers::pi * k / n;
      Vec2 p = st.center + Vec2{r * std::cos(a), r * std::sin(a)};
      if (clear(p)) return p;
    }
  }
  return st.center;
}

inline ResolvedTarget resolve_target(const LabWorld& w, const std::string& target) {
  ResolvedTarget rt;
  std::string name = to_lower(trim(target));
  for (const auto& st : w.cfg.stations)
    if (st.name == name) {
      double payload_r = 0.02;
      if (const WorldObject* h = w.find(w.arm.held)) payload_r = h->radius;
      rt.point = free_drop_point(w, st, payload_r);
      rt.ok = true;
      return rt;
    }
  const WorldObject* o = w.find(target);
  if (!o) o = w.find(id_name(name));
  if (!o) return rt;
  rt.point = o->pos;
  rt.object_id = o->id;
  rt.ok = true;
  return rt;
}

// The arm (plus payload when carrying) overlapping any disc it is not aimed
// at. Sensed every tick for the reward; it does not stop the motion.
inline bool colliding(const LabWorld& w, const std::string& target_id) {
  double moving_r = 0.0;
  if (const WorldObject* h = w.find(w.arm.held)) moving_r = h->radius;
  for (const auto& o : w.objects) {
    if (o.id == w.arm.held || o.id == target_id) continue;
    if ((w.arm.ee - o.pos).norm() < moving_r + o.radius) return true;
  }
  return false;
}

inline Vec2 nearest_obstacle(const LabWorld& w, const std::string& target_id) {
  const WorldObject* best = nullptr;
  double best_d = 0.0;
  for (const auto& o : w.objects) {
    if (o.id == w.arm.held || o.id == target_id) continue;
    double d = (o.pos - w.arm.ee).norm() - o.radius;
    if (!best || d < best_d) {
      best = &o;
      best_d = d;
    }
  }
  return best ? best->pos - w.arm.ee : Vec2{};
}

inline void record_tick(const LabWorld& w, ExecutionResult& res, int t, const std::string& event) {
  if (!w.cfg.record_trace) return;
  TickRecord r;
  r.t = t;
  r.ee = w.arm.ee;
  r.engaged = w.arm.engaged;
  r.held = w.arm.held;
  r.event = event;
  for (const auto& o : w.objects) r.objects.emplace_back(o.id, o.pos);
  r.containers = w.containers;
  res.trace.push_back(std::move(r));
}

}  // namespace detail

// Controller-facing view of one Move tick: where the arm is being driven and
// what stands nearest in the way.
inline ControlObservation control_observation(const LabWorld& w, const Vec2& drive_point,
                                              const std::string& target_id) {
  ControlObservation obs;
  obs.ee = w.arm.ee;
  obs.to_target = drive_point - w.arm.ee;
  obs.engaged = w.arm.engaged;
  obs.to_obstacle = detail::nearest_obstacle(w, target_id);
  return obs;
}

struct MoveTick {
  double progress = 0.0;
  bool collided = false;
  bool reached = false;
};

// Integrates one velocity command: clamp to v_max, step, keep the arm inside
// the arena, carry any payload along.
inline MoveTick apply_move_tick(LabWorld& w, const Vec2& drive_point, const std::string& target_id,
                                const ControlAction& act) {
  Vec2 v = act.v.clamped(w.cfg.v_max);
  double prev_d = (drive_point - w.arm.ee).norm();
  w.arm.ee += v;
  w.arm.ee.x = std::clamp(w.arm.ee.x, w.cfg.arena_min, w.cfg.arena_max);
  w.arm.ee.y = std::clamp(w.arm.ee.y, w.cfg.arena_min, w.cfg.arena_max);
  if (WorldObject* held = w.find(w.arm.held)) held->pos = w.arm.ee;
  MoveTick out;
  double next_d = (drive_point - w.arm.ee).norm();
  out.progress = prev_d - next_d;
  out.collided = detail::colliding(w, target_id);
  out.reached = next_d <= w.cfg.eps_reach;
  return out;
}

// Runs one primitive to completion. Move ticks the controller until the drive
// point is within eps_reach or the budget runs out; grasp/pour/stir resolve in
// a single tick once their preconditions hold. t0 offsets trace timestamps so
// a sequence forms one continuous log.
inline ExecutionResult step_primitive(LabWorld& w, const Primitive& p, const ControlFn& controller,
                                      const RewardWeights& rw = {}, int t0 = 0) {
  ExecutionResult res;
  auto fail = [&](const std::string& why) {
    res.outcome = ExecutionResult::Outcome::PreconditionFailed;
    res.note = why;
    return res;
  };
  switch (p.kind) {
    case Primitive::Kind::Move: {
      detail::ResolvedTarget rt = detail::resolve_target(w, p.target);
      if (!rt.ok) return fail("unknown move target " + p.target);
      if ((rt.point - w.arm.ee).norm() <= w.cfg.eps_reach) return res;
      bool reached = false;
      for (int tick = 0; tick < w.cfg.tick_budget; ++tick) {
        ControlAction act = controller(control_observation(w, rt.point, rt.object_id));
        MoveTick mt = apply_move_tick(w, rt.point, rt.object_id, act);
        res.reward += tick_reward(rw, mt.progress, false, mt.collided);
        ++res.ticks;
        detail::record_tick(w, res, t0 + res.ticks - 1, mt.collided ? "collision" : "");
        if (mt.reached) {
          reached = true;
          break;
        }
      }
      if (!reached) res.outcome = ExecutionResult::Outcome::Timeout;
      if (!w.arm.engaged && detail::colliding(w, rt.object_id))
        res.outcome = ExecutionResult::Outcome::Collision;  // parked inside an obstacle
      return res;
    }
    case Primitive::Kind::Grasp: {
      if (p.engage) {
        if (w.arm.engaged) return fail("gripper already engaged");
        const WorldObject* best = nullptr;
        double best_d = 0.0;
        for (const auto& o : w.objects) {
          if (!o.graspable) continue;
          double d = std::max(0.0, (o.pos - w.arm.ee).norm() - o.radius);
          if (!best || d < best_d) {
            best = &o;
            best_d = d;
          }
        }
        if (!best || best_d > w.cfg.eps_grasp) return fail("no graspable object within reach");
        w.arm.ee = best->pos;  // gripper centers on the object
        w.arm.engaged = true;
        w.arm.held = best->id;
        res.reward += tick_reward(rw, 0.0, true, false);
        res.ticks = 1;
        detail::record_tick(w, res, t0, "grasp");
      } else {
        if (!w.arm.engaged) return fail("gripper already free");
        w.arm.engaged = false;  // held object settles where it is
        w.arm.held.clear();
        res.ticks = 1;
        detail::record_tick(w, res, t0, "release");
      }
      return res;
    }
    case Primitive::Kind::Pour: {
      const WorldObject* src = w.find(w.arm.held);
      if (!w.arm.engaged || !src || !w.is_container(src->id))
        return fail("pour requires a held container");
      if (w.total_volume(src->id) <= 0) return fail("held container " + src->id + " is empty");
      const WorldObject* dest = nullptr;
      double best_d = 0.0;
      for (const auto& o : w.objects) {
        if (o.id == src->id || !w.is_container(o.id)) continue;
        double d = std::max(0.0, (o.pos - src->pos).norm() - o.radius - src->radius);
        if (!dest || d < best_d) {
          dest = &o;
          best_d = d;
        }
      }
      if (!dest || best_d > w.cfg.eps_pour) return fail("no destination container within reach");
      auto& from = w.containers[src->id].contents;
      auto& to = w.containers[dest->id].contents;
      for (const auto& [liq, ml] : from) {
        int spill = static_cast<int>(std::lround(ml * w.cfg.spill_fraction));
        spill = std::clamp(spill, 0, ml);
        if (ml - spill > 0) to[liq] += ml - spill;
        w.spilled += spill;
      }
      from.clear();
      res.ticks = 1;
      detail::record_tick(w, res, t0, "pour");
      return res;
    }
    case Primitive::Kind::Stir: {
      const WorldObject* stick = w.find(w.arm.held);
      if (!w.arm.engaged || !stick || stick->cls != ObjectClass::Stick)
        return fail("stir requires a held stick");
      const WorldObject* vessel = nullptr;
      for (const auto& o : w.objects) {
        if (o.id == stick->id || !w.is_container(o.id)) continue;
        if ((o.pos - w.arm.ee).norm() <= o.radius) {
          vessel = &o;
          break;
        }
      }
      if (!vessel) return fail("no container under the stirrer");
      auto& cs = w.containers[vessel->id];
      if (static_cast<int>(cs.contents.size()) >= 2)
        cs.mixed = true;
      else
        res.note = "fewer than two liquids; stirring had no effect";
      res.ticks = 1;
      detail::record_tick(w, res, t0, "stir");
      return res;
    }
  }
  return res;
}

// ---- subtask-level effects ----

// Balance model: 0.1 g per mL plus a 20 g tare.
inline double weigh_reading(const LabWorld& w, const std::string& id) {
  return 0.1 * w.total_volume(id) + 20.0;
}

// wait/weigh/shake have observable effects that no arm primitive expresses;
// the executor applies them once the subtask's motion is finished.
inline void apply_subtask_effect(LabWorld& w, const Subtask& sub) {
  auto container_arg = [&]() -> const WorldObject* {
    for (const auto& a : sub.args) {
      const WorldObject* o = w.find(a);
      if (!o) o = w.find(id_name(a));
      if (o && w.is_container(o->id)) return o;
    }
    return nullptr;
  };
  switch (sub.verb) {
    case Verb::Wait:
      for (const auto& o : w.objects)
        if (w.is_container(o.id) && station_of(w, o.pos) == kStationCrystallization &&
            w.total_volume(o.id) > 0)
          w.containers[o.id].crystallized = true;
      break;
    case Verb::Weigh:
      if (const WorldObject* o = container_arg();
          o && station_of(w, o->pos) == kStationBalance) {
        w.containers[o->id].weighed = true;
        w.weight_readings[o->id] = weigh_reading(w, o->id);
      }
      break;
    case Verb::Shake:
      if (const WorldObject* o = container_arg(); o && station_of(w, o->pos) == kStationShaker) {
        auto& cs = w.containers[o->id];
        cs.shaken = true;
        if (static_cast<int>(cs.contents.size()) >= 2) cs.mixed = true;
      }
      break;
    default:
      break;
  }
}

// ---- task success ----

inline bool check_success(const LabWorld& w, const TaskSpec& spec) {
  auto slot = [&](const char* k) -> std::string {
    auto it = spec.bindings.find(k);
    return it == spec.bindings.end() ? std::string() : it->second;
  };
  auto near = [&](const std::string& a, const std::string& b) {
    const WorldObject* oa = w.find(a);
    const WorldObject* ob = w.find(b);
    return oa && ob && (oa->pos - ob->pos).norm() <= w.cfg.eps_place;
  };
  auto at = [&](const std::string& id, const char* station) {
    const WorldObject* o = w.find(id);
    return o && station_of(w, o->pos) == station;
  };
  auto has = [&](const std::string& id, const std::string& liq) {
    auto it = w.containers.find(id);
    if (it == w.containers.end()) return false;
    auto jt = it->second.contents.find(liq);
    return jt != it->second.contents.end() && jt->second > 0;
  };
  auto flag = [&](const std::string& id, bool ContainerState::* f) {
    auto it = w.containers.find(id);
    return it != w.containers.end() && it->second.*f;
  };
  switch (spec.kind) {
    case TaskKind::PickPlace:
      return near(slot("object"), slot("dest"));
    case TaskKind::Pour:
      return has(slot("dest"), slot("liquid"));
    case TaskKind::Stir:
      return flag(slot("container"), &ContainerState::mixed);
    case TaskKind::Mix:
      return has(slot("dest"), slot("liquid_a")) && has(slot("dest"), slot("liquid_b")) &&
             flag(slot("dest"), &ContainerState::mixed);
    case TaskKind::Crystallize:
      return at(slot("dish"), kStationCrystallization) && has(slot("dish"), slot("solution")) &&
             near(slot("seed"), slot("dish")) &&
             flag(slot("dish"), &ContainerState::crystallized);
    case TaskKind::Weigh:
      return flag(slot("container"), &ContainerState::weighed) &&
             at(slot("container"), kStationBalance);
    case TaskKind::Shake:
      return flag(slot("container"), &ContainerState::shaken) &&
             at(slot("container"), kStationShaker);
    case TaskKind::Freeform:
      return false;
  }
  return false;
}

// ---- serialization ----

inline nlohmann::json world_to_json(const LabWorld& w) {
  nlohmann::json j;
  j["seed"] = w.seed;
  j["arm"] = {{"x", w.arm.ee.x}, {"y", w.arm.ee.y}, {"engaged", w.arm.engaged},
              {"held", w.arm.held}};
  j["spilled"] = w.spilled;
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : w.objects)
    objs.push_back({{"id", o.id},
                    {"class", object_class_name(o.cls)},
                    {"x", o.pos.x},
                    {"y", o.pos.y},
                    {"radius", o.radius},
                    {"graspable", o.graspable}});
  j["objects"] = objs;
  nlohmann::json conts = nlohmann::json::object();
  for (const auto& [id, c] : w.containers)
    conts[id] = {{"contents", c.contents},
                 {"mixed", c.mixed},
                 {"crystallized", c.crystallized},
                 {"shaken", c.shaken},
                 {"weighed", c.weighed}};
  j["containers"] = conts;
  j["weights"] = w.weight_readings;
  return j;
}

inline LabWorld world_from_json(const nlohmann::json& j, WorldConfig cfg = {}) {
  LabWorld w;
  w.cfg = std::move(cfg);
  w.seed = j.value("seed", uint64_t{0});
  const auto& arm = j.at("arm");
  w.arm.ee = {arm.at("x").get<double>(), arm.at("y").get<double>()};
  w.arm.engaged = arm.value("engaged", false);
  w.arm.held = arm.value("held", std::string());
  w.spilled = j.value("spilled", 0);
  for (const auto& o : j.at("objects")) {
    WorldObject obj;
    obj.id = o.at("id").get<std::string>();
    obj.cls = object_class_from(o.at("class").get<std::string>());
    obj.pos = {o.at("x").get<double>(), o.at("y").get<double>()};
    obj.radius = o.at("radius").get<double>();
    obj.graspable = o.value("graspable", false);
    w.objects.push_back(std::move(obj));
  }
  if (j.contains("containers"))
    for (const auto& [id, c] : j.at("containers").items()) {
      ContainerState cs;
      cs.contents = c.at("contents").get<std::map<std::string, int>>();
      cs.mixed = c.value("mixed", false);
      cs.crystallized = c.value("crystallized", false);
      cs.shaken = c.value("shaken", false);
      cs.weighed = c.value("weighed", false);
      w.containers[id] = std::move(cs);
    }
  if (j.contains("weights"))
    w.weight_readings = j.at("weights").get<std::map<std::string, double>>();
  return w;
}

inline uint64_t world_hash(const LabWorld& w) { return fnv1a64(world_to_json(w).dump()); }

inline void save_world(const std::string& path, const LabWorld& w) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << world_to_json(w).dump(2) << "\n";
}

inline LabWorld load_world(const std::string& path, WorldConfig cfg = {}) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  f >> j;
  return world_from_json(j, std::move(cfg));
}

// ---- trace logging ----

inline nlohmann::json tick_to_json(const TickRecord& r) {
  nlohmann::json j;
  j["t"] = r.t;
  j["arm"] = {{"x", r.ee.x}, {"y", r.ee.y}, {"engaged", r.engaged}, {"held", r.held}};
  nlohmann::json objs = nlohmann::json::object();
  for (const auto& [id, p] : r.objects) objs[id] = {p.x, p.y};
  j["objects"] = objs;
  nlohmann::json conts = nlohmann::json::object();
  for (const auto& [id, c] : r.containers)
    conts[id] = {{"contents", c.contents},
                 {"mixed", c.mixed},
                 {"crystallized", c.crystallized},
                 {"shaken", c.shaken},
                 {"weighed", c.weighed}};
  j["containers"] = conts;
  j["event"] = r.event;
  return j;
}

inline std::vector<std::string> trace_lines(const ExecutionResult& r) {
  std::vector<std::string> lines;
  lines.reserve(r.trace.size());
  for (const auto& rec : r.trace) lines.push_back(tick_to_json(rec).dump());
  return lines;
}

inline uint64_t trace_hash(const ExecutionResult& r) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& rec : r.trace) {
    h = fnv1a64(tick_to_json(rec).dump(), h);
    h = fnv1a64("\n", h);
  }
  return h;
}

inline void save_trace(const std::string& path, const ExecutionResult& r) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& line : trace_lines(r)) f << line << "\n";
}

}  // namespace labrig
