#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "labrig/common.hpp"

namespace labrig {

// Low-dimensional world state: gripper pose + engagement, poses of up to
// three tracked objects, fill volumes of up to two tracked containers, and
// plan-phase progress. Unused slots are zero.
inline constexpr int kStateDim = 12;
using StateVec = std::array<double, kStateDim>;

namespace sv {
inline constexpr int gripper_x = 0;
inline constexpr int gripper_y = 1;
inline constexpr int engaged = 2;
inline constexpr int object_xy = 3;   // 3 objects × (x, y): slots 3..8
inline constexpr int objects = 3;
inline constexpr int volume = 9;      // 2 containers: slots 9..10
inline constexpr int volumes = 2;
inline constexpr int phase = 11;
}  // namespace sv

inline StateVec zero_state() {
  StateVec s{};
  s.fill(0.0);
  return s;
}

inline nlohmann::json state_to_json(const StateVec& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (double v : s) arr.push_back(v);
  return arr;
}

inline StateVec state_from_json(const nlohmann::json& arr) {
  StateVec s = zero_state();
  for (int i = 0; i < kStateDim && i < static_cast<int>(arr.size()); ++i)
    s[static_cast<size_t>(i)] = arr[static_cast<size_t>(i)].get<double>();
  return s;
}

// ---- controller-side view of one tick ----

struct ControlObservation {
  Vec2 ee;
  Vec2 to_target;    // drive point minus end-effector
  bool engaged = false;
  Vec2 to_obstacle;  // nearest non-target object center minus end-effector; zero when clear
};

struct ControlAction {
  Vec2 v;             // clamped to v_max before application
  bool grip = false;  // follows the active primitive
};

struct RewardWeights {
  double w_move = 1.0;       // per meter of progress toward the target
  double w_grasp = 5.0;      // successful grasp bonus
  double w_collision = 10.0; // per colliding tick
};

inline double tick_reward(const RewardWeights& w, double progress, bool grasped, bool collided) {
  return w.w_move * progress + (grasped ? w.w_grasp : 0.0) - (collided ? w.w_collision : 0.0);
}

// Displacement summary between the first and last predicted states; the
// prompt carries this prose digest, never raw vectors.
inline std::string render_prediction_digest(const std::vector<StateVec>& states,
                                            const std::vector<std::string>& tracked) {
  if (states.empty()) return "";
  const StateVec& a = states.front();
  const StateVec& b = states.back();
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof(buf), "gripper: dx=%+.3f dy=%+.3f\n",
                b[sv::gripper_x] - a[sv::gripper_x], b[sv::gripper_y] - a[sv::gripper_y]);
  out += buf;
  for (int i = 0; i < sv::objects && i < static_cast<int>(tracked.size()); ++i) {
    int x = sv::object_xy + 2 * i;
    std::snprintf(buf, sizeof(buf), "%s: dx=%+.3f dy=%+.3f\n", tracked[static_cast<size_t>(i)].c_str(),
                  b[static_cast<size_t>(x)] - a[static_cast<size_t>(x)],
                  b[static_cast<size_t>(x + 1)] - a[static_cast<size_t>(x + 1)]);
    out += buf;
  }
  return out;
}

}  // namespace labrig
