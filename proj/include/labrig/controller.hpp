#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "labrig/backends.hpp"
#include "labrig/common.hpp"
#include "labrig/control_types.hpp"
#include "labrig/primitives.hpp"
#include "labrig/rng.hpp"
#include "labrig/tasks.hpp"
#include "labrig/world.hpp"

namespace labrig {

struct DivergedTraining : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ControlEvents {
  bool grasped = false;
  bool collided = false;
};

// Shaped tick reward: progress toward the drive point, a bonus for closing the
// gripper on something, a penalty for brushing an obstacle.
inline double reward(const ControlObservation& prev, const ControlAction&,
                     const ControlObservation& next, const ControlEvents& ev,
                     const RewardWeights& w = {}) {
  return tick_reward(w, prev.to_target.norm() - next.to_target.norm(), ev.grasped, ev.collided);
}

// Proportional drive toward the target; the gripper bit just holds whatever
// the active primitive set it to.
inline ControlAction scripted_step(const ControlObservation& obs, double k_p = 1.0,
                                   double v_max = 0.05) {
  return {(obs.to_target * k_p).clamped(v_max), obs.engaged};
}

inline ControlFn scripted_controller() {
  return [](const ControlObservation& obs) { return scripted_step(obs); };
}

// Linear map from a six-feature observation to a velocity, clamped to v_max.
// The features are the to-target vector plus two obstacle fields that only
// wake up near the obstacle and fade near the target: a radial push-away and
// a vortex that circulates around the obstacle toward the target's side. Pure
// radial repulsion stalls at equilibria on the approach line; the vortex term
// is what lets a linear law steer around clutter instead of freezing. The
// velocity law does not condition on the gripper flag; the grip bit of the
// action just carries it.
struct Policy {
  static constexpr int kFeatures = 6;
  static constexpr double kObstacleRange = 0.15;

  std::array<double, 2 * kFeatures> weights{};  // row for dx, then row for dy
  double noise_scale = 0.0;
  double v_max = 0.05;

  static std::array<double, kFeatures> features(const ControlObservation& o) {
    Vec2 tt = o.to_target;
    Vec2 ob = o.to_obstacle;
    double dob = ob.norm();
    double gate = std::max(0.0, 1.0 - dob / kObstacleRange) *
                  std::min(1.0, tt.norm() / kObstacleRange);
    Vec2 u = dob > 1e-9 ? ob * (1.0 / dob) : Vec2{};
    double side = u.x * tt.y - u.y * tt.x >= 0 ? gate : -gate;
    return {tt.x, tt.y, -u.x * gate, -u.y * gate, -u.y * side, u.x * side};
  }

  Vec2 raw(const ControlObservation& o) const {
    auto f = features(o);
    Vec2 v;
    for (int i = 0; i < kFeatures; ++i) {
      v.x += weights[i] * f[i];
      v.y += weights[kFeatures + i] * f[i];
    }
    return v;
  }

  ControlAction act(const ControlObservation& o) const {
    return {raw(o).clamped(v_max), o.engaged};
  }

  // Noise lives in applied-action space so exploration survives saturation of
  // the linear map.
  ControlAction explore(const ControlObservation& o, Rng& rng) const {
    Vec2 v = raw(o).clamped(v_max) +
             Vec2{noise_scale * rng.gaussian(), noise_scale * rng.gaussian()};
    return {v.clamped(v_max), o.engaged};
  }

  ControlFn fn() const {
    return [p = *this](const ControlObservation& o) { return p.act(o); };
  }

  bool finite() const {
    for (double v : weights)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct Transition {
  ControlObservation obs;
  ControlAction action;
  double reward = 0.0;
  ControlObservation next;
  bool done = false;
};

// FIFO over whole episodes: when the buffer is full, the oldest episode's
// transitions all leave together. Sampling is uniform over transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t episode_capacity = 4) : capacity_(episode_capacity) {}

  void begin_episode() {
    episodes_.emplace_back();
    while (episodes_.size() > capacity_) episodes_.pop_front();
  }

  void push(Transition t) {
    if (episodes_.empty()) begin_episode();
    episodes_.back().push_back(std::move(t));
  }

  std::size_t episodes() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& e : episodes_) n += e.size();
    return n;
  }

  const Transition& sample(Rng& rng) const {
    std::size_t total = size();
    if (total == 0) throw std::out_of_range("replay buffer is empty");
    std::size_t k = rng.index(total);
    for (const auto& e : episodes_) {
      if (k < e.size()) return e[k];
      k -= e.size();
    }
    return episodes_.back().back();  // unreachable
  }

 private:
  std::size_t capacity_;
  std::deque<std::vector<Transition>> episodes_;
};

// One training task: drive the free arm onto an object in a freshly sampled
// scene and close the gripper on it. The world resets only here, at episode
// construction; a finished or exhausted episode is discarded whole. Reaching
// within eps_reach puts the arm inside the grasp envelope, so the closing
// grasp is deterministic and its bonus lands on the terminal tick.
struct MoveEnv {
  LabWorld world;
  Vec2 drive;
  std::string target;
  int ticks = 0;

  ControlObservation observe() const { return control_observation(world, drive, target); }
  bool reached() const { return (drive - world.arm.ee).norm() <= world.cfg.eps_reach; }

  struct StepResult {
    double reward = 0.0;
    bool done = false;
    bool collided = false;
  };

  StepResult step(const ControlAction& act, const RewardWeights& rw = {}) {
    MoveTick t = apply_move_tick(world, drive, target, act);
    ++ticks;
    return {tick_reward(rw, t.progress, t.reached, t.collided), t.reached, t.collided};
  }
};

using EnvFactory = std::function<MoveEnv(std::uint64_t)>;

inline EnvFactory move_env_factory(TaskKind kind = TaskKind::PickPlace,
                                   std::string target_id = "cuboid",
                                   std::uint64_t scene_salt = 0x10c0ull) {
  TaskSpec spec = default_task_spec(kind);
  return [spec, target_id, scene_salt](std::uint64_t episode_seed) {
    MoveEnv env;
    env.world = sample_scene(spec, mix_seed({scene_salt, episode_seed}));
    const WorldObject* o = env.world.find(target_id);
    if (!o) throw UnknownId(target_id);
    env.drive = o->pos;
    env.target = o->id;
    return env;
  };
}

// Default trainer is a cross-entropy search over the policy parameters:
// fresh-scene episodes give the replay-style actor-critic nothing to identify
// a state-action value from (no state is ever visited twice), while ranked
// parameter perturbations only need episode returns. The actor-critic variant
// stays available behind `algorithm` for buffers fed with denser revisits.
enum class TrainAlgorithm { Cem, ActorCritic };

struct TrainConfig {
  TrainAlgorithm algorithm = TrainAlgorithm::Cem;
  int max_ticks = 80;  // per episode
  RewardWeights rewards;
  std::uint64_t seed = 1;
  double noise = 0.015;  // exploration scale stamped onto the trained policy

  // cross-entropy knobs
  int population = 16;
  int elites = 4;
  int eval_episodes = 3;  // per candidate, common scene seeds per generation
  double sigma0 = 0.5;
  double sigma_floor = 0.05;

  // actor-critic knobs
  double gamma = 0.95;
  double actor_lr = 3e-4;
  double critic_lr = 1e-2;
  double tau = 0.02;  // target-critic blend per update
  int batch = 32;
  int updates_per_episode = 40;
  int actor_warmup_episodes = 5;  // critic-only updates first
  double weight_decay = 1e-4;     // actor pull-back per update
  std::size_t replay_episodes = 4;
  int critic_hidden = 16;
  double grad_clip = 1.0;
};

namespace detail {

// Value head linear in the action: Q(s,a) = psi(s) + g(s)·a. A plain scalar
// MLP over (s,a) stalls on the multiplicative direction-times-action term of
// the progress reward; factoring the action out makes the trunk learn only
// smooth state maps, and hands the actor its gradient g(s) directly.
struct Critic {
  Eigen::MatrixXd W1;  // hidden x features
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;  // 3 x hidden: psi, g_x, g_y
  Eigen::Vector3d b2 = Eigen::Vector3d::Zero();

  static Critic init(int features, int hidden, Rng& rng) {
    Critic c;
    c.W1.resize(hidden, features);
    c.b1 = Eigen::VectorXd::Zero(hidden);
    c.W2.resize(3, hidden);
    double s1 = 1.0 / std::sqrt(static_cast<double>(features));
    double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (int r = 0; r < hidden; ++r) {
      for (int col = 0; col < features; ++col) c.W1(r, col) = rng.uniform(-s1, s1);
      for (int row = 0; row < 3; ++row) c.W2(row, r) = rng.uniform(-s2, s2);
    }
    return c;
  }

  Eigen::Vector3d heads(const Eigen::VectorXd& f) const {
    Eigen::VectorXd h = (W1 * f + b1).array().tanh();
    return W2 * h + b2;
  }

  double value(const Eigen::VectorXd& f, const Vec2& a) const {
    Eigen::Vector3d o = heads(f);
    return o[0] + o[1] * a.x + o[2] * a.y;
  }

  Vec2 action_grad(const Eigen::VectorXd& f) const {
    Eigen::Vector3d o = heads(f);
    return {o[1], o[2]};
  }

  struct Grads {
    Eigen::MatrixXd W1, W2;
    Eigen::VectorXd b1;
    Eigen::Vector3d b2;
  };

  // Gradient of scale * value(f, a) with respect to parameters.
  Grads backward(const Eigen::VectorXd& f, const Vec2& a, double scale) const {
    Eigen::VectorXd h = (W1 * f + b1).array().tanh();
    Eigen::Vector3d e{scale, scale * a.x, scale * a.y};
    Grads g;
    g.W2 = e * h.transpose();
    g.b2 = e;
    Eigen::VectorXd dh = W2.transpose() * e;
    Eigen::VectorXd dz = (dh.array() * (1.0 - h.array().square())).matrix();
    g.W1 = dz * f.transpose();
    g.b1 = dz;
    return g;
  }

  bool finite() const {
    return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
  }
};

}  // namespace detail

struct TrainResult {
  Policy policy;
  struct EpisodeRow {
    int episode = 0;
    double ret = 0.0;
    bool success = false;
  };
  std::vector<EpisodeRow> curve;

  double curve_area() const {
    double a = 0.0;
    for (const auto& r : curve) a += r.ret;
    return a;
  }

  // Area under the per-episode success curve; scale-free, so it compares
  // fairly across reward configurations.
  double success_area() const {
    double a = 0.0;
    for (const auto& r : curve) a += r.success ? 1.0 : 0.0;
    return a;
  }
};

namespace detail {

// Ranked parameter search: each generation draws a population around the
// running mean, scores every candidate on the same scene seeds, and refits
// mean and spread to the elites. Entirely ordered by one seeded RNG.
inline TrainResult train_cem(const EnvFactory& make_env, int budget_episodes,
                             const TrainConfig& cfg) {
  TrainResult out;
  out.policy.noise_scale = cfg.noise;
  if (budget_episodes <= 0) return out;  // zero budget: initialization untouched

  constexpr int kDim = 2 * Policy::kFeatures;
  Rng rng(mix_seed({0xce11e5ull, cfg.seed}));
  std::array<double, kDim> mean{};
  std::array<double, kDim> sigma;
  sigma.fill(cfg.sigma0);

  auto to_policy = [&](const std::array<double, kDim>& th) {
    Policy p;
    std::copy_n(th.begin(), 2 * Policy::kFeatures, p.weights.begin());
    p.noise_scale = cfg.noise;
    return p;
  };
  int consumed = 0;
  int episode = 0;
  auto rollout = [&](const Policy& p, std::uint64_t scene_seed) {
    MoveEnv env = make_env(scene_seed);
    double ret = 0.0;
    bool success = false;
    for (int t = 0; t < cfg.max_ticks; ++t) {
      MoveEnv::StepResult sr = env.step(p.act(env.observe()), cfg.rewards);
      ret += sr.reward;
      if (sr.done) {
        success = true;
        break;
      }
    }
    if (!std::isfinite(ret)) throw DivergedTraining("episode return is not finite");
    out.curve.push_back({episode++, ret, success});
    ++consumed;
    return ret;
  };

  bool have_best = false;
  std::array<double, kDim> best{};
  int gen = 0;
  while (budget_episodes - consumed >= cfg.population) {
    int e_eff = std::clamp((budget_episodes - consumed) / cfg.population, 1, cfg.eval_episodes);
    std::vector<std::uint64_t> scene_seeds(e_eff);
    for (auto& s : scene_seeds) s = rng.next_u64();

    struct Candidate {
      std::array<double, kDim> th;
      double fitness = 0.0;
    };
    std::vector<Candidate> cands(cfg.population);
    for (int j = 0; j < cfg.population; ++j) {
      auto& c = cands[j];
      for (int d = 0; d < kDim; ++d) c.th[d] = mean[d] + sigma[d] * rng.gaussian();
      // Elitism: re-seat the best-ever and the incumbent mean each generation
      // so one blocked batch of scenes cannot erase earlier progress.
      if (gen > 0 && j == 0 && have_best) c.th = best;
      if (gen > 0 && j == 1) c.th = mean;
      Policy p = to_policy(c.th);
      for (std::uint64_t s : scene_seeds) c.fitness += rollout(p, s);
      c.fitness /= e_eff;
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.fitness > b.fitness; });
    best = cands[0].th;
    have_best = true;
    int ne = std::min(cfg.elites, cfg.population);
    for (int d = 0; d < kDim; ++d) {
      double m = 0.0;
      for (int k = 0; k < ne; ++k) m += cands[k].th[d];
      m /= ne;
      double v = 0.0;
      for (int k = 0; k < ne; ++k) v += (cands[k].th[d] - m) * (cands[k].th[d] - m);
      mean[d] = m;
      sigma[d] = std::max(std::sqrt(v / ne), cfg.sigma_floor);
    }
    ++gen;
  }
  // Budget dribble too small to rank a generation: spend it on the incumbent
  // so the log accounts for every episode.
  Policy incumbent = to_policy(mean);
  while (consumed < budget_episodes) rollout(incumbent, rng.next_u64());

  out.policy = to_policy(mean);
  if (!out.policy.finite()) throw DivergedTraining("parameters are not finite");
  return out;
}

// Replay-based actor-critic on the shaped reward: transitions go through the
// episode-bounded replay buffer, the critic bootstraps against a slow copy of
// itself, and the linear actor ascends the critic's action gradient.
inline TrainResult train_actor_critic(const EnvFactory& make_env, int budget_episodes,
                                      const TrainConfig& cfg) {
  TrainResult out;
  out.policy.noise_scale = cfg.noise;
  if (budget_episodes <= 0) return out;  // zero budget: initialization untouched

  Rng root(mix_seed({0xc0117011ull, cfg.seed}));
  Rng net_rng = root.fork();
  Rng explore_rng = root.fork();
  Rng batch_rng = root.fork();

  detail::Critic critic = detail::Critic::init(Policy::kFeatures, cfg.critic_hidden, net_rng);
  detail::Critic target = critic;
  ReplayBuffer buffer(cfg.replay_episodes);
  Policy& pi = out.policy;

  auto fvec = [](const ControlObservation& o) {
    auto f = Policy::features(o);
    Eigen::VectorXd x(Policy::kFeatures);
    for (int i = 0; i < Policy::kFeatures; ++i) x[i] = f[i];
    return x;
  };

  for (int ep = 0; ep < budget_episodes; ++ep) {
    MoveEnv env = make_env(static_cast<std::uint64_t>(ep));
    buffer.begin_episode();
    double ret = 0.0;
    bool success = false;
    for (int t = 0; t < cfg.max_ticks; ++t) {
      ControlObservation obs = env.observe();
      ControlAction act = pi.explore(obs, explore_rng);
      MoveEnv::StepResult sr = env.step(act, cfg.rewards);
      ret += sr.reward;
      buffer.push({obs, act, sr.reward, env.observe(), sr.done});
      if (sr.done) {
        success = true;
        break;
      }
    }
    if (!std::isfinite(ret)) throw DivergedTraining("episode return is not finite");
    out.curve.push_back({ep, ret, success});

    for (int u = 0; u < cfg.updates_per_episode; ++u) {
      int n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), buffer.size());
      if (n == 0) continue;
      Eigen::MatrixXd gW1 = Eigen::MatrixXd::Zero(critic.W1.rows(), critic.W1.cols());
      Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(critic.b1.size());
      Eigen::MatrixXd gW2 = Eigen::MatrixXd::Zero(critic.W2.rows(), critic.W2.cols());
      Eigen::Vector3d gb2 = Eigen::Vector3d::Zero();
      std::array<double, 2 * Policy::kFeatures> gw{};
      for (int k = 0; k < n; ++k) {
        const Transition& tr = buffer.sample(batch_rng);
        Eigen::VectorXd x = fvec(tr.obs);
        double y = tr.reward;
        if (!tr.done) y += cfg.gamma * target.value(fvec(tr.next), pi.act(tr.next).v);
        double td = critic.value(x, tr.action.v) - y;
        detail::Critic::Grads g = critic.backward(x, tr.action.v, td);  // d(td^2/2)/dparams
        gW1 += g.W1;
        gb1 += g.b1;
        gW2 += g.W2;
        gb2 += g.b2;

        if (ep < cfg.actor_warmup_episodes) continue;
        Vec2 da = critic.action_grad(x);
        // Past the clamp boundary the applied action stops responding to the
        // raw map, so shrink the straight-through gradient accordingly.
        double sat = pi.raw(tr.obs).norm();
        if (sat > pi.v_max) da = da * (pi.v_max / sat);
        auto f = Policy::features(tr.obs);
        for (int i = 0; i < Policy::kFeatures; ++i) {
          gw[i] += da.x * f[i];
          gw[Policy::kFeatures + i] += da.y * f[i];
        }
      }
      double inv = 1.0 / n;

      double cnorm = std::sqrt(gW1.squaredNorm() + gb1.squaredNorm() + gW2.squaredNorm() +
                               gb2.squaredNorm()) *
                     inv;
      double cs = cnorm > cfg.grad_clip ? cfg.grad_clip / cnorm : 1.0;
      critic.W1 -= (cfg.critic_lr * cs * inv) * gW1;
      critic.b1 -= (cfg.critic_lr * cs * inv) * gb1;
      critic.W2 -= (cfg.critic_lr * cs * inv) * gW2;
      critic.b2 -= (cfg.critic_lr * cs * inv) * gb2;

      double asq = 0.0;
      for (double v : gw) asq += v * v;
      double anorm = std::sqrt(asq) * inv;
      double as = anorm > cfg.grad_clip ? cfg.grad_clip / anorm : 1.0;
      for (int i = 0; i < 2 * Policy::kFeatures; ++i) {
        pi.weights[i] += cfg.actor_lr * as * inv * gw[i];
        pi.weights[i] -= cfg.weight_decay * pi.weights[i];
      }

      target.W1 = (1.0 - cfg.tau) * target.W1 + cfg.tau * critic.W1;
      target.b1 = (1.0 - cfg.tau) * target.b1 + cfg.tau * critic.b1;
      target.W2 = (1.0 - cfg.tau) * target.W2 + cfg.tau * critic.W2;
      target.b2 = (1.0 - cfg.tau) * target.b2 + cfg.tau * critic.b2;
    }
    if (!pi.finite() || !critic.finite())
      throw DivergedTraining("parameters are not finite after episode " + std::to_string(ep));
  }
  return out;
}

}  // namespace detail

inline TrainResult train_policy(const EnvFactory& make_env, int budget_episodes,
                                const TrainConfig& cfg = {}) {
  return cfg.algorithm == TrainAlgorithm::Cem
             ? detail::train_cem(make_env, budget_episodes, cfg)
             : detail::train_actor_critic(make_env, budget_episodes, cfg);
}

struct EvalStats {
  int trials = 0;
  int successes = 0;
  double mean_ticks = 0.0;

  double rate() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

// Greedy rollouts on scenes the trainer never saw (episode seeds drawn from a
// salted range disjoint from the small training integers).
inline EvalStats evaluate_policy(const Policy& p, const EnvFactory& make_env, int trials,
                                 int max_ticks = 100, std::uint64_t salt = 0xe7a1ull) {
  EvalStats s;
  s.trials = trials;
  long total_ticks = 0;
  for (int i = 0; i < trials; ++i) {
    MoveEnv env = make_env(mix_seed({salt, static_cast<std::uint64_t>(i)}));
    for (int t = 0; t < max_ticks && !env.reached(); ++t) env.step(p.act(env.observe()));
    total_ticks += env.ticks;
    if (env.reached()) ++s.successes;
  }
  s.mean_ticks = trials ? static_cast<double>(total_ticks) / trials : 0.0;
  return s;
}

struct SequenceOutcome {
  static constexpr std::size_t kNoAbort = static_cast<std::size_t>(-1);

  ExecutionResult result;  // merged trace/ticks/reward; first failure's outcome
  std::size_t aborted_at = kNoAbort;
  std::vector<LatencyRecord> latencies;  // one per controller tick

  bool ok() const { return result.outcome == ExecutionResult::Outcome::Done; }
};

// Runs a grounded primitive sequence, stopping at the first primitive that
// does not finish Done. Every controller invocation is timed so live runs can
// report measured per-tick latency next to the replayed module figures.
inline SequenceOutcome execute_sequence(LabWorld& w, const PrimitiveSeq& seq,
                                        const ControlFn& controller,
                                        const RewardWeights& rw = {}, int t0 = 0) {
  SequenceOutcome out;
  ControlFn timed = [&](const ControlObservation& obs) {
    auto start = std::chrono::steady_clock::now();
    ControlAction a = controller(obs);
    double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    out.latencies.push_back({"RL", ms, true});
    return a;
  };
  int t = t0;
  for (std::size_t i = 0; i < seq.prims.size(); ++i) {
    ExecutionResult r = step_primitive(w, seq.prims[i], timed, rw, t);
    t += r.ticks;
    out.result.ticks += r.ticks;
    out.result.reward += r.reward;
    for (auto& rec : r.trace) out.result.trace.push_back(std::move(rec));
    if (r.outcome != ExecutionResult::Outcome::Done) {
      out.result.outcome = r.outcome;
      out.result.note = r.note;
      out.aborted_at = i;
      break;
    }
  }
  return out;
}

// --- checkpoints ------------------------------------------------------------

inline constexpr char kPolicyMagic[8] = {'L', 'B', 'P', 'O', 'L', 'C', 'Y', '1'};

inline void save_policy(const std::filesystem::path& path, const Policy& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kPolicyMagic, sizeof(kPolicyMagic));
  std::uint32_t count = 2 * Policy::kFeatures + 2;
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  auto put = [&](double v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  for (double v : p.weights) put(v);
  put(p.noise_scale);
  put(p.v_max);
}

inline Policy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kPolicyMagic))
    throw std::runtime_error("not a policy checkpoint: " + path.string());
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != 2 * Policy::kFeatures + 2)
    throw std::runtime_error("policy checkpoint has wrong parameter count");
  Policy p;
  auto get = [&]() {
    double v = 0.0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  for (double& v : p.weights) v = get();
  p.noise_scale = get();
  p.v_max = get();
  if (!in) throw std::runtime_error("truncated policy checkpoint: " + path.string());
  return p;
}

inline void save_training_log(const std::filesystem::path& path, const TrainResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "episode,return,success\n";
  out << std::setprecision(10);
  for (const auto& row : r.curve)
    out << row.episode << ',' << row.ret << ',' << (row.success ? 1 : 0) << '\n';
}

}  // namespace labrig
