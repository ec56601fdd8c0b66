#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "labrig/control_types.hpp"
#include "labrig/rng.hpp"

namespace labrig {

struct InvalidSteps : std::runtime_error {
  explicit InvalidSteps(int t) : std::runtime_error("step count must be positive, got " + std::to_string(t)) {}
};

// Forward-noising schedule. beta[i] is β_{i+1}; alpha_bar has T+1 entries with
// alpha_bar[0] = 1 so ᾱ_t indexes directly by t; sigma[i] = √β_{i+1}.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;
  std::vector<double> sigma;
};

inline NoiseSchedule make_schedule(int T, double beta_start = 1e-4, double beta_end = 1e-1) {
  if (T <= 0) throw InvalidSteps(T);
  NoiseSchedule ns;
  ns.T = T;
  ns.beta.resize(static_cast<size_t>(T));
  ns.sigma.resize(static_cast<size_t>(T));
  ns.alpha_bar.assign(static_cast<size_t>(T) + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    double b = T == 1 ? beta_start
                      : beta_start + (beta_end - beta_start) * (t - 1) / double(T - 1);
    ns.beta[static_cast<size_t>(t - 1)] = b;
    ns.sigma[static_cast<size_t>(t - 1)] = std::sqrt(b);
    ns.alpha_bar[static_cast<size_t>(t)] = ns.alpha_bar[static_cast<size_t>(t - 1)] * (1.0 - b);
  }
  return ns;
}

namespace detail {
inline void check_step(const NoiseSchedule& ns, int t) {
  if (t < 1 || t > ns.T) throw InvalidSteps(t);
}
}  // namespace detail

// x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·z, the closed form of composing t noising steps.
inline StateVec forward_noise(const NoiseSchedule& ns, const StateVec& x0, int t,
                              const StateVec& z) {
  detail::check_step(ns, t);
  double ab = ns.alpha_bar[static_cast<size_t>(t)];
  double cm = std::sqrt(ab), cn = std::sqrt(1.0 - ab);
  StateVec x;
  for (int i = 0; i < kStateDim; ++i)
    x[static_cast<size_t>(i)] = cm * x0[static_cast<size_t>(i)] + cn * z[static_cast<size_t>(i)];
  return x;
}

// One denoising step given the predicted noise; the injected z is dropped at
// t = 1 so the chain ends on the model mean.
inline StateVec reverse_step(const NoiseSchedule& ns, const StateVec& x_t, int t,
                             const StateVec& eps_hat, const StateVec& z) {
  detail::check_step(ns, t);
  double b = ns.beta[static_cast<size_t>(t - 1)];
  double ab = ns.alpha_bar[static_cast<size_t>(t)];
  double inv = 1.0 / std::sqrt(1.0 - b);
  double k = b / std::sqrt(1.0 - ab);
  double s = t == 1 ? 0.0 : ns.sigma[static_cast<size_t>(t - 1)];
  StateVec x;
  for (int i = 0; i < kStateDim; ++i)
    x[static_cast<size_t>(i)] = inv * (x_t[static_cast<size_t>(i)] - k * eps_hat[static_cast<size_t>(i)]) +
                                s * z[static_cast<size_t>(i)];
  return x;
}

inline StateVec gaussian_state(Rng& rng) {
  StateVec z;
  for (double& v : z) v = rng.gaussian();
  return z;
}

using NoiseFn = std::function<StateVec(const StateVec& x_t, int t)>;

// Full T→1 denoising pass from a terminal sample.
inline StateVec reverse_chain(const NoiseSchedule& ns, StateVec x, const NoiseFn& eps, Rng& rng) {
  for (int t = ns.T; t >= 1; --t) {
    StateVec z = t == 1 ? zero_state() : gaussian_state(rng);
    x = reverse_step(ns, x, t, eps(x, t), z);
  }
  return x;
}

// Signal-to-noise ratio of the forward marginal at step t.
inline double snr(const NoiseSchedule& ns, int t) {
  detail::check_step(ns, t);
  double ab = ns.alpha_bar[static_cast<size_t>(t)];
  return ab / (1.0 - ab);
}

}  // namespace labrig
