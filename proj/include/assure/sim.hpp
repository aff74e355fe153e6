#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "assure/rng.hpp"
#include "assure/statespace.hpp"
#include "assure/trajectory.hpp"

namespace assure::sim {

// Desk-scale surrogate for the taxiing loop: constant-speed kinematics, a
// PID steering controller fed by noisy perception estimates, and synthetic
// features standing in for camera frames. Environments bias and noise the
// features, which is how covariate shift gets induced.

/// Noise and shift profile of one simulated operating condition.
struct Environment {
  std::string name;
  double cte_noise_std = 0.1;      // meters
  double he_noise_std = 1.0;       // degrees
  std::vector<double> feature_bias;  // pre-sigmoid, one per feature
  double feature_noise_std = 0.02;
  double outlier_rate = 0.0;  // probability per frame of a garbage frame
};

struct VehicleState {
  double cte = 0.0;            // meters, signed; negative = left of centerline
  double heading_error = 0.0;  // degrees
  double speed = 4.0;          // meters/second, constant during taxiing
};

struct PidGains {
  double kp = 1.0;
  double ki = 0.02;
  double kd = 1.2;
  double u_max = 20.0;  // deg/s steering-rate limit
};

struct PidController {
  PidGains gains;
  double integral = 0.0;
  double integral_limit = 5.0;  // anti-windup clamp, meter-seconds
};

/// Fixed random projection from (cte, he) to pre-sigmoid feature activations.
/// Shared across environments: lighting-style shifts move the feature
/// distribution without changing the underlying geometry.
class FeatureEmbedding {
 public:
  FeatureEmbedding(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim == 0) throw std::invalid_argument("FeatureEmbedding: zero dimension");
    auto rng = substream(seed, "embedding");
    std::normal_distribution<double> weight(0.0, kWeightScale);
    w_.resize(2 * dim);
    for (double& w : w_) w = weight(rng);
  }

  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }

  /// Activation of feature i before bias and sigmoid.
  double activation(std::size_t i, double cte, double he) const {
    return w_[2 * i] * (cte / kCteScale) + w_[2 * i + 1] * (he / kHeScale);
  }

  static constexpr double kWeightScale = 1.5;
  static constexpr double kCteScale = 2.0;  // meters per unit input
  static constexpr double kHeScale = 30.0;  // degrees per unit input

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::vector<double> w_;
};

struct SimConfig {
  double dt = 0.33;           // seconds per control step
  std::size_t duration = 200;  // steps
  PidGains pid;
  Environment env;
  VehicleState initial;
  std::uint64_t seed = 0;
  double half_width = 10.0;  // meters, runway half-width

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be positive");
    if (duration < 1) throw std::invalid_argument("SimConfig: duration must be >= 1");
    if (!(half_width > 0.0)) throw std::invalid_argument("SimConfig: half_width must be positive");
    if (env.cte_noise_std < 0.0 || env.he_noise_std < 0.0 || env.feature_noise_std < 0.0) {
      throw std::invalid_argument("SimConfig: noise stds must be non-negative");
    }
    if (env.outlier_rate < 0.0 || env.outlier_rate > 1.0) {
      throw std::invalid_argument("SimConfig: outlier_rate must lie in [0,1]");
    }
    if (env.feature_bias.empty()) {
      throw std::invalid_argument("SimConfig: feature_bias must set the feature dimension");
    }
  }
};

struct PerceptionSample {
  double cte_e = 0.0;
  double he_e = 0.0;
  FeatureVector features{std::vector<double>{0.0}};
  bool injected_outlier = false;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Surrogate perception: noisy cte/he estimates plus environment-conditioned
/// features. With probability env.outlier_rate the frame is replaced by
/// uniform garbage, modeling camera dropouts. Draw order is fixed:
/// cte noise, he noise, d feature noises, outlier coin, d garbage values.
inline PerceptionSample perceive(const VehicleState& state, const Environment& env,
                                 const FeatureEmbedding& embedding, std::mt19937_64& rng) {
  if (env.feature_bias.size() != embedding.dim()) {
    throw std::invalid_argument("perceive: feature_bias dimension mismatch");
  }
  std::normal_distribution<double> unit(0.0, 1.0);
  PerceptionSample out;
  out.cte_e = state.cte + env.cte_noise_std * unit(rng);
  out.he_e = state.heading_error + env.he_noise_std * unit(rng);

  std::vector<double> f(embedding.dim());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double a = embedding.activation(i, state.cte, state.heading_error);
    f[i] = sigmoid(a + env.feature_bias[i]) + env.feature_noise_std * unit(rng);
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < env.outlier_rate) {
    out.injected_outlier = true;
    for (double& v : f) v = coin(rng);
  }
  out.features = FeatureVector(std::move(f));  // clamps into [0,1]
  return out;
}

/// One closed-loop step. Steering rate u = -(kp*cte_e + ki*integral + kd*he_e)
/// clamped to ±u_max; heading integrates u, cte integrates speed*sin(heading).
inline VehicleState control_step(const VehicleState& state, double cte_e, double he_e,
                                 PidController& pid, double dt, double half_width) {
  pid.integral = std::clamp(pid.integral + cte_e * dt, -pid.integral_limit, pid.integral_limit);
  const double u = std::clamp(
      -(pid.gains.kp * cte_e + pid.gains.ki * pid.integral + pid.gains.kd * he_e),
      -pid.gains.u_max, pid.gains.u_max);
  VehicleState next = state;
  next.heading_error = std::clamp(state.heading_error + u * dt, -90.0, 90.0);
  const double heading_rad = next.heading_error * std::acos(-1.0) / 180.0;
  next.cte = std::clamp(state.cte + state.speed * std::sin(heading_rad) * dt, -half_width,
                        half_width);
  return next;
}

/// Run one mission: perceive -> record -> steer, `duration` times.
/// Deterministic in (config, embedding): the trajectory is a pure function
/// of the seed.
inline Trajectory run_mission(const SimConfig& config, const FeatureEmbedding& embedding) {
  config.validate();
  auto rng = std::mt19937_64(config.seed);
  VehicleState state = config.initial;
  state.cte = std::clamp(state.cte, -config.half_width, config.half_width);
  state.heading_error = std::clamp(state.heading_error, -90.0, 90.0);
  PidController pid{config.pid};

  Trajectory traj;
  traj.frames.reserve(config.duration);
  for (std::size_t t = 0; t < config.duration; ++t) {
    PerceptionSample s = perceive(state, config.env, embedding, rng);
    TrajectoryFrame frame;
    frame.t = static_cast<int>(t);
    frame.env = config.env.name;
    frame.cte_true = state.cte;
    frame.cte_e = s.cte_e;
    frame.he_e = s.he_e;
    frame.features = s.features;
    traj.frames.push_back(std::move(frame));
    state = control_step(state, s.cte_e, s.he_e, pid, config.dt, config.half_width);
  }
  return traj;
}

// --- environment config files -------------------------------------------

/// Range [lo, hi] a per-mission value is drawn from; a plain number in the
/// JSON pins both ends.
struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;

  double draw(std::mt19937_64& rng) const {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
};

struct MissionParams {
  double dt = 0.33;
  std::size_t steps = 200;
  double speed = 4.0;
  double half_width = 10.0;
  PidGains pid;
  ValueRange initial_cte{-3.5, 3.5};
  ValueRange initial_he{-10.0, 10.0};
};

/// Parsed environment config file: the shared perception geometry, mission
/// defaults, and one or more named environments.
struct EnvFile {
  std::size_t feature_dim = 16;
  std::uint64_t embedding_seed = 20260810;
  MissionParams sim;
  std::vector<Environment> environments;

  const Environment& by_name(const std::string& name) const {
    for (const auto& e : environments) {
      if (e.name == name) return e;
    }
    throw std::invalid_argument("EnvFile: no environment named " + name);
  }
};

namespace detail {

inline ValueRange parse_range(const nlohmann::json& j) {
  if (j.is_number()) return ValueRange{j.get<double>(), j.get<double>()};
  if (j.is_array() && j.size() == 2) {
    ValueRange r{j[0].get<double>(), j[1].get<double>()};
    if (r.hi < r.lo) throw std::invalid_argument("env config: range upper bound below lower");
    return r;
  }
  throw std::invalid_argument("env config: expected number or [lo, hi]");
}

inline std::vector<double> parse_bias(const nlohmann::json& j, std::size_t dim) {
  if (j.is_number()) return std::vector<double>(dim, j.get<double>());
  auto v = j.get<std::vector<double>>();
  if (v.size() != dim) {
    throw std::invalid_argument("env config: feature_bias length does not match feature_dim");
  }
  return v;
}

}  // namespace detail

inline EnvFile parse_env_file(const nlohmann::json& j) {
  EnvFile f;
  f.feature_dim = j.value("feature_dim", f.feature_dim);
  f.embedding_seed = j.value("embedding_seed", f.embedding_seed);
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    f.sim.dt = s.value("dt", f.sim.dt);
    f.sim.steps = s.value("steps", f.sim.steps);
    f.sim.speed = s.value("speed", f.sim.speed);
    f.sim.half_width = s.value("half_width", f.sim.half_width);
    if (s.contains("pid")) {
      const auto& p = s.at("pid");
      f.sim.pid.kp = p.value("kp", f.sim.pid.kp);
      f.sim.pid.ki = p.value("ki", f.sim.pid.ki);
      f.sim.pid.kd = p.value("kd", f.sim.pid.kd);
      f.sim.pid.u_max = p.value("u_max", f.sim.pid.u_max);
    }
    if (s.contains("initial_cte")) f.sim.initial_cte = detail::parse_range(s.at("initial_cte"));
    if (s.contains("initial_he")) f.sim.initial_he = detail::parse_range(s.at("initial_he"));
  }
  if (!j.contains("environments") || !j.at("environments").is_array() ||
      j.at("environments").empty()) {
    throw std::invalid_argument("env config: needs a non-empty environments array");
  }
  for (const auto& e : j.at("environments")) {
    Environment env;
    env.name = e.at("name").get<std::string>();
    env.cte_noise_std = e.value("cte_noise_std", env.cte_noise_std);
    env.he_noise_std = e.value("he_noise_std", env.he_noise_std);
    env.feature_noise_std = e.value("feature_noise_std", env.feature_noise_std);
    env.outlier_rate = e.value("outlier_rate", env.outlier_rate);
    env.feature_bias = e.contains("feature_bias")
                           ? detail::parse_bias(e.at("feature_bias"), f.feature_dim)
                           : std::vector<double>(f.feature_dim, 0.0);
    f.environments.push_back(std::move(env));
  }
  return f;
}

inline EnvFile load_env_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_env_file: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return parse_env_file(j);
}

/// Config for mission `index` under `env`, seeds and initial state drawn
/// from the master seed's named substreams.
inline SimConfig make_mission_config(const EnvFile& file, const Environment& env,
                                     std::uint64_t master_seed, std::uint64_t index) {
  auto init_rng = substream(master_seed, "sim.init", index);
  SimConfig cfg;
  cfg.dt = file.sim.dt;
  cfg.duration = file.sim.steps;
  cfg.pid = file.sim.pid;
  cfg.env = env;
  cfg.initial.cte = file.sim.initial_cte.draw(init_rng);
  cfg.initial.heading_error = file.sim.initial_he.draw(init_rng);
  cfg.initial.speed = file.sim.speed;
  cfg.seed = substream_seed(master_seed, "sim.mission", index);
  cfg.half_width = file.sim.half_width;
  return cfg;
}

}  // namespace assure::sim
