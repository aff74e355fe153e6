#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "assure/statespace.hpp"

namespace assure {

// Time-indexed mission records produced by the simulator and consumed by the
// training and evaluation code. cte_true comes from internal simulation
// state; it is recorded for training and scoring but never fed to the
// runtime monitor.

struct TrajectoryFrame {
  int t = 0;
  std::string env;
  double cte_true = 0.0;  // meters, signed
  double cte_e = 0.0;     // meters, perception estimate
  double he_e = 0.0;      // degrees, perception estimate
  FeatureVector features{std::vector<double>{0.0}};

  bool operator==(const TrajectoryFrame&) const = default;
};

struct Trajectory {
  std::vector<TrajectoryFrame> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }

  /// Time indices contiguous from 0, one feature dimension throughout.
  void validate() const {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].t != static_cast<int>(i)) {
        throw std::invalid_argument("Trajectory: time indices must be contiguous from 0");
      }
      if (frames[i].features.size() != frames[0].features.size()) {
        throw std::invalid_argument("Trajectory: inconsistent feature dimension");
      }
    }
  }
};

namespace detail {

// Shortest representation that round-trips exactly; keeps trajectory files
// byte-stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("trajectory CSV: bad number '" + s + "'");
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// CSV schema: t,env,cte_true,cte_e,he_e,f0..f{d-1}
inline void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  traj.validate();
  if (traj.empty()) throw std::invalid_argument("save_trajectory_csv: empty trajectory");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_trajectory_csv: cannot open " + path);
  const std::size_t d = traj.frames[0].features.size();
  out << "t,env,cte_true,cte_e,he_e";
  for (std::size_t i = 0; i < d; ++i) out << ",f" << i;
  out << "\n";
  for (const auto& f : traj.frames) {
    if (f.env.find(',') != std::string::npos) {
      throw std::invalid_argument("save_trajectory_csv: environment tag contains a comma");
    }
    out << f.t << ',' << f.env << ',' << detail::format_double(f.cte_true) << ','
        << detail::format_double(f.cte_e) << ',' << detail::format_double(f.he_e);
    for (double x : f.features) out << ',' << detail::format_double(x);
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_trajectory_csv: write failed for " + path);
}

inline Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_trajectory_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_trajectory_csv: empty file " + path);
  auto header = detail::split_csv_line(line);
  if (header.size() < 6 || header[0] != "t" || header[1] != "env" || header[2] != "cte_true" ||
      header[3] != "cte_e" || header[4] != "he_e") {
    throw std::runtime_error("load_trajectory_csv: unexpected header in " + path);
  }
  const std::size_t d = header.size() - 5;
  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cols = detail::split_csv_line(line);
    if (cols.size() != header.size()) {
      throw std::runtime_error("load_trajectory_csv: ragged row in " + path);
    }
    TrajectoryFrame f;
    f.t = static_cast<int>(detail::parse_double(cols[0]));
    f.env = cols[1];
    f.cte_true = detail::parse_double(cols[2]);
    f.cte_e = detail::parse_double(cols[3]);
    f.he_e = detail::parse_double(cols[4]);
    std::vector<double> feat(d);
    for (std::size_t i = 0; i < d; ++i) feat[i] = detail::parse_double(cols[5 + i]);
    f.features = FeatureVector(std::move(feat));
    traj.frames.push_back(std::move(f));
  }
  traj.validate();
  return traj;
}

}  // namespace assure
