#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "assure/statespace.hpp"
#include "assure/trajectory.hpp"

namespace assure {

/// Dense conditional probability table
///   Pr(cte state at t | cte state, estimated-cte state, estimated-he state at t-1).
///
/// Rows are stored flat in row-major parent order (cte_prev, cte_e_prev,
/// he_prev): the row for parents (x, e, h) starts at
///   ((x * cte_e_states + e) * he_states + h) * cte_states.
class TransitionCPT {
 public:
  TransitionCPT(std::size_t cte_states, std::size_t cte_e_states, std::size_t he_states,
                std::vector<double> rows)
      : k_(cte_states), ke_(cte_e_states), kh_(he_states), rows_(std::move(rows)) {
    if (k_ == 0 || ke_ == 0 || kh_ == 0) {
      throw std::invalid_argument("TransitionCPT: zero-sized dimension");
    }
    if (rows_.size() != k_ * ke_ * kh_ * k_) {
      throw std::invalid_argument("TransitionCPT: table size does not match dimensions");
    }
    for (std::size_t r = 0; r < num_parent_configs(); ++r) {
      double sum = 0.0;
      for (std::size_t x = 0; x < k_; ++x) {
        const double v = rows_[r * k_ + x];
        if (std::isnan(v) || v < 0.0) {
          throw std::invalid_argument("TransitionCPT: negative or NaN entry");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) >= 1e-12) {
        throw std::invalid_argument("TransitionCPT: row does not sum to 1");
      }
    }
  }

  std::size_t cte_states() const { return k_; }
  std::size_t cte_e_states() const { return ke_; }
  std::size_t he_states() const { return kh_; }
  std::size_t num_parent_configs() const { return k_ * ke_ * kh_; }

  std::size_t parent_index(std::size_t cte_prev, std::size_t cte_e_prev,
                           std::size_t he_prev) const {
    if (cte_prev >= k_ || cte_e_prev >= ke_ || he_prev >= kh_) {
      throw std::out_of_range("TransitionCPT: parent state out of range");
    }
    return (cte_prev * ke_ + cte_e_prev) * kh_ + he_prev;
  }

  std::span<const double> row(std::size_t cte_prev, std::size_t cte_e_prev,
                              std::size_t he_prev) const {
    return std::span<const double>(rows_).subspan(
        parent_index(cte_prev, cte_e_prev, he_prev) * k_, k_);
  }

  const std::vector<double>& flat() const { return rows_; }

  bool operator==(const TransitionCPT&) const = default;

 private:
  std::size_t k_, ke_, kh_;
  std::vector<double> rows_;
};

struct TransitionFitStats {
  std::size_t visited_configs = 0;  // parent configs with at least one observation
  std::size_t transitions = 0;      // consecutive-frame pairs counted
};

/// MAP multinomial fit with a symmetric Dirichlet(alpha) prior:
///   row(x) = (count(x) + alpha - 1) / (N + K * (alpha - 1)).
/// Parent configs never observed come out exactly uniform, which is what
/// makes the monitor fall back to maximal ignorance in unseen regimes.
inline TransitionCPT fit_transition(const std::vector<Trajectory>& trajectories,
                                    const IntervalPartition& cte_partition,
                                    const IntervalPartition& cte_e_partition,
                                    const IntervalPartition& he_partition, double prior_alpha,
                                    TransitionFitStats* stats = nullptr) {
  if (!(prior_alpha > 1.0)) {
    throw std::invalid_argument("fit_transition: prior_alpha must exceed 1");
  }
  if (trajectories.empty()) {
    throw std::invalid_argument("fit_transition: no trajectories");
  }
  const std::size_t k = cte_partition.num_states();
  const std::size_t ke = cte_e_partition.num_states();
  const std::size_t kh = he_partition.num_states();
  const std::size_t configs = k * ke * kh;

  std::vector<std::size_t> counts(configs * k, 0);
  std::size_t transitions = 0;
  for (const auto& traj : trajectories) {
    traj.validate();
    for (std::size_t i = 1; i < traj.frames.size(); ++i) {
      const auto& prev = traj.frames[i - 1];
      const auto& next = traj.frames[i];
      const std::size_t x = cte_partition.locate_clamped(prev.cte_true);
      const std::size_t e = cte_e_partition.locate_clamped(prev.cte_e);
      const std::size_t h = he_partition.locate_clamped(prev.he_e);
      const std::size_t x_next = cte_partition.locate_clamped(next.cte_true);
      ++counts[((x * ke + e) * kh + h) * k + x_next];
      ++transitions;
    }
  }
  if (transitions == 0) {
    throw std::invalid_argument("fit_transition: trajectories contain no transitions");
  }

  std::vector<double> rows(configs * k, 0.0);
  std::size_t visited = 0;
  const double kd = static_cast<double>(k);
  for (std::size_t r = 0; r < configs; ++r) {
    std::size_t n = 0;
    for (std::size_t x = 0; x < k; ++x) n += counts[r * k + x];
    if (n > 0) ++visited;
    const double denom = static_cast<double>(n) + kd * (prior_alpha - 1.0);
    for (std::size_t x = 0; x < k; ++x) {
      rows[r * k + x] =
          (static_cast<double>(counts[r * k + x]) + prior_alpha - 1.0) / denom;
    }
  }
  if (stats != nullptr) {
    stats->visited_configs = visited;
    stats->transitions = transitions;
  }
  return TransitionCPT(k, ke, kh, std::move(rows));
}

}  // namespace assure
