#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "assure/cpt.hpp"
#include "assure/forest.hpp"
#include "assure/ood.hpp"
#include "assure/statespace.hpp"

namespace assure {

// Two-slice dynamic Bayesian network over the discretized cte state: exact
// forward filtering against perception evidence plus k-step forecasting by
// unrolling the transition model.

/// Observed variables of one time slice, raw units.
struct EvidenceFrame {
  FeatureVector features;
  double cte_e = 0.0;  // meters
  double he_e = 0.0;   // degrees
  int t = 0;
};

struct FilterStats {
  std::uint64_t zero_product_fallbacks = 0;
};

struct DbnModel {
  IntervalPartition cte_partition;
  IntervalPartition cte_e_partition;
  IntervalPartition he_partition;
  TransitionCPT transition;
  EmissionForest emission;
  OodMonitor ood;
  double step_duration = 0.33;  // seconds per slice
  std::vector<std::string> training_envs;  // tags of the data the model was fit on

  void validate() const {
    if (!(step_duration > 0.0)) {
      throw std::invalid_argument("DbnModel: step_duration must be positive");
    }
    if (transition.cte_states() != cte_partition.num_states() ||
        transition.cte_e_states() != cte_e_partition.num_states() ||
        transition.he_states() != he_partition.num_states()) {
      throw std::invalid_argument("DbnModel: transition table does not match partitions");
    }
    if (emission.num_states() != cte_partition.num_states()) {
      throw std::invalid_argument("DbnModel: emission states do not match cte partition");
    }
    if (ood.feature_dim() != emission.feature_dim()) {
      throw std::invalid_argument("DbnModel: OOD monitor dimension does not match emission");
    }
  }

  std::size_t num_states() const { return cte_partition.num_states(); }
  std::size_t feature_dim() const { return emission.feature_dim(); }

  bool operator==(const DbnModel&) const = default;
};

/// One transition-model step: b'(x) = sum_x' T(x | x', cte_e, he_e) b(x').
inline BeliefVector predict_step(const DbnModel& model, const BeliefVector& belief,
                                 std::size_t cte_e_state, std::size_t he_e_state) {
  const std::size_t k = model.num_states();
  if (belief.size() != k) {
    throw std::invalid_argument("predict_step: belief dimension mismatch");
  }
  std::vector<double> out(k, 0.0);
  for (std::size_t xp = 0; xp < k; ++xp) {
    const double w = belief[xp];
    if (w == 0.0) continue;
    const auto row = model.transition.row(xp, cte_e_state, he_e_state);
    for (std::size_t x = 0; x < k; ++x) out[x] += w * row[x];
  }
  return BeliefVector::normalized(std::move(out));
}

/// Evidence weight over cte states for one frame. An out-of-distribution
/// frame (D=1) contributes nothing: the weight degrades to uniform, so the
/// posterior rests on the transition model alone. In distribution, the
/// forest posterior is used directly; training data is class-balanced, which
/// makes that exact up to the uniform prior.
inline BeliefVector emission_likelihood(const DbnModel& model, const EvidenceFrame& frame) {
  if (frame.features.size() != model.feature_dim()) {
    throw std::invalid_argument("emission_likelihood: feature dimension mismatch");
  }
  if (detect(model.ood, frame.features).value) {
    return BeliefVector::uniform(model.num_states());
  }
  return forest_predict(model.emission, frame.features);
}

/// Forward filtering update: predict with the frame's discretized estimates
/// as transition parents, weight by the emission, renormalize. If evidence
/// annihilates the prediction the step falls back to the prediction and
/// counts the event, keeping the monitor live.
inline BeliefVector filter_step(const DbnModel& model, const BeliefVector& belief,
                                const EvidenceFrame& frame, FilterStats* stats = nullptr) {
  const std::size_t e = model.cte_e_partition.locate_clamped(frame.cte_e);
  const std::size_t h = model.he_partition.locate_clamped(frame.he_e);
  BeliefVector predicted = predict_step(model, belief, e, h);
  BeliefVector likelihood = emission_likelihood(model, frame);

  std::vector<double> product(predicted.size());
  double sum = 0.0;
  for (std::size_t x = 0; x < predicted.size(); ++x) {
    product[x] = predicted[x] * likelihood[x];
    sum += product[x];
  }
  if (sum <= 0.0) {
    if (stats != nullptr) ++stats->zero_product_fallbacks;
    return predicted;
  }
  return BeliefVector::normalized(std::move(product));
}

/// Unroll the transition model `steps` slices past the last observation,
/// holding the last observed (discretized) estimates fixed as parents. No
/// emission applies at lookahead steps. Element i is the belief i+1 steps
/// ahead.
inline std::vector<BeliefVector> forecast(const DbnModel& model, const BeliefVector& belief,
                                          const EvidenceFrame& last_frame, std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("forecast: steps must be >= 1");
  const std::size_t e = model.cte_e_partition.locate_clamped(last_frame.cte_e);
  const std::size_t h = model.he_partition.locate_clamped(last_frame.he_e);
  std::vector<BeliefVector> out;
  out.reserve(steps);
  BeliefVector current = belief;
  for (std::size_t i = 0; i < steps; ++i) {
    current = predict_step(model, current, e, h);
    out.push_back(current);
  }
  return out;
}

}  // namespace assure
