#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "assure/dbn.hpp"
#include "assure/statespace.hpp"

namespace assure {

// Assurance measures and the sufficiency / contingency logic on top of the
// filter: per step and per lookahead step, the probability that the vehicle
// satisfies |cte| < offset, the verdict against the confidence threshold,
// and the resulting stop / slow / continue action.

enum class Action { kContinue, kSlow, kStop };

inline const char* to_string(Action a) {
  switch (a) {
    case Action::kContinue: return "continue";
    case Action::kSlow: return "slow";
    case Action::kStop: return "stop";
  }
  return "?";
}

/// Default matching tolerance between a requested offset and a partition
/// boundary. Wide enough to accept two-decimal roundings of derived
/// boundaries (1.43 for 10/7), far below any interval width in use.
inline constexpr double kOffsetBoundaryTol = 5e-3;

/// The boundary value of `partition` that `offset` refers to.
/// The measure is an exact mass sum, so offsets must land on boundaries; no
/// interpolation is performed.
inline double snap_offset(const IntervalPartition& partition, double offset,
                          double tol = kOffsetBoundaryTol) {
  auto pos = partition.boundary_index(offset, tol);
  auto neg = partition.boundary_index(-offset, tol);
  if (!pos || !neg) {
    throw std::invalid_argument("assurance_measure: offset " + std::to_string(offset) +
                                " is not aligned to a partition boundary");
  }
  return partition.boundaries()[*pos];
}

/// Pr(|cte| < offset): the belief mass over states lying inside
/// [-offset, +offset].
inline double assurance_measure(const BeliefVector& belief, const IntervalPartition& partition,
                                double offset) {
  if (belief.size() != partition.num_states()) {
    throw std::invalid_argument("assurance_measure: belief does not match partition");
  }
  const double snapped = snap_offset(partition, offset);
  const auto& b = partition.boundaries();
  double mass = 0.0;
  std::size_t included = 0;
  for (std::size_t s = 0; s < partition.num_states(); ++s) {
    if (b[s] >= -snapped && b[s + 1] <= snapped) {
      mass += belief[s];
      ++included;
    }
  }
  if (included == partition.num_states()) return 1.0;  // whole distribution by definition
  return std::clamp(mass, 0.0, 1.0);
}

/// Per-step verdicts: step t is assured unless the violation mass
/// 1 - measure(t) reaches the threshold. The comparison is >= on the
/// violation mass, so a violation probability of exactly 0.30 already
/// defeats the claim.
inline std::vector<bool> sufficiency(const std::vector<double>& measures, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("sufficiency: threshold must lie in (0,1)");
  }
  std::vector<bool> assured(measures.size());
  for (std::size_t t = 0; t < measures.size(); ++t) {
    assured[t] = !(1.0 - measures[t] >= threshold);
  }
  return assured;
}

/// Map a horizon of verdicts and measures to an action. A violation at any
/// step over the horizon stops the vehicle now; otherwise the worst-case
/// violation mass max_t (1 - measure(t)) lands in [slow_threshold, stop
/// band) -> slow, below it -> continue.
inline Action contingency(const std::vector<bool>& assured, double slow_threshold,
                          const std::vector<double>& measures) {
  if (assured.empty() || assured.size() != measures.size()) {
    throw std::invalid_argument("contingency: verdicts and measures must align");
  }
  for (bool ok : assured) {
    if (!ok) return Action::kStop;
  }
  double min_measure = 1.0;
  for (double m : measures) min_measure = std::min(min_measure, m);
  if (1.0 - min_measure >= slow_threshold) return Action::kSlow;
  return Action::kContinue;
}

struct AssuranceConfig {
  std::vector<double> offsets{2.0, 1.43};  // meters; first entry drives verdicts
  std::size_t horizon = 6;                 // lookahead steps
  double stop_threshold = 0.3;             // violation mass that defeats the claim
  double slow_threshold = 0.15;            // onset of the slow band

  void validate() const {
    if (offsets.empty()) throw std::invalid_argument("AssuranceConfig: needs >= 1 offset");
    if (horizon < 1) throw std::invalid_argument("AssuranceConfig: horizon must be >= 1");
    if (!(stop_threshold > 0.0 && stop_threshold < 1.0)) {
      throw std::invalid_argument("AssuranceConfig: stop_threshold must lie in (0,1)");
    }
    if (!(slow_threshold > 0.0 && slow_threshold < stop_threshold)) {
      throw std::invalid_argument("AssuranceConfig: slow_threshold must lie below stop_threshold");
    }
  }
};

/// Everything the monitor knows at one time step.
struct AssuranceReport {
  int t = 0;
  bool ood = false;
  Action action = Action::kContinue;
  std::vector<double> offsets;                         // snapped to boundaries
  std::vector<double> measures;                        // t=0, one per offset
  std::vector<std::vector<double>> forecast_measures;  // horizon rows, one entry per offset
  std::vector<bool> assured;                           // t=0..horizon, offsets[0]
  BeliefVector belief{BeliefVector::uniform(1)};       // filtered belief at t=0
  std::vector<BeliefVector> forecast_beliefs;          // lookahead 1..horizon
};

/// One filtering session over a mission. Owns the evolving belief; the model
/// is shared and immutable. Starts from a uniform belief: maximal ignorance
/// at mission start.
class AssuranceSession {
 public:
  explicit AssuranceSession(const DbnModel& model, AssuranceConfig config = {})
      : model_(&model), config_(std::move(config)), belief_(BeliefVector::uniform(model.num_states())) {
    model.validate();
    config_.validate();
    snapped_offsets_.reserve(config_.offsets.size());
    for (double off : config_.offsets) {
      snapped_offsets_.push_back(snap_offset(model.cte_partition, off));
    }
  }

  AssuranceReport step(const EvidenceFrame& frame) {
    const auto& model = *model_;
    AssuranceReport report;
    report.t = next_t_;
    report.ood = detect(model.ood, frame.features).value;
    report.offsets = snapped_offsets_;

    belief_ = filter_step(model, belief_, frame, &stats_);
    report.belief = belief_;
    report.forecast_beliefs = forecast(model, belief_, frame, config_.horizon);

    report.measures.reserve(snapped_offsets_.size());
    for (double off : snapped_offsets_) {
      report.measures.push_back(assurance_measure(belief_, model.cte_partition, off));
    }
    report.forecast_measures.reserve(report.forecast_beliefs.size());
    for (const auto& fb : report.forecast_beliefs) {
      std::vector<double> row;
      row.reserve(snapped_offsets_.size());
      for (double off : snapped_offsets_) {
        row.push_back(assurance_measure(fb, model.cte_partition, off));
      }
      report.forecast_measures.push_back(std::move(row));
    }

    std::vector<double> primary;  // offsets[0] across t=0..horizon
    primary.reserve(1 + report.forecast_measures.size());
    primary.push_back(report.measures[0]);
    for (const auto& row : report.forecast_measures) primary.push_back(row[0]);
    report.assured = sufficiency(primary, config_.stop_threshold);
    report.action = contingency(report.assured, config_.slow_threshold, primary);

    ++next_t_;
    return report;
  }

  void reset() {
    belief_ = BeliefVector::uniform(model_->num_states());
    next_t_ = 0;
    stats_ = FilterStats{};
  }

  const BeliefVector& belief() const { return belief_; }
  const FilterStats& stats() const { return stats_; }
  const AssuranceConfig& config() const { return config_; }
  const std::vector<double>& snapped_offsets() const { return snapped_offsets_; }

 private:
  const DbnModel* model_;
  AssuranceConfig config_;
  std::vector<double> snapped_offsets_;
  BeliefVector belief_;
  FilterStats stats_;
  int next_t_ = 0;
};

/// One JSON-lines object per time step.
inline nlohmann::json report_to_json(const AssuranceReport& r) {
  nlohmann::json forecasts = nlohmann::json::array();
  for (const auto& fb : r.forecast_beliefs) forecasts.push_back(fb.probabilities());
  return nlohmann::json{
      {"t", r.t},
      {"ood", r.ood},
      {"action", to_string(r.action)},
      {"offsets", r.offsets},
      {"measures", r.measures},
      {"forecast_measures", r.forecast_measures},
      {"assured", r.assured},
      {"belief", r.belief.probabilities()},
      {"forecast_beliefs", forecasts},
  };
}

}  // namespace assure
