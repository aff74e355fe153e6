#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace assure {

// Discretized random variables of the monitor state space, plus the
// discrete-distribution arithmetic every other module shares.

/// A scalar range chopped into contiguous intervals.
///
/// Interval i spans [b_i, b_{i+1}). A value equal to an interior boundary
/// belongs to the interval on its right; the final interval is closed, so
/// the upper bound itself is admissible. This tie-break is fixed and relied
/// upon by the discretization tests.
class IntervalPartition {
 public:
  IntervalPartition(std::vector<double> boundaries, std::string unit)
      : boundaries_(std::move(boundaries)), unit_(std::move(unit)) {
    if (boundaries_.size() < 2) {
      throw std::invalid_argument("IntervalPartition: need at least two boundaries");
    }
    for (std::size_t i = 1; i < boundaries_.size(); ++i) {
      if (!(boundaries_[i - 1] < boundaries_[i])) {
        throw std::invalid_argument("IntervalPartition: boundaries must be strictly increasing");
      }
    }
  }

  /// `inner_states` equal-width intervals tiling [-inner_half, +inner_half]
  /// plus one outer interval per side reaching ±outer_half. Boundaries are
  /// mirrored so the partition is symmetric to the last bit.
  static IntervalPartition symmetric(double inner_half, int inner_states, double outer_half,
                                     std::string unit) {
    if (!(inner_half > 0.0)) {
      throw std::invalid_argument("symmetric partition: inner_half must be positive");
    }
    if (inner_states < 3 || inner_states % 2 == 0) {
      throw std::invalid_argument("symmetric partition: inner_states must be odd and >= 3");
    }
    if (!(outer_half > inner_half)) {
      throw std::invalid_argument("symmetric partition: outer_half must exceed inner_half");
    }
    std::vector<double> b(static_cast<std::size_t>(inner_states) + 3, 0.0);
    const std::size_t n = b.size();  // inner_states + 1 inner boundaries + 2 outer
    b.front() = -outer_half;
    b.back() = outer_half;
    for (int k = 0; 2 * k <= inner_states; ++k) {
      const double x = -inner_half + 2.0 * inner_half * k / inner_states;
      b[static_cast<std::size_t>(k) + 1] = x;
      b[n - 2 - static_cast<std::size_t>(k)] = -x;
    }
    return IntervalPartition(std::move(b), std::move(unit));
  }

  std::size_t num_states() const { return boundaries_.size() - 1; }
  double lower() const { return boundaries_.front(); }
  double upper() const { return boundaries_.back(); }
  const std::vector<double>& boundaries() const { return boundaries_; }
  const std::string& unit() const { return unit_; }

  /// Index of the unique interval containing `value`.
  /// Throws std::out_of_range outside [lower, upper]; callers feeding raw
  /// sensor values clamp first.
  std::size_t locate(double value) const {
    if (std::isnan(value) || value < lower() || value > upper()) {
      throw std::out_of_range("IntervalPartition::locate: value outside partition range");
    }
    auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), value);
    auto idx = static_cast<std::size_t>(it - boundaries_.begin()) - 1;
    return std::min(idx, num_states() - 1);  // upper bound folds into the last interval
  }

  double clamp(double value) const {
    if (std::isnan(value)) {
      throw std::invalid_argument("IntervalPartition::clamp: NaN value");
    }
    return std::clamp(value, lower(), upper());
  }

  std::size_t locate_clamped(double value) const { return locate(clamp(value)); }

  /// Index of the boundary equal to `x` within `tol`, if any.
  std::optional<std::size_t> boundary_index(double x, double tol) const {
    for (std::size_t i = 0; i < boundaries_.size(); ++i) {
      if (std::abs(boundaries_[i] - x) <= tol) return i;
    }
    return std::nullopt;
  }

  std::string label(std::size_t state) const {
    if (state >= num_states()) {
      throw std::out_of_range("IntervalPartition::label: no such state");
    }
    char buf[64];
    const char close = (state == num_states() - 1) ? ']' : ')';
    std::snprintf(buf, sizeof(buf), "[%.4g%s,%.4g%s%c", boundaries_[state], unit_.c_str(),
                  boundaries_[state + 1], unit_.c_str(), close);
    return buf;
  }

  bool operator==(const IntervalPartition&) const = default;

 private:
  std::vector<double> boundaries_;
  std::string unit_;
};

/// Partition of cross-track error: `inner_states` equal widths across
/// [-offset, +offset] plus two outer intervals out to ±half_width, meters.
/// Negative values sit left of the centerline.
inline IntervalPartition make_cte_partition(double offset, int inner_states, double half_width) {
  if (!(offset > 0.0)) {
    throw std::invalid_argument("make_cte_partition: offset must be positive");
  }
  if (!(half_width > offset)) {
    throw std::invalid_argument("make_cte_partition: half_width must exceed offset");
  }
  return IntervalPartition::symmetric(offset, inner_states, half_width, "m");
}

/// Heading-error partition, degrees. Defaults: 7 states across ±30° plus
/// outer intervals to ±90°.
inline IntervalPartition make_he_partition(double inner_half = 30.0, int inner_states = 7,
                                           double outer_half = 90.0) {
  return IntervalPartition::symmetric(inner_half, inner_states, outer_half, "deg");
}

/// Normalized discrete distribution over the states of one partition.
///
/// The checked constructor accepts distributions that are already normalized
/// up to a drift of 1e-9 and renormalizes them; anything further off is an
/// error. Unnormalized non-negative weights go through `normalized`.
class BeliefVector {
 public:
  explicit BeliefVector(std::vector<double> probabilities)
      : p_(std::move(probabilities)) {
    if (p_.empty()) throw std::invalid_argument("BeliefVector: empty");
    double sum = 0.0;
    for (double v : p_) {
      if (std::isnan(v) || v < 0.0) {
        throw std::invalid_argument("BeliefVector: entries must be non-negative");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) >= 1e-9) {
      throw std::invalid_argument("BeliefVector: probabilities sum to " + std::to_string(sum));
    }
    for (double& v : p_) v /= sum;
  }

  /// Normalize arbitrary non-negative weights. Throws if all weights vanish.
  static BeliefVector normalized(std::vector<double> weights) {
    if (weights.empty()) throw std::invalid_argument("BeliefVector: empty");
    double sum = 0.0;
    for (double v : weights) {
      if (std::isnan(v) || v < 0.0) {
        throw std::invalid_argument("BeliefVector: weights must be non-negative");
      }
      sum += v;
    }
    if (sum <= 0.0) throw std::invalid_argument("BeliefVector: all weights are zero");
    for (double& v : weights) v /= sum;
    BeliefVector b;
    b.p_ = std::move(weights);
    return b;
  }

  static BeliefVector uniform(std::size_t n) {
    if (n == 0) throw std::invalid_argument("BeliefVector: empty");
    BeliefVector b;
    b.p_.assign(n, 1.0 / static_cast<double>(n));
    return b;
  }

  static BeliefVector point_mass(std::size_t n, std::size_t state) {
    if (state >= n) throw std::invalid_argument("BeliefVector: state out of range");
    BeliefVector b;
    b.p_.assign(n, 0.0);
    b.p_[state] = 1.0;
    return b;
  }

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& probabilities() const { return p_; }
  auto begin() const { return p_.begin(); }
  auto end() const { return p_.end(); }

  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(p_.begin(), p_.end()) - p_.begin());
  }

  bool operator==(const BeliefVector&) const = default;

 private:
  BeliefVector() = default;
  std::vector<double> p_;
};

/// Shannon entropy in nats, with 0·log 0 = 0.
inline double entropy(const BeliefVector& b) {
  double h = 0.0;
  for (double p : b) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

/// Outlier-detection verdict for one perception frame.
struct OutlierFlag {
  bool value = false;
};

/// Surrogate perception input: a fixed-length vector of values in [0, 1].
class FeatureVector {
 public:
  explicit FeatureVector(std::vector<double> values) : v_(std::move(values)) {
    for (double& x : v_) {
      if (std::isnan(x)) throw std::invalid_argument("FeatureVector: NaN entry");
      x = std::clamp(x, 0.0, 1.0);
    }
  }

  std::size_t size() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  const std::vector<double>& values() const { return v_; }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  bool operator==(const FeatureVector&) const = default;

 private:
  std::vector<double> v_;
};

inline void to_json(nlohmann::json& j, const IntervalPartition& p) {
  j = nlohmann::json{{"boundaries", p.boundaries()}, {"unit", p.unit()}};
}

}  // namespace assure

namespace nlohmann {
// IntervalPartition has no default constructor, so adl_serializer needs the
// two-way specialization.
template <>
struct adl_serializer<assure::IntervalPartition> {
  static assure::IntervalPartition from_json(const json& j) {
    return assure::IntervalPartition(j.at("boundaries").get<std::vector<double>>(),
                                     j.at("unit").get<std::string>());
  }
  static void to_json(json& j, const assure::IntervalPartition& p) { assure::to_json(j, p); }
};
}  // namespace nlohmann
