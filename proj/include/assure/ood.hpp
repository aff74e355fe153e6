#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "assure/statespace.hpp"

namespace assure {

// Runtime monitor behind the outlier variable D. The mechanism is a
// standardized Euclidean distance to the training-feature mean with an
// empirical-quantile threshold; anything fancier can swap in behind the same
// surface.

struct OodMonitor {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-6
  double threshold = 1.0;
  std::string method = "standardized-euclidean";
  double quantile = 0.0;  // calibration quantile used at fit time

  std::size_t feature_dim() const { return mean.size(); }

  double distance(const FeatureVector& features) const {
    if (features.size() != mean.size()) {
      throw std::invalid_argument("OodMonitor: feature dimension mismatch");
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double z = (features[i] - mean[i]) / stddev[i];
      d2 += z * z;
    }
    return std::sqrt(d2);
  }

  /// Monitor that flags every frame; used to force D=1 in diagnostics.
  static OodMonitor always_outlier(std::size_t dim) {
    OodMonitor m;
    m.mean.assign(dim, 0.0);
    m.stddev.assign(dim, 1.0);
    m.threshold = 1.0;
    m.method = "always-outlier";
    return m;
  }

  bool operator==(const OodMonitor&) const = default;
};

inline OodMonitor fit_ood(const std::vector<FeatureVector>& samples, double quantile) {
  if (samples.size() < 30) {
    throw std::invalid_argument("fit_ood: need at least 30 samples");
  }
  if (!(quantile > 0.9 && quantile < 1.0)) {
    throw std::invalid_argument("fit_ood: quantile must lie in (0.9, 1.0)");
  }
  const std::size_t n = samples.size();
  const std::size_t d = samples[0].size();
  for (const auto& s : samples) {
    if (s.size() != d) throw std::invalid_argument("fit_ood: inconsistent feature dimension");
  }

  OodMonitor m;
  m.quantile = quantile;
  m.mean.assign(d, 0.0);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < d; ++i) m.mean[i] += s[i];
  }
  for (double& v : m.mean) v /= static_cast<double>(n);

  m.stddev.assign(d, 0.0);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < d; ++i) {
      const double dx = s[i] - m.mean[i];
      m.stddev[i] += dx * dx;
    }
  }
  for (double& v : m.stddev) {
    v = std::max(std::sqrt(v / static_cast<double>(n - 1)), 1e-6);
  }

  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = m.distance(samples[i]);
  std::sort(dist.begin(), dist.end());
  // Nearest-rank empirical quantile; detection is strict, so roughly a
  // (1 - quantile) fraction of the training set itself gets flagged.
  const auto rank = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(n)));
  m.threshold = std::max(dist[std::min(rank, n) - 1], 1e-9);
  return m;
}

inline OutlierFlag detect(const OodMonitor& monitor, const FeatureVector& features) {
  if (monitor.method == "always-outlier") return OutlierFlag{true};
  return OutlierFlag{monitor.distance(features) > monitor.threshold};
}

}  // namespace assure
