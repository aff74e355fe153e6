#pragma once

// Small model fixtures shared across test files.

#include <cstdint>
#include <vector>

#include "assure/dbn.hpp"

namespace helpers {

inline assure::DecisionTree flat_tree(std::vector<std::uint32_t> hist) {
  std::vector<assure::TreeNode> n(1);
  n[0].histogram = std::move(hist);
  return assure::DecisionTree(std::move(n));
}

inline assure::OodMonitor never_flagging(std::size_t dim) {
  assure::OodMonitor m;
  m.mean.assign(dim, 0.5);
  m.stddev.assign(dim, 1.0);
  m.threshold = 1e9;
  return m;
}

// 9-state model over the standard partitions with uniform rows everywhere,
// as an untrained MAP fit would produce. Feature dimension 1.
inline assure::DbnModel uniform_model() {
  const auto cte = assure::make_cte_partition(2.0, 7, 10.0);
  const auto he = assure::make_he_partition();
  const std::size_t k = cte.num_states();
  std::vector<double> flat(k * k * k * k, 1.0 / static_cast<double>(k));
  std::vector<std::uint32_t> hist(k, 1);
  assure::DbnModel m{cte,
                     cte,
                     he,
                     assure::TransitionCPT(k, k, k, std::move(flat)),
                     assure::EmissionForest({flat_tree(hist)}, k, 1, {}),
                     never_flagging(1),
                     0.33,
                     {}};
  m.validate();
  return m;
}

}  // namespace helpers
