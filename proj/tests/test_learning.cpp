#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "assure/cpt.hpp"
#include "assure/forest.hpp"
#include "assure/ood.hpp"
#include "assure/rng.hpp"
#include "oracles.hpp"

using namespace assure;

namespace {

// Midpoint of a state's interval: a raw value guaranteed to discretize back
// to that state.
double midpoint(const IntervalPartition& p, std::size_t s) {
  return 0.5 * (p.boundaries()[s] + p.boundaries()[s + 1]);
}

Trajectory trajectory_from_states(const IntervalPartition& cte, const IntervalPartition& he,
                                  const std::vector<std::array<std::size_t, 3>>& states) {
  Trajectory traj;
  for (std::size_t i = 0; i < states.size(); ++i) {
    TrajectoryFrame f;
    f.t = static_cast<int>(i);
    f.env = "fixture";
    f.cte_true = midpoint(cte, states[i][0]);
    f.cte_e = midpoint(cte, states[i][1]);
    f.he_e = midpoint(he, states[i][2]);
    f.features = FeatureVector({0.5});
    traj.frames.push_back(std::move(f));
  }
  return traj;
}

}  // namespace

TEST_CASE("fit_transition closed form on a hand-built fixture") {
  const auto cte = make_cte_partition(2.0, 3, 10.0);  // 5 states -> small table
  const auto he = make_he_partition(30.0, 3, 90.0);

  // One parent config (cte=2, cte_e=2, he=2) observed 4 times with child
  // counts (3, 1, 0, 0, 0) over the 5 cte states.
  std::vector<std::array<std::size_t, 3>> states;
  states.push_back({2, 2, 2});
  states.push_back({2, 2, 2});  // 2 -> 2
  states.push_back({2, 2, 2});  // 2 -> 2
  states.push_back({2, 2, 2});  // 2 -> 2
  states.push_back({3, 0, 0});  // 2 -> 3
  const auto traj = trajectory_from_states(cte, he, states);

  const auto cptab = fit_transition({traj}, cte, cte, he, 2.0);
  const auto row = cptab.row(2, 2, 2);
  const double n = 4.0, k = 5.0;
  CHECK(row[2] == (3.0 + 1.0) / (n + k));  // (count + alpha - 1) / (N + K(alpha-1))
  CHECK(row[3] == (1.0 + 1.0) / (n + k));
  CHECK(row[0] == 1.0 / (n + k));
  CHECK(row[1] == 1.0 / (n + k));
  CHECK(row[4] == 1.0 / (n + k));

  // Unvisited parent configs come out exactly uniform.
  const auto empty_row = cptab.row(0, 4, 1);
  for (std::size_t x = 0; x < 5; ++x) CHECK(empty_row[x] == 1.0 / 5.0);
}

TEST_CASE("fit_transition counts (3,1,0) with K=3 gives (4/7, 2/7, 1/7)") {
  // Direct formula check at K=3 via a 3-state cte partition.
  const auto cte = IntervalPartition({-10.0, -1.0, 1.0, 10.0}, "m");
  const auto he = make_he_partition(30.0, 3, 90.0);
  std::vector<std::array<std::size_t, 3>> states = {
      {1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {2, 0, 0},
  };
  // Transitions from (1,1,1): 1->1 three times, then 1->2 once.
  const auto traj = trajectory_from_states(cte, he, states);
  const auto cptab = fit_transition({traj}, cte, cte, he, 2.0);
  const auto row = cptab.row(1, 1, 1);
  CHECK(row[0] == 1.0 / 7.0);
  CHECK(row[1] == 4.0 / 7.0);
  CHECK(row[2] == 2.0 / 7.0);
}

TEST_CASE("fit_transition argument validation") {
  const auto cte = make_cte_partition(2.0, 3, 10.0);
  const auto he = make_he_partition(30.0, 3, 90.0);
  CHECK_THROWS_AS(fit_transition({}, cte, cte, he, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_transition({Trajectory{}}, cte, cte, he, 1.0), std::invalid_argument);
  // A single-frame trajectory has no transitions.
  std::vector<std::array<std::size_t, 3>> one = {{2, 2, 2}};
  CHECK_THROWS_AS(fit_transition({trajectory_from_states(cte, he, one)}, cte, cte, he, 2.0),
                  std::invalid_argument);
}

TEST_CASE("fit_transition recovers a known model from sampled data") {
  // Sample a long trajectory from a hand-specified 3-state chain, refit, and
  // compare rows where enough evidence accumulated.
  const auto cte = IntervalPartition({-10.0, -1.0, 1.0, 10.0}, "m");
  const auto he = IntervalPartition({-90.0, -10.0, 10.0, 90.0}, "deg");
  const std::size_t k = 3;

  std::mt19937_64 rng(substream_seed(42, "cpt-oracle"));
  // True kernel depends only on (x_prev, e_prev) to keep the fixture small;
  // h is held at state 1.
  std::vector<std::vector<double>> kernel(k * k);
  for (auto& row : kernel) row = oracles::random_distribution(k, rng);

  std::vector<std::array<std::size_t, 3>> states;
  std::uniform_int_distribution<std::size_t> pick_e(0, k - 1);
  std::size_t x = 0;
  std::size_t e = pick_e(rng);
  states.push_back({x, e, 1});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 1; t < 20000; ++t) {
    const auto& row = kernel[x * k + e];
    double r = u(rng), acc = 0.0;
    std::size_t next = k - 1;
    for (std::size_t c = 0; c < k; ++c) {
      acc += row[c];
      if (r < acc) {
        next = c;
        break;
      }
    }
    x = next;
    e = pick_e(rng);
    states.push_back({x, e, 1});
  }
  const auto traj = trajectory_from_states(cte, he, states);

  // Tally visits per (x, e) parent pair to know which rows to compare.
  std::vector<std::size_t> visits(k * k, 0);
  for (std::size_t i = 0; i + 1 < states.size(); ++i) {
    ++visits[states[i][0] * k + states[i][1]];
  }

  const auto cptab = fit_transition({traj}, cte, cte, he, 2.0);
  for (std::size_t xp = 0; xp < k; ++xp) {
    for (std::size_t ep = 0; ep < k; ++ep) {
      if (visits[xp * k + ep] < 50) continue;
      const auto row = cptab.row(xp, ep, 1);
      double l1 = 0.0;
      for (std::size_t c = 0; c < k; ++c) l1 += std::abs(row[c] - kernel[xp * k + ep][c]);
      CAPTURE(xp, ep, visits[xp * k + ep]);
      CHECK(l1 < 0.1);
    }
  }
}

TEST_CASE("cpt rows always sum to one") {
  const auto cte = make_cte_partition(2.0, 3, 10.0);
  const auto he = make_he_partition(30.0, 3, 90.0);
  std::mt19937_64 rng(3);
  std::vector<std::array<std::size_t, 3>> states;
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  std::uniform_int_distribution<std::size_t> pick_h(0, cte.num_states() - 1);
  for (int i = 0; i < 500; ++i) {
    states.push_back({pick(rng), pick(rng), pick(rng)});
  }
  const auto traj = trajectory_from_states(cte, he, states);
  const auto cptab = fit_transition({traj}, cte, cte, he, 2.0);
  for (std::size_t r = 0; r < cptab.num_parent_configs(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cptab.cte_states(); ++c) sum += cptab.flat()[r * 5 + c];
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

// --- emission forest --------------------------------------------------------

namespace {

std::vector<TrainingSample> separable_data(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> f(d);
    for (double& v : f) v = u(rng);
    const std::size_t label = f[0] > 0.5 ? 1 : 0;
    out.push_back({FeatureVector(std::move(f)), label});
  }
  return out;
}

}  // namespace

TEST_CASE("forest separates linearly separable data") {
  std::mt19937_64 rng(11);
  const auto train = separable_data(600, 8, rng);
  const auto test = separable_data(300, 8, rng);

  ForestConfig cfg;
  cfg.trees = 60;
  cfg.min_leaf = 5;
  cfg.samples_per_tree = 200;
  cfg.seed = 1;
  const auto forest = fit_forest(train, 2, cfg);

  std::size_t correct = 0;
  for (const auto& s : test) {
    const auto b = forest_predict(forest, s.features);
    if (b.argmax() == s.state) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) >= 0.95);
}

TEST_CASE("forest training is deterministic in (data, config, seed)") {
  std::mt19937_64 rng(5);
  const auto data = separable_data(200, 6, rng);
  ForestConfig cfg;
  cfg.trees = 12;
  cfg.min_leaf = 4;
  cfg.samples_per_tree = 80;
  cfg.seed = 99;
  const auto a = fit_forest(data, 2, cfg);
  const auto b = fit_forest(data, 2, cfg);
  CHECK(a == b);
}

TEST_CASE("degenerate tree: min_leaf at dataset size gives a single leaf") {
  std::mt19937_64 rng(5);
  const auto data = separable_data(50, 4, rng);
  ForestConfig cfg;
  cfg.trees = 1;
  cfg.min_leaf = 50;
  cfg.samples_per_tree = 50;
  cfg.seed = 7;
  const auto forest = fit_forest(data, 2, cfg);
  REQUIRE(forest.trees().size() == 1);
  REQUIRE(forest.trees()[0].nodes().size() == 1);
  const auto& leaf = forest.trees()[0].nodes()[0];
  REQUIRE(leaf.is_leaf());
  std::uint64_t total = 0;
  for (auto c : leaf.histogram) total += c;
  CHECK(total == 50);  // the whole bag, as one empirical distribution
}

TEST_CASE("forest rejects degenerate inputs") {
  std::mt19937_64 rng(5);
  auto data = separable_data(50, 4, rng);
  for (auto& s : data) s.state = 1;  // single class
  ForestConfig cfg;
  CHECK_THROWS_AS(fit_forest(data, 2, cfg), std::invalid_argument);
  CHECK_THROWS_AS(fit_forest({}, 2, cfg), std::invalid_argument);
  cfg.trees = 0;
  CHECK_THROWS_AS(fit_forest(separable_data(50, 4, rng), 2, cfg), std::invalid_argument);
}

TEST_CASE("forest_predict applies Laplace smoothing to leaf histograms") {
  // Single-leaf tree with histogram (8, 2): (9/12, 3/12).
  std::vector<TreeNode> nodes(1);
  nodes[0].histogram = {8, 2};
  EmissionForest forest({DecisionTree({nodes})}, 2, 3, ForestConfig{});
  const auto b = forest_predict(forest, FeatureVector({0.1, 0.2, 0.3}));
  CHECK(b[0] == Catch::Approx(0.75).epsilon(1e-12));
  CHECK(b[1] == Catch::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(forest_predict(forest, FeatureVector({0.1})), std::invalid_argument);
}

TEST_CASE("two opposing near-point leaves average to the middle") {
  std::vector<TreeNode> a(1), b(1);
  a[0].histogram = {1, 0};
  b[0].histogram = {0, 1};
  EmissionForest forest({DecisionTree({a}), DecisionTree({b})}, 2, 1, ForestConfig{});
  const auto out = forest_predict(forest, FeatureVector({0.4}));
  CHECK(out[0] == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(out[1] == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("forest outputs are strictly positive") {
  std::mt19937_64 rng(21);
  const auto data = separable_data(300, 8, rng);
  ForestConfig cfg;
  cfg.trees = 40;
  cfg.min_leaf = 5;
  cfg.samples_per_tree = 100;
  cfg.seed = 3;
  const auto forest = fit_forest(data, 2, cfg);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> f(8);
    for (double& v : f) v = u(rng);
    const auto belief = forest_predict(forest, FeatureVector(std::move(f)));
    for (double p : belief) CHECK(p > 0.0);
  }
}

TEST_CASE("increasing min_leaf weakly decreases depth (1-D spot check)") {
  // One feature keeps the candidate-feature draw out of the comparison.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TrainingSample> data;
  for (int i = 0; i < 400; ++i) {
    const double x = u(rng);
    data.push_back({FeatureVector({x}), x > 0.3 ? (x > 0.7 ? 2u : 1u) : 0u});
  }
  std::size_t prev_depth = SIZE_MAX;
  for (std::size_t min_leaf : {2, 10, 50, 200}) {
    ForestConfig cfg;
    cfg.trees = 1;
    cfg.min_leaf = min_leaf;
    cfg.samples_per_tree = 400;
    cfg.seed = 17;
    const auto forest = fit_forest(data, 3, cfg);
    const auto depth = forest.trees()[0].depth();
    CHECK(depth <= prev_depth);
    prev_depth = depth;
  }
}

TEST_CASE("stratified balance equalizes observed class counts") {
  std::vector<TrainingSample> data;
  for (int i = 0; i < 90; ++i) data.push_back({FeatureVector({0.1}), 0});
  for (int i = 0; i < 9; ++i) data.push_back({FeatureVector({0.9}), 2});
  auto rng = substream(1, "balance");
  const auto balanced = stratified_balance(data, 4, rng);
  std::array<std::size_t, 4> counts{};
  for (const auto& s : balanced) ++counts[s.state];
  CHECK(counts[0] == 90);
  CHECK(counts[1] == 0);  // absent classes stay absent
  CHECK(counts[2] == 90);
  CHECK(counts[3] == 0);
}

// --- OOD monitor ------------------------------------------------------------

namespace {

std::vector<FeatureVector> gaussian_cloud(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.5, 0.1);
  std::vector<FeatureVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> f(d);
    for (double& v : f) v = g(rng);
    out.push_back(FeatureVector(std::move(f)));
  }
  return out;
}

}  // namespace

TEST_CASE("ood threshold flags the expected training fraction") {
  std::mt19937_64 rng(13);
  const auto cloud = gaussian_cloud(1000, 8, rng);
  const auto monitor = fit_ood(cloud, 0.99);

  std::size_t flagged = 0;
  for (const auto& f : cloud) {
    if (detect(monitor, f).value) ++flagged;
  }
  // Nearest-rank threshold with strict comparison: ~1% of training points,
  // exactly n - ceil(q n) in the absence of ties.
  CHECK(flagged == 10);
}

TEST_CASE("ood monitor basics") {
  std::mt19937_64 rng(17);
  const auto cloud = gaussian_cloud(200, 4, rng);
  const auto monitor = fit_ood(cloud, 0.99);

  // The training mean itself is distance zero.
  CHECK_FALSE(detect(monitor, FeatureVector(monitor.mean)).value);

  // A point 10 standardized units out along every axis is far past any
  // training distance.
  std::vector<double> far(4);
  for (std::size_t i = 0; i < far.size(); ++i) {
    far[i] = std::min(1.0, monitor.mean[i] + 10.0 * monitor.stddev[i]);
  }
  CHECK(monitor.distance(FeatureVector(far)) > monitor.threshold);
  CHECK(detect(monitor, FeatureVector(far)).value);

  CHECK(monitor.threshold > 0.0);
  for (double s : monitor.stddev) CHECK(s >= 1e-6);
}

TEST_CASE("ood fit argument validation") {
  std::mt19937_64 rng(19);
  CHECK_THROWS_AS(fit_ood(gaussian_cloud(10, 4, rng), 0.99), std::invalid_argument);
  CHECK_THROWS_AS(fit_ood(gaussian_cloud(100, 4, rng), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(fit_ood(gaussian_cloud(100, 4, rng), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(detect(fit_ood(gaussian_cloud(100, 4, rng), 0.99), FeatureVector({0.1})),
                  std::invalid_argument);
}

TEST_CASE("always-outlier monitor flags everything") {
  const auto m = OodMonitor::always_outlier(3);
  CHECK(detect(m, FeatureVector({0.0, 0.0, 0.0})).value);
  CHECK(detect(m, FeatureVector({0.5, 0.5, 0.5})).value);
}
