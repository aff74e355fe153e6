#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "assure/dbn.hpp"

namespace assure {

// Whole-model JSON document. Doubles serialize in shortest round-trip form,
// so load(save(m)) is value-identical and re-saving is byte-stable.

inline nlohmann::json model_to_json(const DbnModel& model) {
  model.validate();

  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.emission.trees()) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
      if (n.is_leaf()) {
        nodes.push_back({{"hist", n.histogram}});
      } else {
        nodes.push_back({{"f", n.feature}, {"thr", n.threshold}, {"l", n.left}, {"r", n.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }

  return nlohmann::json{
      {"format", "assure-dbn"},
      {"version", 1},
      {"step_duration", model.step_duration},
      {"training_envs", model.training_envs},
      {"partitions",
       {{"cte", model.cte_partition}, {"cte_e", model.cte_e_partition}, {"he", model.he_partition}}},
      {"transition",
       {{"cte_states", model.transition.cte_states()},
        {"cte_e_states", model.transition.cte_e_states()},
        {"he_states", model.transition.he_states()},
        {"rows", model.transition.flat()}}},
      {"emission",
       {{"num_states", model.emission.num_states()},
        {"feature_dim", model.emission.feature_dim()},
        {"config",
         {{"trees", model.emission.config().trees},
          {"min_leaf", model.emission.config().min_leaf},
          {"samples_per_tree", model.emission.config().samples_per_tree},
          {"seed", model.emission.config().seed}}},
        {"trees", std::move(trees)}}},
      {"ood",
       {{"mean", model.ood.mean},
        {"stddev", model.ood.stddev},
        {"threshold", model.ood.threshold},
        {"method", model.ood.method},
        {"quantile", model.ood.quantile}}},
  };
}

inline DbnModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "assure-dbn") {
    throw std::runtime_error("model_from_json: not an assure-dbn document");
  }
  if (j.value("version", 0) != 1) {
    throw std::runtime_error("model_from_json: unsupported model version");
  }

  const auto& tj = j.at("transition");
  TransitionCPT transition(tj.at("cte_states").get<std::size_t>(),
                           tj.at("cte_e_states").get<std::size_t>(),
                           tj.at("he_states").get<std::size_t>(),
                           tj.at("rows").get<std::vector<double>>());

  const auto& ej = j.at("emission");
  ForestConfig config;
  config.trees = ej.at("config").at("trees").get<std::size_t>();
  config.min_leaf = ej.at("config").at("min_leaf").get<std::size_t>();
  config.samples_per_tree = ej.at("config").at("samples_per_tree").get<std::size_t>();
  config.seed = ej.at("config").at("seed").get<std::uint64_t>();
  std::vector<DecisionTree> trees;
  trees.reserve(ej.at("trees").size());
  for (const auto& t : ej.at("trees")) {
    std::vector<TreeNode> nodes;
    nodes.reserve(t.at("nodes").size());
    for (const auto& n : t.at("nodes")) {
      TreeNode node;
      if (n.contains("hist")) {
        node.histogram = n.at("hist").get<std::vector<std::uint32_t>>();
      } else {
        node.feature = n.at("f").get<int>();
        node.threshold = n.at("thr").get<double>();
        node.left = n.at("l").get<int>();
        node.right = n.at("r").get<int>();
      }
      nodes.push_back(std::move(node));
    }
    trees.emplace_back(std::move(nodes));
  }
  EmissionForest emission(std::move(trees), ej.at("num_states").get<std::size_t>(),
                          ej.at("feature_dim").get<std::size_t>(), config);

  const auto& oj = j.at("ood");
  OodMonitor ood;
  ood.mean = oj.at("mean").get<std::vector<double>>();
  ood.stddev = oj.at("stddev").get<std::vector<double>>();
  ood.threshold = oj.at("threshold").get<double>();
  ood.method = oj.at("method").get<std::string>();
  ood.quantile = oj.at("quantile").get<double>();

  DbnModel model{
      j.at("partitions").at("cte").get<IntervalPartition>(),
      j.at("partitions").at("cte_e").get<IntervalPartition>(),
      j.at("partitions").at("he").get<IntervalPartition>(),
      std::move(transition),
      std::move(emission),
      std::move(ood),
      j.at("step_duration").get<double>(),
      j.at("training_envs").get<std::vector<std::string>>(),
  };
  model.validate();
  return model;
}

inline void save_model(const DbnModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << model_to_json(model).dump(2) << "\n";
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

inline DbnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return model_from_json(j);
}

}  // namespace assure
