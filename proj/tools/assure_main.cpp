// assure: generate surrogate taxiing data, train the runtime-assurance
// model, run monitored missions, and score the monitor against held-out
// environments.

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "assure/assure.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int log_level() {
  static const int level = [] {
    const char* v = std::getenv("ASSURE_LOG");
    if (v == nullptr || *v == '\0') return 1;
    return std::atoi(v);
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[assure] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[assure:debug] " << msg << "\n";
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> out;
  if (rc == 0) {
    out.assign(g.gl_pathv, g.gl_pathv + g.gl_pathc);
  }
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) {
    throw std::runtime_error("glob failed for pattern: " + pattern);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Written before any command output; re-running with the recorded seeds
// reproduces the outputs bit for bit.
void write_manifest(const fs::path& path, const std::string& command, const json& inputs,
                    const json& params, const std::vector<std::string>& outputs) {
  json m{
      {"tool", "assure"},
      {"version", ASSURE_VERSION},
      {"command", command},
      {"created", timestamp_utc()},
      {"inputs", inputs},
      {"params", params},
      {"outputs", outputs},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << m.dump(2) << "\n";
}

std::vector<assure::Trajectory> load_trajectories(const std::string& pattern) {
  const auto files = expand_glob(pattern);
  if (files.empty()) {
    throw std::runtime_error("no trajectory files match '" + pattern + "'");
  }
  std::vector<assure::Trajectory> out;
  out.reserve(files.size());
  for (const auto& f : files) {
    log_debug("loading " + f);
    out.push_back(assure::load_trajectory_csv(f));
  }
  return out;
}

// --- generate -------------------------------------------------------------

struct GenerateArgs {
  std::string env_path;
  std::size_t missions = 10;
  std::size_t steps = 0;  // 0: use the env file's value
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_generate(const GenerateArgs& args) {
  const auto file = assure::sim::load_env_file(args.env_path);
  const assure::sim::FeatureEmbedding embedding(file.feature_dim, file.embedding_seed);
  fs::create_directories(args.out_dir);

  std::vector<std::string> outputs;
  for (std::size_t m = 0; m < args.missions; ++m) {
    const auto& env = file.environments[m % file.environments.size()];
    char name[128];
    std::snprintf(name, sizeof(name), "traj_m%03zu_%s.csv", m, env.name.c_str());
    outputs.emplace_back(name);
  }
  write_manifest(fs::path(args.out_dir) / "manifest.json", "generate",
                 {{"env", args.env_path}},
                 {{"missions", args.missions}, {"steps", args.steps}, {"seed", args.seed}},
                 outputs);

  for (std::size_t m = 0; m < args.missions; ++m) {
    const auto& env = file.environments[m % file.environments.size()];
    auto cfg = assure::sim::make_mission_config(file, env, args.seed, m);
    if (args.steps > 0) cfg.duration = args.steps;
    const auto traj = assure::sim::run_mission(cfg, embedding);
    assure::save_trajectory_csv(traj, (fs::path(args.out_dir) / outputs[m]).string());
    log_debug("wrote " + outputs[m]);
  }
  log_info("generated " + std::to_string(args.missions) + " missions into " + args.out_dir);
  return 0;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data_glob;
  std::string out_path;
  std::size_t trees = 280;
  std::size_t min_leaf = 10;
  std::size_t samples_per_tree = 100;
  double alpha = 2.0;
  double ood_quantile = 0.99;
  std::uint64_t seed = 0;
  double offset = 2.0;
  int inner_states = 7;
  double half_width = 10.0;
  double he_inner = 30.0;
  int he_states = 7;
  double he_outer = 90.0;
  double step_duration = 0.33;
};

double oob_accuracy(const std::vector<assure::TrainingSample>& samples,
                    const assure::EmissionForest& forest,
                    const std::vector<std::vector<std::size_t>>& bags) {
  const std::size_t n = samples.size();
  std::vector<std::vector<bool>> in_bag(bags.size(), std::vector<bool>(n, false));
  for (std::size_t t = 0; t < bags.size(); ++t) {
    for (std::size_t i : bags[t]) in_bag[t][i] = true;
  }
  std::size_t scored = 0, correct = 0;
  const std::size_t k = forest.num_states();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> acc(k, 0.0);
    std::size_t trees_used = 0;
    for (std::size_t t = 0; t < bags.size(); ++t) {
      if (in_bag[t][i]) continue;
      const auto& hist = forest.trees()[t].leaf_counts(samples[i].features);
      std::uint64_t leaf_n = 0;
      for (auto c : hist) leaf_n += c;
      for (std::size_t s = 0; s < k; ++s) {
        acc[s] += (static_cast<double>(hist[s]) + 1.0) /
                  (static_cast<double>(leaf_n) + static_cast<double>(k));
      }
      ++trees_used;
    }
    if (trees_used == 0) continue;
    ++scored;
    const auto arg = static_cast<std::size_t>(
        std::max_element(acc.begin(), acc.end()) - acc.begin());
    if (arg == samples[i].state) ++correct;
  }
  return scored == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(scored);
}

int cmd_train(const TrainArgs& args) {
  const auto trajectories = load_trajectories(args.data_glob);

  write_manifest(fs::path(args.out_path).string() + ".manifest.json", "train",
                 {{"data", args.data_glob}},
                 {{"trees", args.trees},
                  {"min_leaf", args.min_leaf},
                  {"samples_per_tree", args.samples_per_tree},
                  {"alpha", args.alpha},
                  {"ood_quantile", args.ood_quantile},
                  {"seed", args.seed},
                  {"offset", args.offset},
                  {"inner_states", args.inner_states},
                  {"half_width", args.half_width},
                  {"he_inner", args.he_inner},
                  {"he_states", args.he_states},
                  {"he_outer", args.he_outer},
                  {"step_duration", args.step_duration}},
                 {fs::path(args.out_path).filename().string()});

  const auto cte = assure::make_cte_partition(args.offset, args.inner_states, args.half_width);
  const auto he = assure::make_he_partition(args.he_inner, args.he_states, args.he_outer);

  assure::TransitionFitStats tstats;
  auto transition = assure::fit_transition(trajectories, cte, cte, he, args.alpha, &tstats);

  std::vector<assure::TrainingSample> samples;
  std::vector<assure::FeatureVector> features;
  std::set<std::string> envs;
  for (const auto& traj : trajectories) {
    for (const auto& f : traj.frames) {
      samples.push_back({f.features, cte.locate_clamped(f.cte_true)});
      features.push_back(f.features);
      envs.insert(f.env);
    }
  }

  auto balance_rng = assure::substream(args.seed, "balance");
  const auto balanced = assure::stratified_balance(samples, cte.num_states(), balance_rng);
  log_debug("balanced emission training set: " + std::to_string(samples.size()) + " -> " +
            std::to_string(balanced.size()) + " samples");

  assure::ForestConfig fcfg;
  fcfg.trees = args.trees;
  fcfg.min_leaf = args.min_leaf;
  fcfg.samples_per_tree = args.samples_per_tree;
  fcfg.seed = args.seed;
  std::vector<std::vector<std::size_t>> bags;
  auto forest = assure::fit_forest(balanced, cte.num_states(), fcfg, &bags);
  const double oob = oob_accuracy(balanced, forest, bags);

  auto ood = assure::fit_ood(features, args.ood_quantile);

  assure::DbnModel model{cte,
                         cte,
                         he,
                         std::move(transition),
                         std::move(forest),
                         std::move(ood),
                         args.step_duration,
                         std::vector<std::string>(envs.begin(), envs.end())};
  assure::save_model(model, args.out_path);

  std::printf("trained model: %s\n", args.out_path.c_str());
  std::printf("  trajectories:        %zu (%zu frames)\n", trajectories.size(), samples.size());
  std::printf("  transition rows:     %zu visited of %zu (%zu transitions)\n",
              tstats.visited_configs, model.transition.num_parent_configs(), tstats.transitions);
  std::printf("  forest:              %zu trees, min leaf %zu, %zu samples/tree\n", args.trees,
              args.min_leaf, args.samples_per_tree);
  std::printf("  forest OOB accuracy: %.3f\n", oob);
  std::printf("  OOD threshold:       %.4f (quantile %.3f)\n", model.ood.threshold,
              args.ood_quantile);
  return 0;
}

// --- run ------------------------------------------------------------------

struct RunArgs {
  std::string model_path;
  std::string env_path;
  std::string env_name;  // empty: first environment in the file
  std::vector<double> offsets{2.0, 1.43};
  std::size_t horizon = 6;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string surface_format = "json";
};

int cmd_run(const RunArgs& args) {
  const auto model = assure::load_model(args.model_path);
  const auto file = assure::sim::load_env_file(args.env_path);
  if (file.feature_dim != model.feature_dim()) {
    throw std::runtime_error("env feature_dim " + std::to_string(file.feature_dim) +
                             " does not match model feature_dim " +
                             std::to_string(model.feature_dim()));
  }
  const auto& env = args.env_name.empty() ? file.environments.front() : file.by_name(args.env_name);
  const assure::sim::FeatureEmbedding embedding(file.feature_dim, file.embedding_seed);

  fs::create_directories(args.out_dir);
  const std::string surface_name =
      args.surface_format == "csv" ? "surface.csv" : "surface.json";
  write_manifest(fs::path(args.out_dir) / "manifest.json", "run",
                 {{"model", args.model_path}, {"env", args.env_path}},
                 {{"env_name", env.name},
                  {"offsets", args.offsets},
                  {"horizon", args.horizon},
                  {"steps", args.steps},
                  {"seed", args.seed}},
                 {"trajectory.csv", "reports.jsonl", surface_name});

  auto cfg = assure::sim::make_mission_config(file, env, args.seed, 0);
  if (args.steps > 0) cfg.duration = args.steps;
  const auto traj = assure::sim::run_mission(cfg, embedding);
  assure::save_trajectory_csv(traj, (fs::path(args.out_dir) / "trajectory.csv").string());

  assure::AssuranceConfig acfg;
  acfg.offsets = args.offsets;
  acfg.horizon = args.horizon;
  assure::AssuranceSession session(model, acfg);

  std::ofstream reports_out(fs::path(args.out_dir) / "reports.jsonl", std::ios::binary);
  if (!reports_out) throw std::runtime_error("cannot write reports.jsonl");
  std::vector<assure::AssuranceReport> reports;
  reports.reserve(traj.frames.size());
  std::size_t ood_frames = 0, stops = 0, slows = 0;
  for (const auto& frame : traj.frames) {
    assure::EvidenceFrame ev{frame.features, frame.cte_e, frame.he_e, frame.t};
    auto report = session.step(ev);
    ood_frames += report.ood ? 1 : 0;
    stops += report.action == assure::Action::kStop ? 1 : 0;
    slows += report.action == assure::Action::kSlow ? 1 : 0;
    reports_out << assure::report_to_json(report).dump() << "\n";
    reports.push_back(std::move(report));
  }
  reports_out.close();

  assure::eval::surface_export(reports, traj, model.cte_partition,
                               (fs::path(args.out_dir) / surface_name).string(),
                               args.surface_format == "csv"
                                   ? assure::eval::SurfaceFormat::kCsv
                                   : assure::eval::SurfaceFormat::kJson);

  std::printf("mission %s: %zu frames, %zu ood, %zu slow, %zu stop\n", env.name.c_str(),
              traj.frames.size(), ood_frames, slows, stops);
  std::printf("final Pr(assured): %.4f\n", reports.back().measures[0]);
  if (session.stats().zero_product_fallbacks > 0) {
    log_info("zero-product fallbacks: " +
             std::to_string(session.stats().zero_product_fallbacks));
  }
  return stops > 0 ? 2 : 0;  // exit code reflects whether a stop was issued
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string model_path;
  std::string data_glob;
  double offset = 2.0;
  std::string out_path;
  bool allow_env_overlap = false;
};

int cmd_eval(const EvalArgs& args) {
  const auto model = assure::load_model(args.model_path);
  const auto trajectories = load_trajectories(args.data_glob);

  std::map<std::string, std::vector<assure::Trajectory>> by_env;
  for (const auto& traj : trajectories) {
    for (const auto& f : traj.frames) {
      if (f.env != traj.frames[0].env) {
        throw std::runtime_error("trajectory mixes environment tags");
      }
    }
    by_env[traj.frames[0].env].push_back(traj);
  }
  for (const auto& [env, trajs] : by_env) {
    const auto& seen = model.training_envs;
    if (std::find(seen.begin(), seen.end(), env) != seen.end()) {
      if (!args.allow_env_overlap) {
        throw std::runtime_error("test environment '" + env +
                                 "' overlaps the model's training environments "
                                 "(pass --allow-env-overlap to proceed)");
      }
      log_info("environment-overlap check overridden for '" + env + "'");
    }
  }

  write_manifest(fs::path(args.out_path).string() + ".manifest.json", "eval",
                 {{"model", args.model_path}, {"data", args.data_glob}},
                 {{"offset", args.offset}, {"allow_env_overlap", args.allow_env_overlap}},
                 {fs::path(args.out_path).filename().string()});

  const auto rows = assure::eval::evaluate(model, by_env, args.offset, args.allow_env_overlap);
  assure::eval::write_eval_csv(rows, args.out_path);

  std::printf("%-24s %-6s %11s %11s %9s\n", "env", "subject", "sensitivity", "specificity",
              "n_frames");
  for (const auto& r : rows) {
    std::printf("%-24s %-6s %11s %11s %9llu\n", r.environment.c_str(), r.subject.c_str(),
                r.sensitivity ? std::to_string(*r.sensitivity).substr(0, 6).c_str() : "-",
                r.specificity ? std::to_string(*r.specificity).substr(0, 6).c_str() : "-",
                static_cast<unsigned long long>(r.n_frames));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runtime assurance quantification for autonomous taxiing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ASSURE_VERSION);

  GenerateArgs gen;
  auto* sgen = app.add_subcommand("generate", "Simulate taxi missions and write trajectory CSVs");
  sgen->add_option("--env", gen.env_path, "Environment config JSON")->required();
  sgen->add_option("--missions", gen.missions, "Number of missions");
  sgen->add_option("--steps", gen.steps, "Steps per mission (0: env file value)");
  sgen->add_option("--seed", gen.seed, "Master seed");
  sgen->add_option("--out", gen.out_dir, "Output directory")->required();

  TrainArgs train;
  auto* strain = app.add_subcommand("train", "Fit transition, emission and OOD models");
  strain->add_option("--data", train.data_glob, "Trajectory CSV glob")->required();
  strain->add_option("--out", train.out_path, "Output model JSON path")->required();
  strain->add_option("--trees", train.trees, "Decision trees in the emission forest");
  strain->add_option("--min-leaf", train.min_leaf, "Minimum terminal node size");
  strain->add_option("--samples-per-tree", train.samples_per_tree, "Bootstrap draws per tree");
  strain->add_option("--alpha", train.alpha, "Dirichlet prior for the transition MAP fit");
  strain->add_option("--ood-quantile", train.ood_quantile, "Training-distance quantile for D");
  strain->add_option("--seed", train.seed, "Master seed");
  strain->add_option("--offset", train.offset, "Assurance offset bounding the inner states, m");
  strain->add_option("--inner-states", train.inner_states, "Inner cte states (odd)");
  strain->add_option("--half-width", train.half_width, "Runway half-width, m");
  strain->add_option("--he-inner", train.he_inner, "Inner heading-error bound, deg");
  strain->add_option("--he-states", train.he_states, "Inner heading-error states (odd)");
  strain->add_option("--he-outer", train.he_outer, "Outer heading-error bound, deg");
  strain->add_option("--step-duration", train.step_duration, "Model step duration, s");

  RunArgs run;
  auto* srun = app.add_subcommand("run", "Run one monitored mission");
  srun->add_option("--model", run.model_path, "Model JSON")->required();
  srun->add_option("--env", run.env_path, "Environment config JSON")->required();
  srun->add_option("--env-name", run.env_name, "Environment to use (default: first)");
  srun->add_option("--offsets", run.offsets, "Assurance offsets, m")->delimiter(',');
  srun->add_option("--horizon", run.horizon, "Forecast lookahead steps");
  srun->add_option("--steps", run.steps, "Mission steps (0: env file value)");
  srun->add_option("--seed", run.seed, "Master seed");
  srun->add_option("--out", run.out_dir, "Output directory")->required();
  srun->add_option("--surface-format", run.surface_format, "surface export: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));

  EvalArgs ev;
  auto* seval = app.add_subcommand("eval", "Score the monitor and the raw estimate per env");
  seval->add_option("--model", ev.model_path, "Model JSON")->required();
  seval->add_option("--data", ev.data_glob, "Test trajectory CSV glob")->required();
  seval->add_option("--offset", ev.offset, "Assurance offset, m");
  seval->add_option("--out", ev.out_path, "Output CSV path")->required();
  seval->add_flag("--allow-env-overlap", ev.allow_env_overlap,
                  "Permit test environments seen in training (logged)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sgen->parsed()) return cmd_generate(gen);
    if (strain->parsed()) return cmd_train(train);
    if (srun->parsed()) return cmd_run(run);
    if (seval->parsed()) return cmd_eval(ev);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
