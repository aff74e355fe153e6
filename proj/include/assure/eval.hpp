#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "assure/assurance.hpp"
#include "assure/dbn.hpp"
#include "assure/trajectory.hpp"

namespace assure::eval {

// Validation harness: sensitivity/specificity of the monitor against the
// raw perception estimate, per test environment, plus the probability
// surface export used for visual inspection.

struct ConfusionCounts {
  std::string subject;      // "dbn" or "les"
  std::string environment;
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }

  void add(bool predicted, bool truth) {
    if (predicted && truth) ++tp;
    else if (predicted && !truth) ++fp;
    else if (!predicted && !truth) ++tn;
    else ++fn;
  }

  // Undefined ratios stay absent rather than defaulting to 0 or 1.
  std::optional<double> sensitivity() const {
    if (tp + fn == 0) return std::nullopt;
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  std::optional<double> specificity() const {
    if (tn + fp == 0) return std::nullopt;
    return static_cast<double>(tn) / static_cast<double>(tn + fp);
  }
};

struct FrameClassification {
  bool dbn_pred = false;  // monitor claims the property holds now
  bool les_pred = false;  // raw estimate claims the property holds now
  bool truth = false;     // ground truth: |cte_true| < offset
};

/// Positive class = "within offset". The monitor's call is its sufficiency
/// verdict at t=0; the raw system's call is the estimate compared to the
/// offset directly.
inline FrameClassification classify_frame(const AssuranceReport& report, double cte_e,
                                          double cte_true, double offset) {
  if (report.assured.empty()) {
    throw std::invalid_argument("classify_frame: report carries no verdicts");
  }
  FrameClassification c;
  c.truth = std::abs(cte_true) < offset;
  c.dbn_pred = report.assured[0];
  c.les_pred = std::abs(cte_e) < offset;
  return c;
}

struct EvalRow {
  std::string environment;
  std::string subject;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::uint64_t n_frames = 0;
};

/// Replay test trajectories through a fresh session each and score both
/// subjects per environment. Test environments must be unseen during
/// training unless explicitly overridden.
inline std::vector<EvalRow> evaluate(const DbnModel& model,
                                     const std::map<std::string, std::vector<Trajectory>>& by_env,
                                     double offset, bool allow_env_overlap = false) {
  if (by_env.empty()) throw std::invalid_argument("evaluate: no test trajectories");
  for (const auto& [env, trajs] : by_env) {
    if (trajs.empty()) throw std::invalid_argument("evaluate: empty group for " + env);
    if (!allow_env_overlap &&
        std::find(model.training_envs.begin(), model.training_envs.end(), env) !=
            model.training_envs.end()) {
      throw std::runtime_error("evaluate: test environment '" + env +
                               "' overlaps the model's training environments");
    }
  }

  AssuranceConfig cfg;
  cfg.offsets = {offset};
  cfg.horizon = 1;  // only the t=0 verdict feeds the classification

  std::vector<EvalRow> rows;
  for (const auto& [env, trajs] : by_env) {
    ConfusionCounts dbn{"dbn", env};
    ConfusionCounts les{"les", env};
    for (const auto& traj : trajs) {
      AssuranceSession session(model, cfg);
      for (const auto& frame : traj.frames) {
        EvidenceFrame ev{frame.features, frame.cte_e, frame.he_e, frame.t};
        const AssuranceReport report = session.step(ev);
        const FrameClassification c = classify_frame(report, frame.cte_e, frame.cte_true, offset);
        dbn.add(c.dbn_pred, c.truth);
        les.add(c.les_pred, c.truth);
      }
    }
    rows.push_back({env, "dbn", dbn.sensitivity(), dbn.specificity(), dbn.total()});
    rows.push_back({env, "les", les.sensitivity(), les.specificity(), les.total()});
  }
  return rows;
}

inline void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_eval_csv: cannot open " + path);
  out << "env,subject,sensitivity,specificity,n_frames\n";
  for (const auto& r : rows) {
    out << r.environment << ',' << r.subject << ',';
    if (r.sensitivity) out << assure::detail::format_double(*r.sensitivity);
    out << ',';
    if (r.specificity) out << assure::detail::format_double(*r.specificity);
    out << ',' << r.n_frames << "\n";
  }
  if (!out) throw std::runtime_error("write_eval_csv: write failed for " + path);
}

enum class SurfaceFormat { kCsv, kJson };

/// Per frame, a (horizon+1) x num_states grid of belief mass: row 0 is the
/// filtered belief, rows 1..H the forecasts. Ground-truth and estimated cte
/// ride along for overlays.
inline void surface_export(const std::vector<AssuranceReport>& reports, const Trajectory& traj,
                           const IntervalPartition& partition, const std::string& path,
                           SurfaceFormat format) {
  if (reports.empty()) throw std::invalid_argument("surface_export: no reports");
  if (reports.size() != traj.frames.size()) {
    throw std::invalid_argument("surface_export: reports and trajectory differ in length");
  }
  const std::size_t k = partition.num_states();

  if (format == SurfaceFormat::kJson) {
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto& r = reports[i];
      nlohmann::json grid = nlohmann::json::array();
      grid.push_back(r.belief.probabilities());
      for (const auto& fb : r.forecast_beliefs) grid.push_back(fb.probabilities());
      frames.push_back({{"t", r.t},
                        {"cte_true", traj.frames[i].cte_true},
                        {"cte_e", traj.frames[i].cte_e},
                        {"grid", grid}});
    }
    nlohmann::json doc{{"num_states", k},
                       {"boundaries", partition.boundaries()},
                       {"frames", frames}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("surface_export: cannot open " + path);
    out << doc.dump(2) << "\n";
    return;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("surface_export: cannot open " + path);
  out << "frame,row,cte_true,cte_e";
  for (std::size_t s = 0; s < k; ++s) out << ",p" << s;
  out << "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const auto emit_row = [&](std::size_t row, const std::vector<double>& p) {
      out << r.t << ',' << row << ',' << assure::detail::format_double(traj.frames[i].cte_true)
          << ',' << assure::detail::format_double(traj.frames[i].cte_e);
      for (double v : p) out << ',' << assure::detail::format_double(v);
      out << "\n";
    };
    emit_row(0, r.belief.probabilities());
    for (std::size_t fr = 0; fr < r.forecast_beliefs.size(); ++fr) {
      emit_row(fr + 1, r.forecast_beliefs[fr].probabilities());
    }
  }
  if (!out) throw std::runtime_error("surface_export: write failed for " + path);
}

}  // namespace assure::eval
