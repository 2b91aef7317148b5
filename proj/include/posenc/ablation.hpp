#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "posenc/training.hpp"

namespace posenc {

struct AblationRow {
  std::string label;    // table row label
  std::string variant;  // baseline | seu | seu+teu | full
  double accuracy = 0.0;
  std::size_t parameters = 0;
  std::vector<EpochRecord> log;
};

/// Row labels and variant names in table order; each row adds one module.
inline const std::vector<std::pair<std::string, std::string>>& ablation_rows() {
  static const std::vector<std::pair<std::string, std::string>> rows = {
      {"Baseline", "baseline"},
      {"+ SEU", "seu"},
      {"+ TEU", "seu+teu"},
      {"+ Multi-Head Self Attention", "full"},
  };
  return rows;
}

/// Trains every variant in order under the same config and seed. The
/// reported accuracy is the held-out accuracy after the last epoch.
inline std::vector<AblationRow> run_ablation(const data::Dataset& dataset, Branch branch, const ModelDims& dims,
                                             const TrainConfig& cfg,
                                             const std::function<void(const std::string&)>& on_line = {}) {
  std::vector<AblationRow> rows;
  for (const auto& [label, variant] : ablation_rows()) {
    TrainHooks hooks;
    if (on_line) hooks.on_line = [&](const std::string& l) { on_line("variant=" + variant + " " + l); };
    RunResult run = run_training(dataset, AblationConfig::variant(variant, branch), dims, cfg, hooks);
    rows.push_back({label, variant, run.train.final_eval.accuracy, run.model.params.parameter_count(), run.train.log});
  }
  return rows;
}

inline std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  std::string out = "| Method | Accuracy (%) |\n|---|---|\n";
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", r.accuracy);
    out += "| " + r.label + " | " + buf + " |\n";
  }
  return out;
}

}  // namespace posenc
