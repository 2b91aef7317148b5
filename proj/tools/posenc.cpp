// posenc: generate data, train, evaluate, ablate, gradient-check, inspect.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error. Diagnostics go
// to stderr; results go to stdout.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "posenc/posenc.hpp"

using namespace posenc;

namespace {

std::vector<ConfigEntry> load_entries(const std::string& path) {
  if (path.empty()) return {};
  return read_config_file(path);
}

RunConfig run_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig rc = run_config_from(load_entries(path));
  if (seed) rc.train.seed = *seed;
  return rc;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out, std::optional<std::uint64_t> seed) {
  const auto entries = load_entries(spec_path);
  require_sections(entries, {"synthetic", "train", "model"});
  data::SyntheticSpec spec;
  apply_section(fields_of(spec), "synthetic", entries);
  if (seed) spec.seed = *seed;
  const data::Dataset d = data::from_synthetic(data::generate_synthetic(spec));
  const std::size_t files = data::write_dataset(out, d);
  std::cout << "wrote " << files << " files (" << d.size() << " samples, " << d.num_classes() << " classes) to " << out
            << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& variant, const std::string& branch,
              const std::string& config, const std::string& out, std::string log_path,
              std::optional<std::uint64_t> seed) {
  const RunConfig rc = run_config(config, seed);
  const AblationConfig ablation = AblationConfig::variant(variant, parse_branch(branch));
  const data::Dataset d = data::load_directory(data_dir);
  if (log_path.empty()) log_path = out + ".log";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw data::IoError("cannot open log file '" + log_path + "'");
  TrainHooks hooks;
  hooks.on_line = [&](const std::string& line) {
    std::cout << line << "\n" << std::flush;
    log << line << "\n" << std::flush;
  };
  const RunResult run = run_training(d, ablation, rc.model, rc.train, hooks);
  save_run_checkpoints(out, run);
  // Round-trip the written checkpoint before reporting success.
  const Checkpoint back = load_checkpoint(out);
  for (const auto& [name, t] : run.model.params.entries()) {
    const auto a = t.values(), b = back.model.params.at(name).values();
    if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) throw ContractError("checkpoint round trip mismatch: " + name);
  }
  char summary[200];
  std::snprintf(summary, sizeof summary, "final variant=%s branch=%s test_accuracy=%.2f best_epoch=%zu seconds=%.1f",
                variant.c_str(), branch.c_str(), run.train.final_eval.accuracy, run.train.best_epoch, run.train.seconds);
  hooks.on_line(summary);
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& checkpoint, const std::string& split,
             const std::string& config, std::optional<std::uint64_t> seed) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  data::Dataset d = data::load_directory(data_dir);
  if (split != "all") {
    const RunConfig rc = run_config(config, seed);
    auto [train_part, test_part] = data::stratified_split(d, rc.train.test_fraction, rc.train.seed);
    d = split == "train" ? train_part : test_part;
  }
  const EvalResult r = evaluate(ck.model, d);
  std::printf("examples=%zu correct=%zu accuracy=%.2f loss=%.6f\n", r.total, r.correct, r.accuracy, r.mean_loss);
  std::printf("confusion (rows: true class, columns: predicted)\n");
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    std::printf("%3zu |", i);
    for (std::size_t v : r.confusion[i]) std::printf(" %5zu", v);
    std::printf("\n");
  }
  return 0;
}

int cmd_ablate(const std::string& data_dir, const std::string& branch, const std::string& config,
               const std::string& out, bool verbose, std::optional<std::uint64_t> seed) {
  const RunConfig rc = run_config(config, seed);
  const data::Dataset d = data::load_directory(data_dir);
  std::function<void(const std::string&)> on_line;
  if (verbose) on_line = [](const std::string& l) { std::cerr << l << "\n"; };
  const auto rows = run_ablation(d, parse_branch(branch), rc.model, rc.train, on_line);
  const std::string table = ablation_markdown(rows);
  std::cout << table;
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    if (!(f << table)) throw data::IoError("cannot write '" + out + "'");
  }
  return 0;
}

int cmd_gradcheck(const std::string& scope, std::uint64_t seed) {
  const GradcheckSummary s = run_gradcheck(parse_grad_scope(scope), seed);
  for (const auto& e : s.entries) {
    std::printf("%-4s %-28s %-40s coords=%-5zu max_rel_error=%.3e\n", e.passed() ? "ok" : "FAIL", e.component.c_str(),
                e.report.name.c_str(), e.report.coordinates, e.report.max_rel_error);
  }
  std::printf("scope=%s entries=%zu max_rel_error=%.3e seconds=%.2f\n", scope.c_str(), s.entries.size(), s.max_error(),
              s.seconds);
  for (const auto& e : s.entries) {
    if (!e.passed()) {
      std::fprintf(stderr, "gradcheck failed: %s / %s relative error %.3e (index %zu, analytic %.6e, numeric %.6e)\n",
                   e.component.c_str(), e.report.name.c_str(), e.report.max_rel_error, e.report.worst_index,
                   e.report.worst_analytic, e.report.worst_numeric);
    }
  }
  return s.passed() ? 0 : 1;
}

void print_parameter_groups(const Model& m) {
  std::map<std::string, std::size_t> groups;
  for (const auto& [name, t] : m.params.entries()) {
    const auto a = name.find('.');
    const auto b = a == std::string::npos ? a : name.find('.', a + 1);
    groups[name.substr(0, b)] += t.size();
  }
  for (const auto& [g, n] : groups) std::printf("group %-24s %zu\n", g.c_str(), n);
  for (const auto& [name, t] : m.params.entries()) {
    std::printf("tensor %-44s %-16s %zu\n", name.c_str(), shape_string(t.shape()).c_str(), t.size());
  }
  std::printf("tensors=%zu parameters=%zu\n", m.params.tensor_count(), m.params.parameter_count());
}

int cmd_inspect(const std::string& checkpoint, const std::string& variant, const std::string& branch,
                const std::string& config, std::optional<std::uint64_t> seed) {
  if (!checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    std::printf("%s", checkpoint_manifest(ck.model, ck.extras).c_str());
    print_parameter_groups(ck.model);
    return 0;
  }
  const RunConfig rc = run_config(config, seed);
  const Model m = build_variant(AblationConfig::variant(variant, parse_branch(branch)), rc.model, rc.train.seed);
  std::printf("variant=%s branch=%s\n", variant.c_str(), branch.c_str());
  print_parameter_groups(m);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pose/RGB action recognition: data generation, training, evaluation and verification"};
  app.require_subcommand(1, 1);

  std::string data_dir, out, config, spec, variant = "full", branch = "pose", checkpoint, log_path, scope = "model",
                                       split = "all";
  std::optional<std::uint64_t> seed;
  bool verbose = false;

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic SKL1/FTR1 dataset and manifest");
  gen->add_option("--spec", spec, "Config file with synthetic.* keys")->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Generator seed (overrides synthetic.seed)");

  auto* train = app.add_subcommand("train", "Train one model variant");
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--variant", variant, "baseline | seu | seu+teu | full")
      ->check(CLI::IsMember({"baseline", "seu", "seu+teu", "full"}));
  train->add_option("--branch", branch, "pose | rgb | both")->check(CLI::IsMember({"pose", "rgb", "both"}));
  train->add_option("--config", config, "Config file (train.* and model.* keys)")->check(CLI::ExistingFile);
  train->add_option("--out", out, "Checkpoint path; <out>.best and <out>.log are written alongside")->required();
  train->add_option("--log", log_path, "Training log path (default <out>.log)");
  train->add_option("--seed", seed, "Seed (overrides train.seed)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--data", data_dir, "Dataset directory")->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--split", split, "all | train | test (train/test reproduce the training split)")
      ->check(CLI::IsMember({"all", "train", "test"}));
  eval->add_option("--config", config, "Config file used for training (for --split)")->check(CLI::ExistingFile);
  eval->add_option("--seed", seed, "Seed used for training (for --split)");

  auto* ablate = app.add_subcommand("ablate", "Train baseline, +SEU, +TEU and +attention variants; print a table");
  ablate->add_option("--data", data_dir, "Dataset directory")->required();
  ablate->add_option("--branch", branch, "pose | rgb | both")->check(CLI::IsMember({"pose", "rgb", "both"}));
  ablate->add_option("--config", config, "Config file (train.* and model.* keys)")->check(CLI::ExistingFile);
  ablate->add_option("--out", out, "Also write the table to this file");
  ablate->add_option("--seed", seed, "Seed (overrides train.seed)");
  ablate->add_flag("--verbose", verbose, "Stream per-epoch logs to stderr");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  grad->add_option("--scope", scope, "op | module | model")->check(CLI::IsMember({"op", "module", "model"}));
  grad->add_option("--seed", seed, "Seed for random inputs and parameters");

  auto* inspect = app.add_subcommand("inspect", "Print a checkpoint manifest or a variant's parameter groups");
  inspect->add_option("--checkpoint", checkpoint, "Checkpoint file");
  inspect->add_option("--variant", variant, "Variant to build when no checkpoint is given")
      ->check(CLI::IsMember({"baseline", "seu", "seu+teu", "full"}));
  inspect->add_option("--branch", branch, "pose | rgb | both")->check(CLI::IsMember({"pose", "rgb", "both"}));
  inspect->add_option("--config", config, "Config file (model.* keys)")->check(CLI::ExistingFile);
  inspect->add_option("--seed", seed, "Initialization seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(spec, out, seed);
    if (*train) return cmd_train(data_dir, variant, branch, config, out, log_path, seed);
    if (*eval) return cmd_eval(data_dir, checkpoint, split, config, seed);
    if (*ablate) return cmd_ablate(data_dir, branch, config, out, verbose, seed);
    if (*grad) return cmd_gradcheck(scope, seed.value_or(1));
    if (*inspect) return cmd_inspect(checkpoint, variant, branch, config, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
