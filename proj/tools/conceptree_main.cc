// Command-line driver for the staged concept-tree pipeline:
//   synth -> preprocess -> train-bank -> extract -> tree | sweep

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "conceptree/array_io.h"
#include "conceptree/pipeline.h"
#include "conceptree/status.h"

namespace {

namespace fs = std::filesystem;
using namespace conceptree;

struct Flags {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<size_t> k;
  std::optional<double> lambda;
  std::optional<std::string> max_depth;
  std::optional<size_t> min_samples_split;
  std::optional<std::string> depths;
  std::string out;
};

void AddCommonFlags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "JSON config file (flags override it)");
  cmd->add_option("--seed", flags.seed, "Random seed");
  cmd->add_option("--out", flags.out, "Output directory")->required();
}

RunConfig ResolveConfig(const Flags& flags) {
  RunConfig config;
  if (!flags.config.empty()) config = RunConfigFromJson(ReadFileBytes(flags.config));
  if (flags.seed) config.SetSeed(*flags.seed);
  if (flags.k) config.pca_dim = *flags.k;
  if (flags.lambda) config.bank.lambda_threshold = *flags.lambda;
  if (flags.max_depth) config.tree.max_depth = ParseDepth(*flags.max_depth);
  if (flags.min_samples_split) config.tree.min_samples_split = *flags.min_samples_split;
  if (flags.depths) config.depths = ParseDepthList(*flags.depths);
  return config;
}

std::string Fraction(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distill a CNN's predictions into a concept decision tree"};
  app.require_subcommand(1);
  Flags flags;

  auto* synth = app.add_subcommand("synth", "Generate a planted-concept dataset");
  AddCommonFlags(synth, flags);

  std::string probe_manifest;
  auto* preprocess =
      app.add_subcommand("preprocess", "Spatial-average and PCA-reduce probe activations");
  preprocess->add_option("probe", probe_manifest, "Probe manifest")->required();
  preprocess->add_option("--k", flags.k, "PCA output dimension (default 64)");
  AddCommonFlags(preprocess, flags);

  auto* train_bank = app.add_subcommand("train-bank", "Train and filter concept classifiers");
  train_bank->add_option("probe", probe_manifest, "Reduced probe manifest")->required();
  train_bank->add_option("--lambda", flags.lambda, "Validation accuracy threshold");
  AddCommonFlags(train_bank, flags);

  std::string bank_json, task_manifest, pca_json;
  auto* extract = app.add_subcommand("extract", "Build binary concept vectors for a task set");
  extract->add_option("bank", bank_json, "bank.json")->required();
  extract->add_option("task", task_manifest, "Task manifest")->required();
  extract->add_option("pca", pca_json, "pca.json written by preprocess")->required();
  AddCommonFlags(extract, flags);

  std::string concepts_json;
  auto* tree = app.add_subcommand("tree", "Fit a surrogate tree on concept vectors");
  tree->add_option("concepts", concepts_json, "concepts.json")->required();
  tree->add_option("--max-depth", flags.max_depth, "Depth cap, or 'none'");
  tree->add_option("--min-samples-split", flags.min_samples_split,
                   "Minimum rows needed to split a node");
  AddCommonFlags(tree, flags);

  auto* sweep = app.add_subcommand("sweep", "Fidelity versus max depth");
  sweep->add_option("concepts", concepts_json, "concepts.json")->required();
  sweep->add_option("--depths", flags.depths, "Comma-separated depths, e.g. 1,2,3,none");
  sweep->add_option("--min-samples-split", flags.min_samples_split,
                    "Minimum rows needed to split a node");
  AddCommonFlags(sweep, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out = flags.out;
    if (synth->parsed()) {
      PlantedSpec spec;
      if (!flags.config.empty()) spec = PlantedSpecFromJson(ReadFileBytes(flags.config));
      if (flags.seed) spec.seed = *flags.seed;
      RunSynthStage(spec, out);
      std::cout << "wrote planted dataset to " << out.string() << "\n";
    } else if (preprocess->parsed()) {
      const RunConfig config = ResolveConfig(flags);
      const PcaModel model =
          RunPreprocessStage(probe_manifest, config.pca_dim, out, config.num_threads);
      std::cout << "pca " << model.input_dim() << " -> " << model.output_dim()
                << " (id " << model.Id().substr(0, 12) << ")\n";
    } else if (train_bank->parsed()) {
      const RunConfig config = ResolveConfig(flags);
      const auto result = RunTrainBankStage(probe_manifest, config, out);
      const auto report = MakeBankReport(result.bank, result.attempted);
      std::cout << "trained " << result.attempted.size() << " concepts, kept "
                << result.bank.classifiers.size() << ", skipped "
                << result.skipped.size() << "\n"
                << "mean accuracy: attempted " << Fraction(report.mean_accuracy_attempted)
                << ", kept " << Fraction(report.mean_accuracy_kept) << "\n";
    } else if (extract->parsed()) {
      const RunConfig config = ResolveConfig(flags);
      const auto data =
          RunExtractStage(bank_json, task_manifest, pca_json, out, config.num_threads);
      std::cout << "extracted " << data.num_rows() << " x " << data.num_features()
                << " concept matrix\n";
    } else if (tree->parsed()) {
      const RunConfig config = ResolveConfig(flags);
      const auto run = RunTreeStage(concepts_json, config.tree, out);
      std::cout << "tree: " << run.row.n_nodes << " nodes, " << run.row.n_leaves
                << " leaves, fidelity train " << Fraction(run.row.fidelity_train)
                << ", holdout " << Fraction(run.row.fidelity_holdout) << "\n";
    } else if (sweep->parsed()) {
      const RunConfig config = ResolveConfig(flags);
      const auto report =
          RunSweepStage(concepts_json, config.depths, config.tree, out, config.num_threads);
      std::cout << report.ToCsv();
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kEmptyBank) {
      std::cerr << "warning: " << e.what() << "\n";
      return 2;
    }
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
