#include "conceptree/pipeline.h"

#include <charconv>
#include <set>

#include "conceptree/hash.h"
#include "conceptree/status.h"
#include "json.hpp"

namespace conceptree {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Input files are recorded by file name (not full path) so provenance does not
// depend on where the run lives.
class Provenance {
 public:
  explicit Provenance(std::string stage) : stage_(std::move(stage)) {}

  void AddInput(const fs::path& path) {
    inputs_.push_back({{"file", path.filename().string()},
                       {"sha256", Sha256Hex(ReadFileBytes(path))}});
  }

  void AddManifestInputs(const fs::path& manifest) {
    AddInput(manifest);
    const auto m = ParseManifest(ReadFileBytes(manifest), manifest.string());
    const auto dir = manifest.parent_path();
    AddInput(dir / m.activations_path);
    if (m.kind == DatasetKind::kProbe) {
      AddInput(dir / m.concept_labels_path);
    } else {
      AddInput(dir / m.predictions_path);
      if (m.ground_truth_path) AddInput(dir / *m.ground_truth_path);
    }
  }

  void SetConfig(ordered_json config) { config_ = std::move(config); }
  void Set(const std::string& key, ordered_json value) { extra_[key] = std::move(value); }

  void Write(const fs::path& out_dir, const std::vector<std::string>& outputs) const {
    ordered_json j;
    j["stage"] = stage_;
    j["tool_version"] = kToolVersion;
    j["inputs"] = inputs_;
    j["config"] = config_;
    for (const auto& [key, value] : extra_.items()) j[key] = value;
    ordered_json out = ordered_json::array();
    for (const auto& name : outputs) {
      out.push_back({{"file", name}, {"sha256", Sha256Hex(ReadFileBytes(out_dir / name))}});
    }
    j["outputs"] = std::move(out);
    WriteFileBytes(out_dir / "provenance.json", j.dump(2) + "\n");
  }

 private:
  std::string stage_;
  ordered_json inputs_ = ordered_json::array();
  ordered_json config_ = ordered_json::object();
  ordered_json extra_ = ordered_json::object();
};

ordered_json DepthsToJson(const std::vector<std::optional<int>>& depths) {
  ordered_json j = ordered_json::array();
  for (const auto& d : depths) {
    if (d) {
      j.push_back(*d);
    } else {
      j.push_back("none");
    }
  }
  return j;
}

ordered_json TreeConfigJson(const TreeConfig& c) {
  ordered_json j;
  j["max_depth"] = c.max_depth ? ordered_json(*c.max_depth) : ordered_json("none");
  j["min_samples_split"] = c.min_samples_split;
  j["min_impurity_decrease"] = c.min_impurity_decrease;
  j["holdout_fraction"] = c.holdout_fraction;
  j["seed"] = c.seed;
  return j;
}

std::optional<int> DepthFromJson(const json& v) {
  if (v.is_string()) return ParseDepth(v.get<std::string>());
  if (v.is_null()) return std::nullopt;
  const int d = v.get<int>();
  if (d < 0) throw Error(ErrorCode::kInvalidConfig, "depth must be non-negative");
  return d;
}

}  // namespace

void RunConfig::SetSeed(uint64_t seed) {
  bank.seed = seed;
  tree.seed = seed;
}

RunConfig RunConfigFromJson(std::string_view text) {
  static const std::set<std::string> kKeys = {
      "seed", "k", "lambda_threshold", "min_examples", "val_fraction", "l2",
      "learning_rate", "max_iters", "grad_tol", "max_depth", "min_samples_split",
      "min_impurity_decrease", "holdout_fraction", "depths", "num_threads"};
  RunConfig c;
  try {
    const auto j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidConfig, "config must be an object");
    for (const auto& [key, value] : j.items()) {
      if (!kKeys.count(key)) {
        throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
      }
    }
    if (j.contains("seed")) c.SetSeed(j["seed"].get<uint64_t>());
    c.pca_dim = j.value("k", c.pca_dim);
    c.bank.lambda_threshold = j.value("lambda_threshold", c.bank.lambda_threshold);
    c.bank.min_examples = j.value("min_examples", c.bank.min_examples);
    c.bank.val_fraction = j.value("val_fraction", c.bank.val_fraction);
    c.bank.l2 = j.value("l2", c.bank.l2);
    c.bank.learning_rate = j.value("learning_rate", c.bank.learning_rate);
    c.bank.max_iters = j.value("max_iters", c.bank.max_iters);
    c.bank.grad_tol = j.value("grad_tol", c.bank.grad_tol);
    if (j.contains("max_depth")) c.tree.max_depth = DepthFromJson(j["max_depth"]);
    c.tree.min_samples_split = j.value("min_samples_split", c.tree.min_samples_split);
    c.tree.min_impurity_decrease =
        j.value("min_impurity_decrease", c.tree.min_impurity_decrease);
    c.tree.holdout_fraction = j.value("holdout_fraction", c.tree.holdout_fraction);
    if (j.contains("depths")) {
      c.depths.clear();
      for (const auto& d : j["depths"]) c.depths.push_back(DepthFromJson(d));
    }
    c.num_threads = j.value("num_threads", c.num_threads);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("run config: ") + e.what());
  }
  return c;
}

std::string RunConfigToJson(const RunConfig& c) {
  ordered_json j;
  j["seed"] = c.bank.seed;
  j["k"] = c.pca_dim;
  j["lambda_threshold"] = c.bank.lambda_threshold;
  j["min_examples"] = c.bank.min_examples;
  j["val_fraction"] = c.bank.val_fraction;
  j["l2"] = c.bank.l2;
  j["learning_rate"] = c.bank.learning_rate;
  j["max_iters"] = c.bank.max_iters;
  j["grad_tol"] = c.bank.grad_tol;
  j["max_depth"] = c.tree.max_depth ? ordered_json(*c.tree.max_depth) : ordered_json("none");
  j["min_samples_split"] = c.tree.min_samples_split;
  j["min_impurity_decrease"] = c.tree.min_impurity_decrease;
  j["holdout_fraction"] = c.tree.holdout_fraction;
  j["depths"] = DepthsToJson(c.depths);
  j["num_threads"] = c.num_threads;
  return j.dump(2) + "\n";
}

std::optional<int> ParseDepth(std::string_view text) {
  if (text == "none" || text == "unbounded") return std::nullopt;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value < 0) {
    throw Error(ErrorCode::kInvalidConfig, "invalid depth '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::optional<int>> ParseDepthList(std::string_view text) {
  std::vector<std::optional<int>> depths;
  size_t start = 0;
  while (start <= text.size()) {
    const size_t comma = text.find(',', start);
    const size_t end = comma == std::string_view::npos ? text.size() : comma;
    depths.push_back(ParseDepth(text.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return depths;
}

PcaModel RunPreprocessStage(const fs::path& probe_manifest, size_t k,
                            const fs::path& out_dir, int num_threads) {
  ProbeDataset probe = LoadProbeDataset(probe_manifest);
  const FloatMatrix pooled = PoolActivations(probe.activations, probe.feature_shape);
  if (k < 1 || k > std::min(pooled.rows(), pooled.cols())) {
    throw Error(ErrorCode::kInvalidConfig,
                "k=" + std::to_string(k) + " outside [1, min(n=" +
                    std::to_string(pooled.rows()) + ", d=" +
                    std::to_string(pooled.cols()) + ")]");
  }
  Provenance provenance("preprocess");
  provenance.AddManifestInputs(probe_manifest);

  PcaModel model = PcaFit(pooled, k);
  ProbeDataset reduced;
  reduced.layer_name = probe.layer_name;
  reduced.feature_shape = {static_cast<int64_t>(k)};
  reduced.activations = PcaTransform(model, pooled, num_threads);
  reduced.concept_names = std::move(probe.concept_names);
  reduced.concept_labels = std::move(probe.concept_labels);

  fs::create_directories(out_dir);
  SaveProbeDataset(reduced, out_dir, "probe.json");
  SavePcaModel(model, out_dir);

  provenance.SetConfig({{"k", k}, {"spatial_average", probe.feature_shape.size() == 3}});
  provenance.Set("pca_id", model.Id());
  provenance.Write(out_dir, {"probe.json", "activations.npy", "concept_labels.npy",
                             "pca.json", "pca_mean.npy", "pca_components.npy"});
  return model;
}

BankTrainingResult RunTrainBankStage(const fs::path& probe_manifest,
                                     const RunConfig& config, const fs::path& out_dir) {
  config.bank.Validate();
  const fs::path pca_json = probe_manifest.parent_path() / "pca.json";
  if (!fs::exists(pca_json)) {
    throw Error(ErrorCode::kMissingFile,
                pca_json.string() + " not found; run preprocess first");
  }
  const PcaModel pca = LoadPcaModel(pca_json);
  ProbeDataset probe = LoadProbeDataset(probe_manifest);
  if (probe.activations.cols() != pca.output_dim()) {
    throw Error(ErrorCode::kPreprocMismatch,
                "probe width does not match the PCA output dimension");
  }
  probe.preproc_id = pca.Id();

  Provenance provenance("train-bank");
  provenance.AddManifestInputs(probe_manifest);
  provenance.AddInput(pca_json);

  BankTrainingResult result = TrainBank(probe, config.bank, config.num_threads);
  const BankReport report = MakeBankReport(result.bank, result.attempted);
  fs::create_directories(out_dir);
  WriteFileBytes(out_dir / "bank_report.csv", report.ToCsv());
  if (result.bank.empty()) {
    throw Error(ErrorCode::kEmptyBank,
                "no concept classifier reached lambda=" +
                    std::to_string(config.bank.lambda_threshold) + " (" +
                    std::to_string(result.attempted.size()) + " trained, " +
                    std::to_string(result.skipped.size()) + " skipped)");
  }
  SaveConceptBank(result.bank, out_dir);

  ordered_json bank_config = json::parse(RunConfigToJson(config));
  provenance.SetConfig(std::move(bank_config));
  provenance.Set("pca_id", probe.preproc_id);
  provenance.Set("mean_accuracy_attempted",
                 report.mean_accuracy_attempted ? ordered_json(*report.mean_accuracy_attempted)
                                                : ordered_json(nullptr));
  provenance.Set("mean_accuracy_kept", report.mean_accuracy_kept
                                           ? ordered_json(*report.mean_accuracy_kept)
                                           : ordered_json(nullptr));
  provenance.Write(out_dir,
                   {"bank.json", "bank_weights.npy", "bank_bias.npy", "bank_report.csv"});
  return result;
}

ConceptVectorDataset RunExtractStage(const fs::path& bank_json,
                                     const fs::path& task_manifest,
                                     const fs::path& pca_json, const fs::path& out_dir,
                                     int num_threads) {
  const ConceptBank bank = LoadConceptBank(bank_json);
  const PcaModel pca = LoadPcaModel(pca_json);
  const std::string pca_id = pca.Id();
  if (pca_id != bank.pca_ref) {
    throw Error(ErrorCode::kPreprocMismatch,
                pca_json.string() + " has id " + pca_id + " but the bank was trained on " +
                    bank.pca_ref);
  }
  TaskActivationSet task = LoadTaskDataset(task_manifest);
  task.activations =
      ReduceActivations(pca, task.activations, task.feature_shape, num_threads);
  task.feature_shape = {static_cast<int64_t>(pca.output_dim())};
  task.preproc_id = pca_id;

  Provenance provenance("extract");
  provenance.AddInput(bank_json);
  provenance.AddInput(bank_json.parent_path() / "bank_weights.npy");
  provenance.AddInput(bank_json.parent_path() / "bank_bias.npy");
  provenance.AddManifestInputs(task_manifest);
  provenance.AddInput(pca_json);

  ConceptVectorDataset data = BuildConceptDataset(bank, task, num_threads);
  SaveConceptDataset(data, out_dir);
  provenance.Set("pca_id", pca_id);
  std::vector<std::string> outputs = {"concepts.json", "concepts.npy", "targets.npy"};
  if (data.ground_truth) outputs.push_back("ground_truth.npy");
  provenance.Write(out_dir, outputs);
  return data;
}

TreeRun RunTreeStage(const fs::path& concepts_json, const TreeConfig& config,
                     const fs::path& out_dir) {
  config.Validate();
  const ConceptVectorDataset data = LoadConceptDataset(concepts_json);
  Provenance provenance("tree");
  provenance.AddInput(concepts_json);
  provenance.AddInput(concepts_json.parent_path() / "concepts.npy");
  provenance.AddInput(concepts_json.parent_path() / "targets.npy");

  TreeRun run = RunTree(data, config);
  fs::create_directories(out_dir);
  WriteFileBytes(out_dir / "tree.json",
                 TreeToJson(run.tree, data.concept_names, data.class_names));
  WriteFileBytes(out_dir / "tree.dot",
                 ExportDot(run.tree, data.concept_names, data.class_names));
  WriteFileBytes(out_dir / "fidelity.csv", FidelityReport{{run.row}}.ToCsv());
  provenance.SetConfig(TreeConfigJson(config));
  provenance.Write(out_dir, {"tree.json", "tree.dot", "fidelity.csv"});
  return run;
}

FidelityReport RunSweepStage(const fs::path& concepts_json,
                             const std::vector<std::optional<int>>& depths,
                             const TreeConfig& config, const fs::path& out_dir,
                             int num_threads) {
  const ConceptVectorDataset data = LoadConceptDataset(concepts_json);
  Provenance provenance("sweep");
  provenance.AddInput(concepts_json);
  provenance.AddInput(concepts_json.parent_path() / "concepts.npy");
  provenance.AddInput(concepts_json.parent_path() / "targets.npy");

  FidelityReport report = DepthSweep(data, depths, config, num_threads);
  fs::create_directories(out_dir);
  WriteFileBytes(out_dir / "sweep.csv", report.ToCsv());
  auto config_json = TreeConfigJson(config);
  config_json.erase("max_depth");
  config_json["depths"] = DepthsToJson(depths);
  provenance.SetConfig(std::move(config_json));
  provenance.Write(out_dir, {"sweep.csv"});
  return report;
}

PlantedData RunSynthStage(const PlantedSpec& spec, const fs::path& out_dir) {
  PlantedData data = GeneratePlanted(spec);
  WritePlanted(spec, data, out_dir);
  Provenance provenance("synth");
  provenance.SetConfig(json::parse(PlantedSpecToJson(spec)));
  provenance.Write(out_dir, {"probe/probe.json", "probe/activations.npy",
                             "probe/concept_labels.npy", "task/task.json",
                             "task/activations.npy", "task/predictions.npy",
                             "ground_truth/task_concepts.npy", "ground_truth/spec.json"});
  return data;
}

}  // namespace conceptree
