#ifndef CONCEPTREE_PIPELINE_H_
#define CONCEPTREE_PIPELINE_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "conceptree/cart.h"
#include "conceptree/concept_bank.h"
#include "conceptree/concept_extract.h"
#include "conceptree/preprocess.h"
#include "conceptree/synthetic.h"

namespace conceptree {

inline constexpr std::string_view kToolVersion = "conceptree 0.1.0";

// Everything a staged run needs; its JSON form is the experiment record.
struct RunConfig {
  BankConfig bank;
  TreeConfig tree;
  size_t pca_dim = kDefaultPcaDim;
  std::vector<std::optional<int>> depths = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int num_threads = 1;

  // Seeds both the bank and the tree split.
  void SetSeed(uint64_t seed);
};

// Flat JSON object; keys absent from `text` keep their defaults, unknown
// keys are rejected with kInvalidConfig.
RunConfig RunConfigFromJson(std::string_view text);
std::string RunConfigToJson(const RunConfig& config);

// "none" / "unbounded" -> nullopt, otherwise a non-negative integer.
std::optional<int> ParseDepth(std::string_view text);
std::vector<std::optional<int>> ParseDepthList(std::string_view text);

// Each stage reads files, writes its artifacts plus provenance.json into
// `out_dir`, and returns the in-memory result.

// probe.json (reduced), activations.npy, concept_labels.npy, pca.json,
// pca_mean.npy, pca_components.npy.
PcaModel RunPreprocessStage(const std::filesystem::path& probe_manifest,
                            size_t k, const std::filesystem::path& out_dir,
                            int num_threads = 1);

// Expects the reduced probe manifest written by RunPreprocessStage (with its
// pca.json alongside). Writes bank.json, bank_weights.npy, bank_bias.npy and
// bank_report.csv. When no classifier passes the threshold only the report is
// written and kEmptyBank is thrown.
BankTrainingResult RunTrainBankStage(const std::filesystem::path& probe_manifest,
                                     const RunConfig& config,
                                     const std::filesystem::path& out_dir);

// concepts.json, concepts.npy, targets.npy [, ground_truth.npy].
ConceptVectorDataset RunExtractStage(const std::filesystem::path& bank_json,
                                     const std::filesystem::path& task_manifest,
                                     const std::filesystem::path& pca_json,
                                     const std::filesystem::path& out_dir,
                                     int num_threads = 1);

// tree.json, tree.dot, fidelity.csv.
TreeRun RunTreeStage(const std::filesystem::path& concepts_json,
                     const TreeConfig& config, const std::filesystem::path& out_dir);

// sweep.csv.
FidelityReport RunSweepStage(const std::filesystem::path& concepts_json,
                             const std::vector<std::optional<int>>& depths,
                             const TreeConfig& config,
                             const std::filesystem::path& out_dir,
                             int num_threads = 1);

// Planted dataset files (see WritePlanted).
PlantedData RunSynthStage(const PlantedSpec& spec, const std::filesystem::path& out_dir);

}  // namespace conceptree

#endif  // CONCEPTREE_PIPELINE_H_
