#ifndef CONCEPTREE_CONCEPT_EXTRACT_H_
#define CONCEPTREE_CONCEPT_EXTRACT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conceptree/array_io.h"
#include "conceptree/concept_bank.h"
#include "conceptree/matrix.h"

namespace conceptree {

// Binary concept vectors v' for the task set, paired with the model's own
// predictions as tree targets.
struct ConceptVectorDataset {
  BitMatrix matrix;                         // n' x p, entries in {0, 1}
  std::vector<std::string> concept_names;   // p, bank order
  std::vector<int32_t> targets;             // n', model predictions
  std::vector<std::string> class_names;
  std::optional<std::vector<int32_t>> ground_truth;
  std::string pca_ref;

  size_t num_rows() const { return matrix.rows(); }
  size_t num_features() const { return matrix.cols(); }
  size_t num_classes() const { return class_names.size(); }
};

// 1 iff w.v + b >= 0 (a zero margin counts as present).
bool PredictConcept(const LinearClassifier& classifier, std::span<const float> v);

// `task` must already be reduced with the PcaModel the bank was trained on.
ConceptVectorDataset BuildConceptDataset(const ConceptBank& bank,
                                         const TaskActivationSet& task,
                                         int num_threads = 1);

// concepts.json sidecar + concepts.npy (u8) + targets.npy (i32)
// [+ ground_truth.npy] inside `dir`.
void SaveConceptDataset(const ConceptVectorDataset& data,
                        const std::filesystem::path& dir);
ConceptVectorDataset LoadConceptDataset(const std::filesystem::path& sidecar);

}  // namespace conceptree

#endif  // CONCEPTREE_CONCEPT_EXTRACT_H_
