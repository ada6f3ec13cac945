#ifndef CONCEPTREE_CONCEPT_BANK_H_
#define CONCEPTREE_CONCEPT_BANK_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "conceptree/array_io.h"
#include "conceptree/matrix.h"

namespace conceptree {

struct BankConfig {
  double lambda_threshold = 0.75;
  // Floor on the usable (balanced) example count 2 * min(#pos, #neg).
  size_t min_examples = 1000;
  double val_fraction = 0.2;
  uint64_t seed = 0;
  double l2 = 1e-4;
  double learning_rate = 0.1;
  int max_iters = 500;
  double grad_tol = 1e-6;

  // Throws kInvalidConfig.
  void Validate() const;
};

// Binary linear concept detector f_c: present iff w.v + b >= 0 on reduced
// activations v.
struct LinearClassifier {
  size_t concept_id = 0;
  std::vector<float> weights;
  float bias = 0.0f;
  double val_accuracy = 0.0;
  size_t n_train = 0;
  size_t n_val = 0;
};

struct ConceptBank {
  std::vector<LinearClassifier> classifiers;  // ascending concept_id
  std::vector<std::string> concept_names;     // parallel to classifiers
  std::string pca_ref;
  BankConfig config;
  size_t input_dim = 0;

  bool empty() const { return classifiers.empty(); }
};

// Per-concept RNG seed: splitmix64 of the run seed mixed with the concept id,
// so concepts can be trained in any order on any number of threads.
uint64_t ConceptSeed(uint64_t seed, size_t concept_id);

struct BalancedSet {
  FloatMatrix x;
  std::vector<uint8_t> y;
  std::vector<size_t> source_rows;
};

// Equal numbers of positive and negative rows for one concept: the larger
// side is subsampled uniformly without replacement down to min(#pos, #neg).
// Rows are ordered positives first, then negatives, each by source index.
BalancedSet BuildBalancedSet(const ProbeDataset& probe, size_t concept_id,
                             std::mt19937_64& rng);

// Mean L2-regularized logistic loss over (x, y); the bias is not penalized.
double LogisticLoss(const RowMatrix<double>& x, std::span<const uint8_t> y,
                    std::span<const double> weights, double bias, double l2);
// Gradient of LogisticLoss; the last entry is d/d(bias).
std::vector<double> LogisticGradient(const RowMatrix<double>& x,
                                     std::span<const uint8_t> y,
                                     std::span<const double> weights, double bias,
                                     double l2);

// Stratified train/val split, per-feature standardization on the train rows,
// full-batch gradient descent; standardization is folded back into the
// returned raw-space (weights, bias). `loss_trace`, if given, receives the
// training loss at every iterate.
LinearClassifier TrainConceptClassifier(const FloatMatrix& x,
                                        std::span<const uint8_t> y,
                                        const BankConfig& config, uint64_t seed,
                                        std::vector<double>* loss_trace = nullptr);

// Keeps classifiers with val_accuracy >= lambda_threshold, ascending
// concept_id. `all_concept_names` is indexed by concept_id.
ConceptBank FilterBank(std::vector<LinearClassifier> classifiers,
                       const BankConfig& config,
                       const std::vector<std::string>& all_concept_names,
                       std::string pca_ref);

struct ConceptAttempt {
  size_t concept_id = 0;
  std::string name;
  size_t n_pos = 0;
  double val_accuracy = 0.0;
};

struct BankReport {
  struct Row {
    std::string concept_name;
    size_t n_pos = 0;
    double val_accuracy = 0.0;
    bool kept = false;
  };
  std::vector<Row> rows;  // descending accuracy, ties by concept id
  std::optional<double> mean_accuracy_attempted;
  std::optional<double> mean_accuracy_kept;

  // Header: concept,n_pos,val_accuracy,kept
  std::string ToCsv() const;
};

BankReport MakeBankReport(const ConceptBank& bank,
                          const std::vector<ConceptAttempt>& attempted);

struct SkippedConcept {
  size_t concept_id = 0;
  std::string name;
  std::string reason;
};

struct BankTrainingResult {
  ConceptBank bank;
  std::vector<ConceptAttempt> attempted;
  std::vector<SkippedConcept> skipped;
  std::vector<LinearClassifier> all_classifiers;
};

// Runs balancing, training and filtering for every concept of a reduced
// probe set. The result is identical for every `num_threads`.
BankTrainingResult TrainBank(const ProbeDataset& probe, const BankConfig& config,
                             int num_threads = 1);

// bank.json + bank_weights.npy (|kept| x k) + bank_bias.npy inside `dir`.
void SaveConceptBank(const ConceptBank& bank, const std::filesystem::path& dir);
ConceptBank LoadConceptBank(const std::filesystem::path& bank_json);

}  // namespace conceptree

#endif  // CONCEPTREE_CONCEPT_BANK_H_
