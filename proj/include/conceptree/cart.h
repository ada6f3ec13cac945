#ifndef CONCEPTREE_CART_H_
#define CONCEPTREE_CART_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conceptree/concept_extract.h"
#include "conceptree/matrix.h"

namespace conceptree {

struct TreeConfig {
  std::optional<int> max_depth = 5;  // nullopt: unbounded
  size_t min_samples_split = 20;
  // A split must beat this gain strictly; the default 0 means any positive
  // gain qualifies.
  double min_impurity_decrease = 0.0;
  double holdout_fraction = 0.2;
  uint64_t seed = 0;

  void Validate() const;
};

// 1 - sum_i (counts_i / total)^2. Throws kEmptyNode on an all-zero histogram.
double Gini(std::span<const int64_t> counts);

struct SplitChoice {
  size_t feature = 0;
  double gain = 0.0;
};

// Best "feature j present goes right" split over `rows`, or nullopt when no
// feature separates the rows with a gain above `min_impurity_decrease`.
// Candidate gains are ranked in exact integer arithmetic; equal gains resolve
// to the lowest feature index.
std::optional<SplitChoice> BestSplit(const BitMatrix& x, std::span<const int32_t> y,
                                     size_t num_classes, std::span<const size_t> rows,
                                     double min_impurity_decrease = 0.0);

struct TreeNode {
  // Split nodes have feature >= 0 and both children set; leaves have -1.
  int32_t feature = -1;
  int32_t absent = -1;   // child for r_feature = 0
  int32_t present = -1;  // child for r_feature = 1
  int32_t depth = 0;
  std::vector<int64_t> class_counts;
  int32_t predicted_class = 0;  // argmax of class_counts, lowest index on ties

  bool is_leaf() const { return feature < 0; }
};

// Nodes are stored in preorder (absent subtree before present subtree), so a
// node's index is its stable preorder id.
class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, size_t num_features, size_t num_classes)
      : nodes_(std::move(nodes)), num_features_(num_features),
        num_classes_(num_classes) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  size_t num_features() const { return num_features_; }
  size_t num_classes() const { return num_classes_; }
  size_t num_nodes() const { return nodes_.size(); }
  size_t num_leaves() const;
  int depth() const;

  // Index of the leaf reached by `x`.
  size_t LeafFor(std::span<const unsigned char> x) const;
  int32_t Predict(std::span<const unsigned char> x) const;

 private:
  std::vector<TreeNode> nodes_;
  size_t num_features_ = 0;
  size_t num_classes_ = 0;
};

// Greedy recursive CART growth on `rows` of (x, y). A node stays a leaf when
// it reaches max_depth, holds fewer than min_samples_split rows, is pure, or
// has no admissible split.
DecisionTree FitTree(const BitMatrix& x, std::span<const int32_t> y,
                     size_t num_classes, std::span<const size_t> rows,
                     const TreeConfig& config);
// Fits on every row of the dataset against its model-prediction targets.
DecisionTree FitTree(const ConceptVectorDataset& data, const TreeConfig& config);

// Fraction of `rows` (all rows when empty) whose tree prediction equals the
// given labels.
double Fidelity(const DecisionTree& tree, const BitMatrix& x,
                std::span<const int32_t> labels, std::span<const size_t> rows = {});
double Fidelity(const DecisionTree& tree, const ConceptVectorDataset& data);

struct HoldoutSplit {
  std::vector<size_t> train;    // ascending
  std::vector<size_t> holdout;  // ascending
};

// Seeded shuffle; the first round(fraction * n) rows become the holdout,
// capped so at least one training row remains.
HoldoutSplit MakeHoldoutSplit(size_t n, double fraction, uint64_t seed);

struct FidelityRow {
  std::optional<int> max_depth;
  size_t n_leaves = 0;
  size_t n_nodes = 0;
  double fidelity_train = 0.0;
  std::optional<double> fidelity_holdout;
  // Tree prediction vs. ground-truth label, on the holdout rows.
  std::optional<double> fidelity_ground_truth;

  friend bool operator==(const FidelityRow&, const FidelityRow&) = default;
};

struct FidelityReport {
  std::vector<FidelityRow> rows;

  // Header: max_depth,n_leaves,n_nodes,fidelity_train,fidelity_holdout,
  // fidelity_ground_truth. Unbounded depth prints as "none", absent values as
  // empty fields.
  std::string ToCsv() const;
};

struct TreeRun {
  DecisionTree tree;
  FidelityRow row;
};

// Fits one tree on the seeded train split and scores it on both splits.
TreeRun RunTree(const ConceptVectorDataset& data, const TreeConfig& config,
                const HoldoutSplit& split);
TreeRun RunTree(const ConceptVectorDataset& data, const TreeConfig& config);

// One row per entry of `depths`, all sharing a single train/holdout split.
FidelityReport DepthSweep(const ConceptVectorDataset& data,
                          const std::vector<std::optional<int>>& depths,
                          const TreeConfig& config, int num_threads = 1);

std::string ExportDot(const DecisionTree& tree,
                      const std::vector<std::string>& concept_names,
                      const std::vector<std::string>& class_names);

// Nested {"split","feature","absent","present"} / {"leaf","counts"} objects.
std::string TreeToJson(const DecisionTree& tree,
                       const std::vector<std::string>& concept_names,
                       const std::vector<std::string>& class_names);

}  // namespace conceptree

#endif  // CONCEPTREE_CART_H_
