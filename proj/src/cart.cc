#include "conceptree/cart.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "conceptree/parallel.h"
#include "conceptree/status.h"
#include "json.hpp"

namespace conceptree {
namespace {

using u128 = unsigned __int128;

// Exact products below stay within 128 bits up to this many rows (n^5).
constexpr size_t kMaxRows = 40'000'000;

int32_t Argmax(const std::vector<int64_t>& counts) {
  int32_t best = 0;
  for (size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[static_cast<size_t>(best)]) best = static_cast<int32_t>(c);
  }
  return best;
}

uint64_t SumSquares(const int64_t* counts, size_t num_classes) {
  uint64_t s = 0;
  for (size_t c = 0; c < num_classes; ++c) {
    s += static_cast<uint64_t>(counts[c]) * static_cast<uint64_t>(counts[c]);
  }
  return s;
}

void CheckLabels(std::span<const int32_t> y, size_t num_classes) {
  for (int32_t v : y) {
    if (v < 0 || static_cast<size_t>(v) >= num_classes) {
      throw Error(ErrorCode::kDimMismatch,
                  "target " + std::to_string(v) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
  }
}

class TreeBuilder {
 public:
  TreeBuilder(const BitMatrix& x, std::span<const int32_t> y, size_t num_classes,
              const TreeConfig& config)
      : x_(x), y_(y), num_classes_(num_classes), config_(config) {}

  std::vector<TreeNode> Build(std::vector<size_t> rows) {
    Grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  int32_t Grow(std::vector<size_t> rows, int32_t depth) {
    const auto index = static_cast<int32_t>(nodes_.size());
    nodes_.emplace_back();
    {
      TreeNode& node = nodes_.back();
      node.depth = depth;
      node.class_counts.assign(num_classes_, 0);
      for (size_t r : rows) ++node.class_counts[static_cast<size_t>(y_[r])];
      node.predicted_class = Argmax(node.class_counts);
    }
    const auto& counts = nodes_[static_cast<size_t>(index)].class_counts;
    const bool pure =
        std::count_if(counts.begin(), counts.end(), [](int64_t c) { return c > 0; }) <= 1;
    const bool depth_reached = config_.max_depth && depth >= *config_.max_depth;
    if (depth_reached || rows.size() < config_.min_samples_split || pure) return index;

    const auto split =
        BestSplit(x_, y_, num_classes_, rows, config_.min_impurity_decrease);
    if (!split) return index;

    std::vector<size_t> absent, present;
    for (size_t r : rows) (x_(r, split->feature) ? present : absent).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int32_t absent_child = Grow(std::move(absent), depth + 1);
    const int32_t present_child = Grow(std::move(present), depth + 1);
    TreeNode& node = nodes_[static_cast<size_t>(index)];
    node.feature = static_cast<int32_t>(split->feature);
    node.absent = absent_child;
    node.present = present_child;
    return index;
  }

  const BitMatrix& x_;
  std::span<const int32_t> y_;
  size_t num_classes_;
  const TreeConfig& config_;
  std::vector<TreeNode> nodes_;
};

std::string FormatFraction(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

std::string DotEscape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string CountsString(const std::vector<int64_t>& counts) {
  std::string s = "[";
  for (size_t c = 0; c < counts.size(); ++c) {
    if (c > 0) s += ", ";
    s += std::to_string(counts[c]);
  }
  return s + "]";
}

const std::string& NameOr(const std::vector<std::string>& names, size_t i,
                          std::string& fallback) {
  if (i < names.size()) return names[i];
  fallback = std::to_string(i);
  return fallback;
}

}  // namespace

void TreeConfig::Validate() const {
  if (max_depth && *max_depth < 0) {
    throw Error(ErrorCode::kInvalidConfig, "max_depth must be non-negative");
  }
  if (min_samples_split < 2) {
    throw Error(ErrorCode::kInvalidConfig, "min_samples_split must be >= 2");
  }
  if (!(min_impurity_decrease >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "min_impurity_decrease must be >= 0");
  }
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "holdout_fraction must lie in [0, 1)");
  }
}

double Gini(std::span<const int64_t> counts) {
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  if (total == 0) throw Error(ErrorCode::kEmptyNode, "gini of an empty node");
  double sum_sq = 0.0;
  for (int64_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

std::optional<SplitChoice> BestSplit(const BitMatrix& x, std::span<const int32_t> y,
                                     size_t num_classes, std::span<const size_t> rows,
                                     double min_impurity_decrease) {
  const size_t p = x.cols();
  const size_t n = rows.size();
  if (n == 0 || p == 0) return std::nullopt;
  if (n > kMaxRows) {
    throw Error(ErrorCode::kInvalidConfig, "node exceeds the supported row count");
  }

  std::vector<int64_t> parent(num_classes, 0);
  std::vector<int64_t> present(p * num_classes, 0);
  for (size_t r : rows) {
    const auto cls = static_cast<size_t>(y[r]);
    ++parent[cls];
    const auto bits = x.row(r);
    for (size_t j = 0; j < p; ++j) {
      if (bits[j]) ++present[j * num_classes + cls];
    }
  }
  const uint64_t parent_sq = SumSquares(parent.data(), num_classes);
  const double parent_gini = Gini(parent);

  // Weighted child impurity is minimized by maximizing
  //   score = S_L / n_L + S_R / n_R,  S = sum of squared class counts,
  // kept as the exact fraction num / den.
  std::optional<SplitChoice> best;
  u128 best_num = 0, best_den = 1;
  std::vector<int64_t> absent(num_classes);
  for (size_t j = 0; j < p; ++j) {
    const int64_t* right = &present[j * num_classes];
    uint64_t n_right = 0;
    for (size_t c = 0; c < num_classes; ++c) {
      n_right += static_cast<uint64_t>(right[c]);
      absent[c] = parent[c] - right[c];
    }
    const uint64_t n_left = n - n_right;
    if (n_left == 0 || n_right == 0) continue;
    const uint64_t left_sq = SumSquares(absent.data(), num_classes);
    const uint64_t right_sq = SumSquares(right, num_classes);
    const u128 num = u128{left_sq} * n_right + u128{right_sq} * n_left;
    const u128 den = u128{n_left} * n_right;
    // Strictly positive gain: score > S_P / n.
    if (num * n <= u128{parent_sq} * den) continue;
    if (best && num * best_den <= best_num * den) continue;

    const double gain =
        parent_gini -
        (static_cast<double>(n_left) / static_cast<double>(n)) * Gini(absent) -
        (static_cast<double>(n_right) / static_cast<double>(n)) *
            Gini(std::span<const int64_t>(right, num_classes));
    if (min_impurity_decrease > 0.0 && !(gain > min_impurity_decrease)) continue;
    best = SplitChoice{j, gain};
    best_num = num;
    best_den = den;
  }
  return best;
}

size_t DecisionTree::num_leaves() const {
  return static_cast<size_t>(std::count_if(
      nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, static_cast<int>(n.depth));
  return d;
}

size_t DecisionTree::LeafFor(std::span<const unsigned char> x) const {
  if (x.size() != num_features_) {
    throw Error(ErrorCode::kDimMismatch,
                "tree expects " + std::to_string(num_features_) +
                    " concept bits, got " + std::to_string(x.size()));
  }
  size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& node = nodes_[i];
    i = static_cast<size_t>(x[static_cast<size_t>(node.feature)] ? node.present
                                                                  : node.absent);
  }
  return i;
}

int32_t DecisionTree::Predict(std::span<const unsigned char> x) const {
  return nodes_[LeafFor(x)].predicted_class;
}

DecisionTree FitTree(const BitMatrix& x, std::span<const int32_t> y,
                     size_t num_classes, std::span<const size_t> rows,
                     const TreeConfig& config) {
  config.Validate();
  if (rows.empty()) throw Error(ErrorCode::kEmptyDataset, "no training rows");
  if (x.cols() == 0) throw Error(ErrorCode::kEmptyDataset, "no concept features");
  if (num_classes == 0) throw Error(ErrorCode::kEmptyDataset, "no classes");
  if (y.size() != x.rows()) {
    throw Error(ErrorCode::kDimMismatch, "targets and concept rows differ in count");
  }
  CheckLabels(y, num_classes);
  TreeBuilder builder(x, y, num_classes, config);
  return DecisionTree(builder.Build({rows.begin(), rows.end()}), x.cols(), num_classes);
}

DecisionTree FitTree(const ConceptVectorDataset& data, const TreeConfig& config) {
  std::vector<size_t> rows(data.num_rows());
  std::iota(rows.begin(), rows.end(), size_t{0});
  return FitTree(data.matrix, data.targets, data.num_classes(), rows, config);
}

double Fidelity(const DecisionTree& tree, const BitMatrix& x,
                std::span<const int32_t> labels, std::span<const size_t> rows) {
  const size_t n = rows.empty() ? x.rows() : rows.size();
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "fidelity over zero rows");
  if (x.cols() != tree.num_features()) {
    throw Error(ErrorCode::kDimMismatch, "concept columns differ from the tree's");
  }
  size_t agree = 0;
  for (size_t i = 0; i < n; ++i) {
    const size_t r = rows.empty() ? i : rows[i];
    if (tree.Predict(x.row(r)) == labels[r]) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(n);
}

double Fidelity(const DecisionTree& tree, const ConceptVectorDataset& data) {
  return Fidelity(tree, data.matrix, data.targets);
}

HoldoutSplit MakeHoldoutSplit(size_t n, double fraction, uint64_t seed) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  size_t n_holdout =
      static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n > 0) n_holdout = std::min(n_holdout, n - 1);
  HoldoutSplit split;
  split.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_holdout), order.end());
  std::sort(split.holdout.begin(), split.holdout.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

TreeRun RunTree(const ConceptVectorDataset& data, const TreeConfig& config,
                const HoldoutSplit& split) {
  TreeRun run;
  run.tree = FitTree(data.matrix, data.targets, data.num_classes(), split.train, config);
  run.row.max_depth = config.max_depth;
  run.row.n_leaves = run.tree.num_leaves();
  run.row.n_nodes = run.tree.num_nodes();
  run.row.fidelity_train = Fidelity(run.tree, data.matrix, data.targets, split.train);
  if (!split.holdout.empty()) {
    run.row.fidelity_holdout =
        Fidelity(run.tree, data.matrix, data.targets, split.holdout);
    if (data.ground_truth) {
      run.row.fidelity_ground_truth =
          Fidelity(run.tree, data.matrix, *data.ground_truth, split.holdout);
    }
  }
  return run;
}

TreeRun RunTree(const ConceptVectorDataset& data, const TreeConfig& config) {
  config.Validate();
  if (data.num_rows() == 0) throw Error(ErrorCode::kEmptyDataset, "no task rows");
  return RunTree(data, config,
                 MakeHoldoutSplit(data.num_rows(), config.holdout_fraction, config.seed));
}

std::string FidelityReport::ToCsv() const {
  std::string csv =
      "max_depth,n_leaves,n_nodes,fidelity_train,fidelity_holdout,"
      "fidelity_ground_truth\n";
  for (const auto& r : rows) {
    csv += (r.max_depth ? std::to_string(*r.max_depth) : std::string("none")) + "," +
           std::to_string(r.n_leaves) + "," + std::to_string(r.n_nodes) + "," +
           FormatFraction(r.fidelity_train) + "," + FormatFraction(r.fidelity_holdout) +
           "," + FormatFraction(r.fidelity_ground_truth) + "\n";
  }
  return csv;
}

FidelityReport DepthSweep(const ConceptVectorDataset& data,
                          const std::vector<std::optional<int>>& depths,
                          const TreeConfig& config, int num_threads) {
  if (depths.empty()) throw Error(ErrorCode::kInvalidConfig, "no depths to sweep");
  config.Validate();
  if (data.num_rows() == 0) throw Error(ErrorCode::kEmptyDataset, "no task rows");
  const auto split =
      MakeHoldoutSplit(data.num_rows(), config.holdout_fraction, config.seed);
  FidelityReport report;
  report.rows.resize(depths.size());
  ParallelFor(depths.size(), num_threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      TreeConfig at_depth = config;
      at_depth.max_depth = depths[i];
      report.rows[i] = RunTree(data, at_depth, split).row;
    }
  });
  return report;
}

std::string ExportDot(const DecisionTree& tree,
                      const std::vector<std::string>& concept_names,
                      const std::vector<std::string>& class_names) {
  std::string dot = "digraph ConceptTree {\n";
  dot += "  node [shape=box, fontname=\"Helvetica\"];\n";
  std::string fallback;
  for (size_t i = 0; i < tree.num_nodes(); ++i) {
    const auto& node = tree.nodes()[i];
    const std::string id = "n" + std::to_string(i);
    if (node.is_leaf()) {
      const auto& cls =
          NameOr(class_names, static_cast<size_t>(node.predicted_class), fallback);
      dot += "  " + id + " [label=\"" + DotEscape(cls) + "\\n" +
             CountsString(node.class_counts) + "\", style=rounded];\n";
    } else {
      const auto& concept_name =
          NameOr(concept_names, static_cast<size_t>(node.feature), fallback);
      dot += "  " + id + " [label=\"" + DotEscape(concept_name) + "\"];\n";
      dot += "  " + id + " -> n" + std::to_string(node.absent) +
             " [label=\"absent\"];\n";
      dot += "  " + id + " -> n" + std::to_string(node.present) +
             " [label=\"present\"];\n";
    }
  }
  dot += "}\n";
  return dot;
}

std::string TreeToJson(const DecisionTree& tree,
                       const std::vector<std::string>& concept_names,
                       const std::vector<std::string>& class_names) {
  std::string fallback;
  auto emit = [&](auto&& self, size_t i) -> nlohmann::ordered_json {
    const auto& node = tree.nodes()[i];
    nlohmann::ordered_json j;
    if (node.is_leaf()) {
      j["leaf"] = NameOr(class_names, static_cast<size_t>(node.predicted_class), fallback);
      j["counts"] = node.class_counts;
    } else {
      j["split"] = NameOr(concept_names, static_cast<size_t>(node.feature), fallback);
      j["feature"] = node.feature;
      j["absent"] = self(self, static_cast<size_t>(node.absent));
      j["present"] = self(self, static_cast<size_t>(node.present));
    }
    return j;
  };
  return emit(emit, 0).dump(2) + "\n";
}

}  // namespace conceptree
