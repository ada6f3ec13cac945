#include "conceptree/concept_bank.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "conceptree/parallel.h"
#include "conceptree/status.h"
#include "json.hpp"

namespace conceptree {
namespace {

uint64_t SplitMix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// log(1 + exp(z)) without overflow.
double Softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double Margin(std::span<const double> row, std::span<const double> w, double b) {
  double z = b;
  for (size_t j = 0; j < w.size(); ++j) z += row[j] * w[j];
  return z;
}

struct Split {
  std::vector<size_t> train;
  std::vector<size_t> val;
};

// Per-class shuffle, then the first round(val_fraction * count) rows of each
// class go to validation. Each class keeps at least one row on both sides when
// it has two or more rows.
Split StratifiedSplit(std::span<const uint8_t> y, double val_fraction,
                      uint64_t seed) {
  std::mt19937_64 rng(seed);
  Split split;
  for (uint8_t label : {uint8_t{0}, uint8_t{1}}) {
    std::vector<size_t> rows;
    for (size_t i = 0; i < y.size(); ++i) {
      if (y[i] == label) rows.push_back(i);
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    size_t n_val = static_cast<size_t>(
        std::llround(val_fraction * static_cast<double>(rows.size())));
    if (rows.size() >= 2) n_val = std::clamp<size_t>(n_val, 1, rows.size() - 1);
    split.val.insert(split.val.end(), rows.begin(), rows.begin() + n_val);
    split.train.insert(split.train.end(), rows.begin() + n_val, rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

bool HasBothLabels(const std::vector<size_t>& rows, std::span<const uint8_t> y) {
  bool pos = false, neg = false;
  for (size_t r : rows) (y[r] ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

void BankConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidConfig, what);
  };
  if (!(lambda_threshold >= 0.0 && lambda_threshold <= 1.0)) {
    fail("lambda_threshold must lie in [0, 1]");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    fail("val_fraction must lie in (0, 1)");
  }
  if (!(l2 >= 0.0)) fail("l2 must be non-negative");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (max_iters < 0) fail("max_iters must be non-negative");
  if (!(grad_tol >= 0.0)) fail("grad_tol must be non-negative");
}

uint64_t ConceptSeed(uint64_t seed, size_t concept_id) {
  return SplitMix64(seed ^ SplitMix64(static_cast<uint64_t>(concept_id)));
}

BalancedSet BuildBalancedSet(const ProbeDataset& probe, size_t concept_id,
                             std::mt19937_64& rng) {
  if (concept_id >= probe.num_concepts()) {
    throw Error(ErrorCode::kDimMismatch,
                "concept id " + std::to_string(concept_id) + " out of range");
  }
  std::vector<size_t> positives, negatives;
  for (size_t r = 0; r < probe.num_samples(); ++r) {
    (probe.concept_labels(r, concept_id) ? positives : negatives).push_back(r);
  }
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorCode::kConceptDegenerate,
                "concept '" + probe.concept_names[concept_id] + "' has " +
                    std::to_string(positives.size()) + " positives and " +
                    std::to_string(negatives.size()) + " negatives");
  }
  const size_t per_side = std::min(positives.size(), negatives.size());
  auto take = [&](std::vector<size_t>& rows) {
    if (rows.size() > per_side) {
      std::vector<size_t> picked;
      picked.reserve(per_side);
      std::sample(rows.begin(), rows.end(), std::back_inserter(picked), per_side,
                  rng);
      rows = std::move(picked);
    }
  };
  take(positives);
  take(negatives);

  BalancedSet set;
  set.x = FloatMatrix(2 * per_side, probe.activations.cols());
  set.y.reserve(2 * per_side);
  size_t out = 0;
  for (const auto* side : {&positives, &negatives}) {
    for (size_t r : *side) {
      std::copy_n(probe.activations.row(r).begin(), probe.activations.cols(),
                  set.x.row(out++).begin());
      set.y.push_back(side == &positives ? 1 : 0);
      set.source_rows.push_back(r);
    }
  }
  return set;
}

double LogisticLoss(const RowMatrix<double>& x, std::span<const uint8_t> y,
                    std::span<const double> weights, double bias, double l2) {
  double loss = 0.0;
  for (size_t i = 0; i < x.rows(); ++i) {
    const double z = Margin(x.row(i), weights, bias);
    loss += Softplus(z) - (y[i] ? z : 0.0);
  }
  loss /= static_cast<double>(std::max<size_t>(x.rows(), 1));
  double norm2 = 0.0;
  for (double w : weights) norm2 += w * w;
  return loss + 0.5 * l2 * norm2;
}

std::vector<double> LogisticGradient(const RowMatrix<double>& x,
                                     std::span<const uint8_t> y,
                                     std::span<const double> weights, double bias,
                                     double l2) {
  const size_t k = weights.size();
  std::vector<double> grad(k + 1, 0.0);
  for (size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const double residual = Sigmoid(Margin(row, weights, bias)) - (y[i] ? 1.0 : 0.0);
    for (size_t j = 0; j < k; ++j) grad[j] += residual * row[j];
    grad[k] += residual;
  }
  const double inv_n = 1.0 / static_cast<double>(std::max<size_t>(x.rows(), 1));
  for (size_t j = 0; j < k; ++j) grad[j] = grad[j] * inv_n + l2 * weights[j];
  grad[k] *= inv_n;
  return grad;
}

LinearClassifier TrainConceptClassifier(const FloatMatrix& x,
                                        std::span<const uint8_t> y,
                                        const BankConfig& config, uint64_t seed,
                                        std::vector<double>* loss_trace) {
  config.Validate();
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::kDimMismatch, "feature rows and labels differ in count");
  }
  const size_t k = x.cols();

  Split split = StratifiedSplit(y, config.val_fraction, seed);
  if (!HasBothLabels(split.val, y) || !HasBothLabels(split.train, y)) {
    split = StratifiedSplit(y, config.val_fraction, seed + 1);
    if (!HasBothLabels(split.val, y) || !HasBothLabels(split.train, y)) {
      throw Error(ErrorCode::kSingleClassSplit,
                  "train/val split leaves a single-class side (" +
                      std::to_string(x.rows()) + " rows)");
    }
  }

  // Standardize on train rows. Directions with (numerically) no spread keep
  // unit scale.
  const size_t n_train = split.train.size();
  std::vector<double> mean(k, 0.0), scale(k, 0.0);
  for (size_t r : split.train) {
    for (size_t j = 0; j < k; ++j) mean[j] += x(r, j);
  }
  for (double& m : mean) m /= static_cast<double>(n_train);
  for (size_t r : split.train) {
    for (size_t j = 0; j < k; ++j) {
      const double dev = x(r, j) - mean[j];
      scale[j] += dev * dev;
    }
  }
  double max_scale = 0.0;
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(n_train));
    max_scale = std::max(max_scale, s);
  }
  for (double& s : scale) {
    if (s <= 1e-6 * max_scale || s == 0.0) s = 1.0;
  }

  RowMatrix<double> z(n_train, k);
  std::vector<uint8_t> z_labels(n_train);
  for (size_t i = 0; i < n_train; ++i) {
    const size_t r = split.train[i];
    for (size_t j = 0; j < k; ++j) z(i, j) = (x(r, j) - mean[j]) / scale[j];
    z_labels[i] = y[r];
  }

  std::vector<double> w(k, 0.0);
  double b = 0.0;
  if (loss_trace) loss_trace->clear();
  for (int iter = 0; iter < config.max_iters; ++iter) {
    if (loss_trace) loss_trace->push_back(LogisticLoss(z, z_labels, w, b, config.l2));
    const auto grad = LogisticGradient(z, z_labels, w, b, config.l2);
    double inf_norm = 0.0;
    for (double g : grad) inf_norm = std::max(inf_norm, std::abs(g));
    if (inf_norm < config.grad_tol) break;
    for (size_t j = 0; j < k; ++j) w[j] -= config.learning_rate * grad[j];
    b -= config.learning_rate * grad[k];
  }
  if (loss_trace) loss_trace->push_back(LogisticLoss(z, z_labels, w, b, config.l2));

  LinearClassifier out;
  out.weights.resize(k);
  double raw_bias = b;
  for (size_t j = 0; j < k; ++j) {
    const double raw = w[j] / scale[j];
    out.weights[j] = static_cast<float>(raw);
    raw_bias -= raw * mean[j];
  }
  out.bias = static_cast<float>(raw_bias);
  out.n_train = n_train;
  out.n_val = split.val.size();

  size_t correct = 0;
  for (size_t r : split.val) {
    double margin = out.bias;
    for (size_t j = 0; j < k; ++j) margin += static_cast<double>(out.weights[j]) * x(r, j);
    if ((margin >= 0.0) == (y[r] != 0)) ++correct;
  }
  out.val_accuracy = static_cast<double>(correct) / static_cast<double>(out.n_val);
  return out;
}

ConceptBank FilterBank(std::vector<LinearClassifier> classifiers,
                       const BankConfig& config,
                       const std::vector<std::string>& all_concept_names,
                       std::string pca_ref) {
  ConceptBank bank;
  bank.config = config;
  bank.pca_ref = std::move(pca_ref);
  std::stable_sort(classifiers.begin(), classifiers.end(),
                   [](const auto& a, const auto& b) { return a.concept_id < b.concept_id; });
  for (auto& c : classifiers) {
    if (c.val_accuracy < config.lambda_threshold) continue;
    if (c.concept_id >= all_concept_names.size()) {
      throw Error(ErrorCode::kDimMismatch, "classifier concept id out of range");
    }
    if (bank.input_dim == 0) bank.input_dim = c.weights.size();
    bank.concept_names.push_back(all_concept_names[c.concept_id]);
    bank.classifiers.push_back(std::move(c));
  }
  return bank;
}

std::string BankReport::ToCsv() const {
  std::string csv = "concept,n_pos,val_accuracy,kept\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.val_accuracy);
    csv += row.concept_name + "," + std::to_string(row.n_pos) + "," + buf + "," +
           (row.kept ? "1" : "0") + "\n";
  }
  return csv;
}

BankReport MakeBankReport(const ConceptBank& bank,
                          const std::vector<ConceptAttempt>& attempted) {
  std::vector<ConceptAttempt> sorted = attempted;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.val_accuracy != b.val_accuracy) return a.val_accuracy > b.val_accuracy;
    return a.concept_id < b.concept_id;
  });
  BankReport report;
  double sum_all = 0.0, sum_kept = 0.0;
  size_t n_kept = 0;
  for (const auto& a : sorted) {
    const bool kept = std::any_of(
        bank.classifiers.begin(), bank.classifiers.end(),
        [&](const LinearClassifier& c) { return c.concept_id == a.concept_id; });
    report.rows.push_back({a.name, a.n_pos, a.val_accuracy, kept});
    sum_all += a.val_accuracy;
    if (kept) {
      sum_kept += a.val_accuracy;
      ++n_kept;
    }
  }
  if (!sorted.empty()) {
    report.mean_accuracy_attempted = sum_all / static_cast<double>(sorted.size());
  }
  if (n_kept > 0) report.mean_accuracy_kept = sum_kept / static_cast<double>(n_kept);
  return report;
}

BankTrainingResult TrainBank(const ProbeDataset& probe, const BankConfig& config,
                             int num_threads) {
  config.Validate();
  const size_t num_concepts = probe.num_concepts();

  struct Slot {
    std::optional<LinearClassifier> classifier;
    size_t n_pos = 0;
    std::string skip_reason;
  };
  std::vector<Slot> slots(num_concepts);

  ParallelFor(num_concepts, num_threads, [&](size_t begin, size_t end) {
    for (size_t c = begin; c < end; ++c) {
      Slot& slot = slots[c];
      size_t n_pos = 0;
      for (size_t r = 0; r < probe.num_samples(); ++r) n_pos += probe.concept_labels(r, c);
      slot.n_pos = n_pos;
      const size_t n_neg = probe.num_samples() - n_pos;
      if (n_pos == 0 || n_neg == 0) {
        slot.skip_reason = "ConceptDegenerate: no positive or no negative examples";
        continue;
      }
      const size_t usable = 2 * std::min(n_pos, n_neg);
      if (usable < config.min_examples) {
        slot.skip_reason = "usable examples " + std::to_string(usable) +
                           " below min_examples " + std::to_string(config.min_examples);
        continue;
      }
      const uint64_t seed = ConceptSeed(config.seed, c);
      std::mt19937_64 rng(seed);
      const BalancedSet set = BuildBalancedSet(probe, c, rng);
      try {
        auto classifier =
            TrainConceptClassifier(set.x, set.y, config, SplitMix64(seed));
        classifier.concept_id = c;
        slot.classifier = std::move(classifier);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kSingleClassSplit) throw;
        slot.skip_reason = e.what();
      }
    }
  });

  BankTrainingResult result;
  for (size_t c = 0; c < num_concepts; ++c) {
    const Slot& slot = slots[c];
    if (slot.classifier) {
      result.attempted.push_back(
          {c, probe.concept_names[c], slot.n_pos, slot.classifier->val_accuracy});
      result.all_classifiers.push_back(*slot.classifier);
    } else {
      result.skipped.push_back({c, probe.concept_names[c], slot.skip_reason});
    }
  }
  result.bank = FilterBank(result.all_classifiers, config, probe.concept_names,
                           probe.preproc_id);
  if (result.bank.input_dim == 0) result.bank.input_dim = probe.activations.cols();
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

nlohmann::ordered_json ConfigToJson(const BankConfig& c) {
  nlohmann::ordered_json j;
  j["lambda_threshold"] = c.lambda_threshold;
  j["min_examples"] = c.min_examples;
  j["val_fraction"] = c.val_fraction;
  j["seed"] = c.seed;
  j["l2"] = c.l2;
  j["learning_rate"] = c.learning_rate;
  j["max_iters"] = c.max_iters;
  j["grad_tol"] = c.grad_tol;
  return j;
}

BankConfig ConfigFromJson(const nlohmann::json& j) {
  BankConfig c;
  c.lambda_threshold = j.at("lambda_threshold").get<double>();
  c.min_examples = j.at("min_examples").get<size_t>();
  c.val_fraction = j.at("val_fraction").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.l2 = j.at("l2").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_iters = j.at("max_iters").get<int>();
  c.grad_tol = j.at("grad_tol").get<double>();
  return c;
}

}  // namespace

void SaveConceptBank(const ConceptBank& bank, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const size_t p = bank.classifiers.size();
  const size_t k = bank.input_dim;
  FloatMatrix weights(p, k);
  std::vector<float> bias(p);
  nlohmann::ordered_json classifiers = nlohmann::ordered_json::array();
  for (size_t i = 0; i < p; ++i) {
    const auto& c = bank.classifiers[i];
    if (c.weights.size() != k) {
      throw Error(ErrorCode::kDimMismatch, "classifier width differs from bank input_dim");
    }
    std::copy(c.weights.begin(), c.weights.end(), weights.row(i).begin());
    bias[i] = c.bias;
    nlohmann::ordered_json entry;
    entry["concept_id"] = c.concept_id;
    entry["name"] = bank.concept_names[i];
    entry["val_accuracy"] = c.val_accuracy;
    entry["n_train"] = c.n_train;
    entry["n_val"] = c.n_val;
    classifiers.push_back(std::move(entry));
  }
  WriteArray(DenseArray::FromMatrix(weights), dir / "bank_weights.npy");
  WriteArray(DenseArray({static_cast<int64_t>(p)}, bias), dir / "bank_bias.npy");

  nlohmann::ordered_json j;
  j["pca_ref"] = bank.pca_ref;
  j["input_dim"] = k;
  j["config"] = ConfigToJson(bank.config);
  j["concept_names"] = bank.concept_names;
  j["classifiers"] = std::move(classifiers);
  j["weights_path"] = "bank_weights.npy";
  j["bias_path"] = "bank_bias.npy";
  WriteFileBytes(dir / "bank.json", j.dump(2) + "\n");
}

ConceptBank LoadConceptBank(const std::filesystem::path& bank_json) {
  const auto source = bank_json.string();
  ConceptBank bank;
  FloatMatrix weights;
  std::vector<float> bias;
  try {
    const auto j = nlohmann::json::parse(ReadFileBytes(bank_json));
    const auto dir = bank_json.parent_path();
    bank.pca_ref = j.at("pca_ref").get<std::string>();
    bank.input_dim = j.at("input_dim").get<size_t>();
    bank.config = ConfigFromJson(j.at("config"));
    bank.concept_names = j.at("concept_names").get<std::vector<std::string>>();
    weights = ReadArray(dir / j.at("weights_path").get<std::string>()).ToFloatMatrix();
    bias = ReadArray(dir / j.at("bias_path").get<std::string>()).f32();
    for (const auto& entry : j.at("classifiers")) {
      LinearClassifier c;
      c.concept_id = entry.at("concept_id").get<size_t>();
      c.val_accuracy = entry.at("val_accuracy").get<double>();
      c.n_train = entry.at("n_train").get<size_t>();
      c.n_val = entry.at("n_val").get<size_t>();
      bank.classifiers.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kManifestSchemaError, source + ": " + e.what());
  }
  const size_t p = bank.classifiers.size();
  if (bank.concept_names.size() != p || weights.rows() != p || bias.size() != p ||
      (p > 0 && weights.cols() != bank.input_dim)) {
    throw Error(ErrorCode::kShapeMismatch,
                source + ": classifier metadata and weight arrays disagree");
  }
  for (size_t i = 0; i < p; ++i) {
    auto row = weights.row(i);
    bank.classifiers[i].weights.assign(row.begin(), row.end());
    bank.classifiers[i].bias = bias[i];
  }
  return bank;
}

}  // namespace conceptree
