#include "conceptree/concept_bank.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "conceptree/status.h"
#include "oracles.h"
#include "test_util.h"

namespace conceptree {
namespace {

ProbeDataset ProbeWithCounts(size_t n_pos, size_t n_neg, size_t dim = 2) {
  ProbeDataset probe;
  probe.concept_names = {"c"};
  probe.activations = FloatMatrix(n_pos + n_neg, dim);
  probe.concept_labels = BitMatrix(n_pos + n_neg, 1);
  // Interleave so positives are not a prefix.
  size_t pos_left = n_pos;
  for (size_t r = 0; r < n_pos + n_neg; ++r) {
    const bool positive = pos_left > 0 && (r % 2 == 0 || r >= 2 * n_neg);
    probe.concept_labels(r, 0) = positive ? 1 : 0;
    if (positive) --pos_left;
    probe.activations(r, 0) = static_cast<float>(r);
  }
  return probe;
}

TEST(BalancedSetTest, UndersamplesNegatives) {
  const auto probe = ProbeWithCounts(5, 100);
  std::mt19937_64 rng(1);
  const auto set = BuildBalancedSet(probe, 0, rng);
  EXPECT_EQ(set.y.size(), 10u);
  EXPECT_EQ(std::count(set.y.begin(), set.y.end(), 1), 5);
}

TEST(BalancedSetTest, UndersamplesPositives) {
  const auto probe = ProbeWithCounts(7, 3);
  std::mt19937_64 rng(2);
  const auto set = BuildBalancedSet(probe, 0, rng);
  // min(7, 3) = 3 per side.
  EXPECT_EQ(set.y.size(), 6u);
  EXPECT_EQ(std::count(set.y.begin(), set.y.end(), 1), 3);
  EXPECT_EQ(std::count(set.y.begin(), set.y.end(), 0), 3);
}

TEST(BalancedSetTest, NoPositivesIsDegenerate) {
  const auto probe = ProbeWithCounts(0, 10);
  std::mt19937_64 rng(3);
  try {
    BuildBalancedSet(probe, 0, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConceptDegenerate);
  }
}

TEST(BalancedSetTest, OrderIsPositivesThenNegativesByIndex) {
  const auto probe = ProbeWithCounts(6, 20);
  std::mt19937_64 rng(4);
  const auto set = BuildBalancedSet(probe, 0, rng);
  const size_t half = set.y.size() / 2;
  for (size_t i = 0; i < set.y.size(); ++i) {
    EXPECT_EQ(set.y[i], i < half ? 1 : 0);
    EXPECT_EQ(probe.concept_labels(set.source_rows[i], 0), set.y[i]);
    EXPECT_EQ(set.x(i, 0), probe.activations(set.source_rows[i], 0));
    if (i != 0 && i != half) {
      EXPECT_LT(set.source_rows[i - 1], set.source_rows[i]);
    }
  }
}

TEST(BalancedSetTest, AlwaysExactlyBalancedOnRandomLabels) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 2 + rng() % 60;
    ProbeDataset probe;
    probe.concept_names = {"c"};
    probe.activations = FloatMatrix(n, 1);
    probe.concept_labels = BitMatrix(n, 1);
    const double rate = std::uniform_real_distribution<double>(0.02, 0.98)(rng);
    size_t pos = 0;
    for (size_t r = 0; r < n; ++r) {
      probe.concept_labels(r, 0) = std::bernoulli_distribution(rate)(rng) ? 1 : 0;
      pos += probe.concept_labels(r, 0);
    }
    if (pos == 0 || pos == n) continue;
    const auto set = BuildBalancedSet(probe, 0, rng);
    const auto n_pos = static_cast<size_t>(std::count(set.y.begin(), set.y.end(), 1));
    EXPECT_EQ(n_pos, set.y.size() - n_pos);
    EXPECT_EQ(n_pos, std::min(pos, n - pos));
    std::vector<size_t> rows = set.source_rows;
    std::sort(rows.begin(), rows.end());
    EXPECT_EQ(std::adjacent_find(rows.begin(), rows.end()), rows.end());
  }
}

TEST(ConceptSeedTest, DistinctPerConceptAndStable) {
  EXPECT_EQ(ConceptSeed(42, 3), ConceptSeed(42, 3));
  EXPECT_NE(ConceptSeed(42, 3), ConceptSeed(42, 4));
  EXPECT_NE(ConceptSeed(42, 3), ConceptSeed(43, 3));
}

TEST(LogisticTest, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 20; ++trial) {
    RowMatrix<double> x(10, 3);
    for (double& v : x.data()) v = gauss(rng);
    std::vector<uint8_t> y(10);
    for (auto& v : y) v = rng() & 1;
    std::vector<double> point = {gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
    const double l2 = 0.1;
    auto loss = [&](const std::vector<double>& p) {
      return LogisticLoss(x, y, std::span<const double>(p.data(), 3), p[3], l2);
    };
    const auto fd = oracle::CentralDifferences(loss, point, 1e-5);
    const auto grad =
        LogisticGradient(x, y, std::span<const double>(point.data(), 3), point[3], l2);
    for (size_t i = 0; i < 4; ++i) {
      const double rel =
          std::abs(grad[i] - fd[i]) / std::max({std::abs(grad[i]), std::abs(fd[i]), 1e-4});
      EXPECT_LT(rel, 1e-5) << "trial " << trial << " component " << i;
    }
  }
}

TEST(LogisticTest, LossAtZeroIsLogTwo) {
  RowMatrix<double> x(4, 2, 1.0);
  const std::vector<uint8_t> y = {0, 1, 1, 0};
  const std::vector<double> w = {0, 0};
  EXPECT_NEAR(LogisticLoss(x, y, w, 0.0, 1.0), std::log(2.0), 1e-15);
}

struct Clusters {
  FloatMatrix x;
  std::vector<uint8_t> y;
};

Clusters TwoClusters(size_t per_side, double separation, double spread, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  Clusters c{FloatMatrix(2 * per_side, 2), {}};
  for (size_t i = 0; i < 2 * per_side; ++i) {
    const bool pos = i < per_side;
    c.x(i, 0) = static_cast<float>((pos ? separation : -separation) + noise(rng));
    c.x(i, 1) = static_cast<float>(noise(rng));
    c.y.push_back(pos ? 1 : 0);
  }
  return c;
}

TEST(TrainClassifierTest, SeparableClustersReachPerfectAccuracy) {
  const auto data = TwoClusters(20, 5.0, 0.5, 7);
  BankConfig config;
  const auto c = TrainConceptClassifier(data.x, data.y, config, 1);
  EXPECT_EQ(c.val_accuracy, 1.0);
  EXPECT_EQ(c.n_train + c.n_val, 40u);
  EXPECT_EQ(c.n_val, 8u);
  EXPECT_GT(c.weights[0], 0.0f);
}

TEST(TrainClassifierTest, ZeroFeaturesGiveChanceAccuracy) {
  FloatMatrix x(40, 3, 0.0f);
  std::vector<uint8_t> y(40);
  for (size_t i = 0; i < 20; ++i) y[i] = 1;
  const auto c = TrainConceptClassifier(x, y, BankConfig{}, 2);
  EXPECT_EQ(c.val_accuracy, 0.5);
}

TEST(TrainClassifierTest, LossNeverIncreases) {
  BankConfig config;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = TwoClusters(50, 0.5, 1.0, seed);
    std::vector<double> trace;
    TrainConceptClassifier(data.x, data.y, config, seed, &trace);
    ASSERT_GT(trace.size(), 2u);
    for (size_t i = 1; i < trace.size(); ++i) {
      EXPECT_LE(trace[i], trace[i - 1] + 1e-15) << "iteration " << i;
    }
  }
}

TEST(TrainClassifierTest, StandardizationIsFoldedIntoRawWeights) {
  // Large offsets and scales: raw-space margins must still classify.
  auto data = TwoClusters(40, 3.0, 0.5, 8);
  for (size_t r = 0; r < data.x.rows(); ++r) {
    data.x(r, 0) = data.x(r, 0) * 100.0f + 1000.0f;
    data.x(r, 1) = data.x(r, 1) * 0.01f - 5.0f;
  }
  const auto c = TrainConceptClassifier(data.x, data.y, BankConfig{}, 3);
  size_t correct = 0;
  for (size_t r = 0; r < data.x.rows(); ++r) {
    const double margin = c.bias + double{c.weights[0]} * data.x(r, 0) +
                          double{c.weights[1]} * data.x(r, 1);
    correct += (margin >= 0) == (data.y[r] == 1);
  }
  EXPECT_EQ(correct, data.x.rows());
}

TEST(TrainClassifierTest, SingletonClassCannotBeSplit) {
  FloatMatrix x(5, 1);
  const std::vector<uint8_t> y = {1, 0, 0, 0, 0};
  try {
    TrainConceptClassifier(x, y, BankConfig{}, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClassSplit);
  }
}

TEST(TrainClassifierTest, SameSeedSameClassifier) {
  const auto data = TwoClusters(30, 1.0, 1.0, 9);
  const auto a = TrainConceptClassifier(data.x, data.y, BankConfig{}, 10);
  const auto b = TrainConceptClassifier(data.x, data.y, BankConfig{}, 10);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(a.val_accuracy, b.val_accuracy);
}

TEST(BankConfigTest, ValidatesRanges) {
  BankConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.lambda_threshold = 1.01;
  EXPECT_THROW(c.Validate(), Error);
  c = BankConfig{};
  c.val_fraction = 1.0;
  EXPECT_THROW(c.Validate(), Error);
}

std::vector<LinearClassifier> WithAccuracies(const std::vector<double>& accs) {
  std::vector<LinearClassifier> out;
  for (size_t i = 0; i < accs.size(); ++i) {
    LinearClassifier c;
    c.concept_id = i;
    c.weights = {1.0f};
    c.val_accuracy = accs[i];
    out.push_back(c);
  }
  return out;
}

std::vector<size_t> Ids(const ConceptBank& bank) {
  std::vector<size_t> ids;
  for (const auto& c : bank.classifiers) ids.push_back(c.concept_id);
  return ids;
}

TEST(FilterBankTest, ThresholdIsInclusive) {
  BankConfig config;
  const auto bank = FilterBank(WithAccuracies({0.80, 0.7499, 0.75}), config,
                               {"a", "b", "c"}, "pca");
  EXPECT_EQ(Ids(bank), (std::vector<size_t>{0, 2}));
  EXPECT_EQ(bank.concept_names, (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(bank.pca_ref, "pca");
}

TEST(FilterBankTest, EmptyInputGivesEmptyBank) {
  EXPECT_TRUE(FilterBank({}, BankConfig{}, {}, "").empty());
}

TEST(FilterBankTest, ZeroThresholdKeepsAll) {
  BankConfig config;
  config.lambda_threshold = 0.0;
  const auto bank = FilterBank(WithAccuracies({0.1, 0.0, 0.9}), config, {"a", "b", "c"}, "");
  EXPECT_EQ(Ids(bank), (std::vector<size_t>{0, 1, 2}));
}

TEST(FilterBankTest, MonotoneAndIdempotent) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> acc(0.4, 1.0);
  std::vector<double> accs(30);
  for (double& a : accs) a = acc(rng);
  std::vector<std::string> names(30, "x");
  std::vector<size_t> previous;
  for (double lambda = 0.0; lambda <= 1.0; lambda += 0.05) {
    BankConfig config;
    config.lambda_threshold = lambda;
    const auto bank = FilterBank(WithAccuracies(accs), config, names, "");
    const auto again = FilterBank(bank.classifiers, config, names, "");
    EXPECT_EQ(Ids(again), Ids(bank));
    const auto ids = Ids(bank);
    if (lambda > 0.0) {
      EXPECT_TRUE(std::includes(previous.begin(), previous.end(), ids.begin(), ids.end()));
    }
    previous = ids;
  }
}

TEST(BankReportTest, MeansOverAttemptedAndKept) {
  BankConfig config;
  const auto bank = FilterBank(WithAccuracies({1.0, 0.5}), config, {"a", "b"}, "");
  const std::vector<ConceptAttempt> attempted = {{0, "a", 10, 1.0}, {1, "b", 7, 0.5}};
  const auto report = MakeBankReport(bank, attempted);
  EXPECT_DOUBLE_EQ(*report.mean_accuracy_attempted, 0.75);
  EXPECT_DOUBLE_EQ(*report.mean_accuracy_kept, 1.0);
  EXPECT_EQ(report.ToCsv(),
            "concept,n_pos,val_accuracy,kept\n"
            "a,10,1.000000,1\n"
            "b,7,0.500000,0\n");
}

TEST(BankReportTest, SortedByDescendingAccuracy) {
  const std::vector<ConceptAttempt> attempted = {
      {0, "a", 1, 0.8}, {1, "b", 1, 0.95}, {2, "c", 1, 0.8}};
  const auto report = MakeBankReport(ConceptBank{}, attempted);
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].concept_name, "b");
  EXPECT_EQ(report.rows[1].concept_name, "a");
  EXPECT_EQ(report.rows[2].concept_name, "c");
  EXPECT_FALSE(report.mean_accuracy_kept.has_value());
}

ProbeDataset PlantedProbe(size_t n, size_t concepts, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  ProbeDataset probe;
  probe.preproc_id = "planted";
  probe.activations = FloatMatrix(n, concepts);
  probe.concept_labels = BitMatrix(n, concepts);
  for (size_t c = 0; c < concepts; ++c) probe.concept_names.push_back("c" + std::to_string(c));
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < concepts; ++c) {
      const bool on = (rng() % (c + 2)) == 0;
      probe.concept_labels(r, c) = on;
      probe.activations(r, c) = static_cast<float>((on ? 1.0 : 0.0) + noise(rng));
    }
  }
  return probe;
}

TEST(TrainBankTest, TrainsFiltersAndSkips) {
  auto probe = PlantedProbe(400, 5, 12);
  // Concept 4 never present.
  for (size_t r = 0; r < 400; ++r) probe.concept_labels(r, 4) = 0;
  BankConfig config;
  config.min_examples = 100;
  const auto result = TrainBank(probe, config);
  ASSERT_EQ(result.skipped.size(), 1u);
  EXPECT_EQ(result.skipped[0].concept_id, 4u);
  EXPECT_EQ(result.attempted.size(), 4u);
  EXPECT_EQ(result.bank.pca_ref, "planted");
  for (const auto& c : result.bank.classifiers) {
    EXPECT_GE(c.val_accuracy, config.lambda_threshold);
  }
}

TEST(TrainBankTest, MinExamplesAppliesToBalancedCount) {
  const auto probe = PlantedProbe(400, 3, 13);
  BankConfig config;
  config.min_examples = 1000;
  const auto result = TrainBank(probe, config);
  EXPECT_TRUE(result.attempted.empty());
  EXPECT_EQ(result.skipped.size(), 3u);
  EXPECT_TRUE(result.bank.empty());
}

TEST(TrainBankTest, IdenticalAcrossThreadCounts) {
  const auto probe = PlantedProbe(300, 7, 14);
  BankConfig config;
  config.min_examples = 10;
  config.seed = 99;
  const auto serial = TrainBank(probe, config, 1);
  for (int threads : {2, 3, 7}) {
    const auto parallel = TrainBank(probe, config, threads);
    ASSERT_EQ(parallel.all_classifiers.size(), serial.all_classifiers.size());
    for (size_t i = 0; i < serial.all_classifiers.size(); ++i) {
      EXPECT_EQ(parallel.all_classifiers[i].weights, serial.all_classifiers[i].weights);
      EXPECT_EQ(parallel.all_classifiers[i].bias, serial.all_classifiers[i].bias);
      EXPECT_EQ(parallel.all_classifiers[i].val_accuracy,
                serial.all_classifiers[i].val_accuracy);
    }
  }
}

TEST(BankIoTest, SaveLoadRoundTrip) {
  testing::TempDir dir;
  const auto probe = PlantedProbe(300, 4, 15);
  BankConfig config;
  config.min_examples = 10;
  const auto bank = TrainBank(probe, config).bank;
  ASSERT_FALSE(bank.empty());
  SaveConceptBank(bank, dir.path());
  const auto back = LoadConceptBank(dir / "bank.json");
  EXPECT_EQ(back.concept_names, bank.concept_names);
  EXPECT_EQ(back.pca_ref, bank.pca_ref);
  EXPECT_EQ(back.input_dim, bank.input_dim);
  ASSERT_EQ(back.classifiers.size(), bank.classifiers.size());
  for (size_t i = 0; i < bank.classifiers.size(); ++i) {
    EXPECT_EQ(back.classifiers[i].weights, bank.classifiers[i].weights);
    EXPECT_EQ(back.classifiers[i].bias, bank.classifiers[i].bias);
    EXPECT_EQ(back.classifiers[i].concept_id, bank.classifiers[i].concept_id);
    EXPECT_EQ(back.classifiers[i].val_accuracy, bank.classifiers[i].val_accuracy);
  }
  EXPECT_EQ(back.config.seed, config.seed);
}

}  // namespace
}  // namespace conceptree
