#include "conceptree/synthetic.h"

#include <gtest/gtest.h>

#include <cmath>

#include "conceptree/array_io.h"
#include "conceptree/cart.h"
#include "conceptree/status.h"
#include "test_util.h"

namespace conceptree {
namespace {

PlantedSpec Small() {
  PlantedSpec spec;
  spec.n_probe = 200;
  spec.n_task = 100;
  spec.p_concepts = 5;
  spec.d_activation = 16;
  spec.seed = 3;
  return spec;
}

TEST(DecisionListTest, Depth3RuleCases) {
  const auto rule = Depth3Rule();
  const std::vector<unsigned char> both = {1, 1, 0};
  const std::vector<unsigned char> c2 = {1, 0, 1};
  const std::vector<unsigned char> none = {0, 1, 0};
  const std::vector<unsigned char> all = {1, 1, 1};
  EXPECT_EQ(rule.Evaluate(both), 0);
  EXPECT_EQ(rule.Evaluate(all), 0);
  EXPECT_EQ(rule.Evaluate(c2), 1);
  EXPECT_EQ(rule.Evaluate(none), 2);
}

TEST(GeneratePlantedTest, ShapesNamesAndLabels) {
  const auto spec = Small();
  const auto data = GeneratePlanted(spec);
  EXPECT_EQ(data.probe.activations.rows(), 200u);
  EXPECT_EQ(data.probe.activations.cols(), 16u);
  EXPECT_EQ(data.probe.concept_labels.cols(), 5u);
  EXPECT_EQ(data.probe.concept_names[4], "concept_04");
  EXPECT_EQ(data.task.activations.rows(), 100u);
  EXPECT_EQ(data.task.class_names, (std::vector<std::string>{"class_00", "class_01", "class_02"}));
  for (size_t r = 0; r < 100; ++r) {
    EXPECT_EQ(data.task.predictions[r], spec.rule.Evaluate(data.task_concepts.row(r)));
  }
}

TEST(GeneratePlantedTest, NoiselessActivationsAreEmbeddedBits) {
  const auto spec = Small();
  const auto data = GeneratePlanted(spec);
  for (size_t r = 0; r < 20; ++r) {
    for (size_t i = 0; i < spec.d_activation; ++i) {
      double v = 0.0;
      for (size_t j = 0; j < spec.p_concepts; ++j) {
        v += double{data.embedding(i, j)} * data.probe.concept_labels(r, j);
      }
      EXPECT_NEAR(data.probe.activations(r, i), v, 1e-5);
    }
  }
}

TEST(GeneratePlantedTest, EmbeddingHasOrthonormalColumns) {
  const auto data = GeneratePlanted(Small());
  const auto& e = data.embedding;
  for (size_t a = 0; a < e.cols(); ++a) {
    for (size_t b = 0; b < e.cols(); ++b) {
      double dot = 0.0;
      for (size_t i = 0; i < e.rows(); ++i) dot += double{e(i, a)} * e(i, b);
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-6);
    }
  }
}

TEST(GeneratePlantedTest, BitsAreRoughlyFairCoins) {
  auto spec = Small();
  spec.n_probe = 4000;
  const auto data = GeneratePlanted(spec);
  for (size_t j = 0; j < spec.p_concepts; ++j) {
    double on = 0;
    for (size_t r = 0; r < spec.n_probe; ++r) on += data.probe.concept_labels(r, j);
    EXPECT_NEAR(on / 4000.0, 0.5, 0.05);
  }
}

TEST(GeneratePlantedTest, SameSeedSameBytes) {
  testing::TempDir a, b;
  const auto spec = Small();
  WritePlanted(spec, GeneratePlanted(spec), a.path());
  WritePlanted(spec, GeneratePlanted(spec), b.path());
  for (const char* file : {"probe/probe.json", "probe/activations.npy",
                           "probe/concept_labels.npy", "task/task.json",
                           "task/activations.npy", "task/predictions.npy",
                           "ground_truth/task_concepts.npy", "ground_truth/spec.json"}) {
    EXPECT_EQ(ReadFileBytes(a / file), ReadFileBytes(b / file)) << file;
  }
  auto other = spec;
  other.seed = 4;
  testing::TempDir c;
  WritePlanted(other, GeneratePlanted(other), c.path());
  EXPECT_NE(ReadFileBytes(a / "probe/activations.npy"),
            ReadFileBytes(c / "probe/activations.npy"));
}

TEST(GeneratePlantedTest, WrittenManifestsLoad) {
  testing::TempDir dir;
  const auto spec = Small();
  const auto data = GeneratePlanted(spec);
  WritePlanted(spec, data, dir.path());
  const auto probe = LoadProbeDataset(dir / "probe/probe.json");
  EXPECT_EQ(probe.activations, data.probe.activations);
  EXPECT_EQ(probe.concept_labels, data.probe.concept_labels);
  const auto task = LoadTaskDataset(dir / "task/task.json");
  EXPECT_EQ(task.predictions, data.task.predictions);
}

TEST(GeneratePlantedTest, ConstantRuleIsFitByARootLeaf) {
  auto spec = Small();
  spec.rule = DecisionList{{}, 1};
  const auto data = GeneratePlanted(spec);
  ConceptVectorDataset concepts;
  concepts.matrix = data.task_concepts;
  concepts.targets = data.task.predictions;
  concepts.class_names = data.task.class_names;
  TreeConfig config;
  config.max_depth = 0;
  const auto tree = FitTree(concepts, config);
  EXPECT_EQ(tree.num_nodes(), 1u);
  EXPECT_EQ(Fidelity(tree, concepts), 1.0);
}

TEST(GeneratePlantedTest, TrueBitsRecoverTheRuleAtDepthThree) {
  auto spec = Small();
  spec.n_task = 2000;
  const auto data = GeneratePlanted(spec);
  ConceptVectorDataset concepts;
  concepts.matrix = data.task_concepts;
  concepts.targets = data.task.predictions;
  concepts.class_names = data.task.class_names;
  TreeConfig config;
  config.max_depth = 3;
  EXPECT_EQ(Fidelity(FitTree(concepts, config), concepts), 1.0);
}

void ExpectInvalid(const PlantedSpec& spec) {
  try {
    spec.Validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSpecInvalid);
  }
}

TEST(PlantedSpecTest, InvalidSpecs) {
  auto spec = Small();
  spec.d_activation = 4;
  ExpectInvalid(spec);
  spec = Small();
  spec.noise_sigma = -1.0;
  ExpectInvalid(spec);
  spec = Small();
  spec.noise_sigma = NAN;
  ExpectInvalid(spec);
  spec = Small();
  spec.num_classes = 2;  // Depth3Rule emits class 2
  ExpectInvalid(spec);
  spec = Small();
  spec.rule.clauses.push_back({{{7, true}}, 0});
  ExpectInvalid(spec);
  spec = Small();
  spec.p_concepts = 0;
  ExpectInvalid(spec);
}

TEST(PlantedSpecTest, JsonRoundTrip) {
  auto spec = Small();
  spec.noise_sigma = 0.5;
  const auto text = PlantedSpecToJson(spec);
  const auto back = PlantedSpecFromJson(text);
  EXPECT_EQ(PlantedSpecToJson(back), text);
  EXPECT_EQ(back.n_probe, spec.n_probe);
  EXPECT_EQ(back.noise_sigma, 0.5);
  ASSERT_EQ(back.rule.clauses.size(), 2u);
  EXPECT_EQ(back.rule.default_label, 2);
  EXPECT_THROW(PlantedSpecFromJson(R"({"n_probe": 10, "bogus": 1})"), Error);
}

}  // namespace
}  // namespace conceptree
