#include "conceptree/preprocess.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "conceptree/array_io.h"
#include "conceptree/status.h"
#include "oracles.h"
#include "test_util.h"

namespace conceptree {
namespace {

TEST(SpatialAverageTest, AveragesEachChannel) {
  const std::vector<float> t = {1, 3, 5, 7};
  EXPECT_EQ(SpatialAverage(t, 1, 2, 2), std::vector<float>{4.0f});
}

TEST(SpatialAverageTest, OneByOneIsIdentity) {
  const std::vector<float> t = {0.5f, -2.0f, 9.0f};
  EXPECT_EQ(SpatialAverage(t, 3, 1, 1), t);
}

TEST(SpatialAverageTest, ConstantChannels) {
  const std::vector<float> t = {0, 0, 0, 0, 5, 5, 5, 5};
  EXPECT_EQ(SpatialAverage(t, 2, 2, 2), (std::vector<float>{0.0f, 5.0f}));
}

TEST(SpatialAverageTest, EmptyExtentIsAnError) {
  try {
    SpatialAverage({}, 2, 0, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptySpatialExtent);
  }
}

TEST(SpatialAverageTest, PoolsRowsOfSpatialActivations) {
  FloatMatrix acts(2, 4, std::vector<float>{1, 3, 10, 20, 0, 0, 2, 2});
  const auto pooled = PoolActivations(acts, {2, 1, 2});
  EXPECT_EQ(pooled, FloatMatrix(2, 2, std::vector<float>{2, 15, 0, 2}));
  EXPECT_EQ(PoolActivations(acts, {4}), acts);
}

FloatMatrix LineData() {
  FloatMatrix x(5, 2);
  for (int t = -2; t <= 2; ++t) {
    x(static_cast<size_t>(t + 2), 0) = static_cast<float>(t);
    x(static_cast<size_t>(t + 2), 1) = static_cast<float>(2 * t);
  }
  return x;
}

TEST(PcaFitTest, LineDataHasClosedFormAxis) {
  // Covariance [[2.5, 5], [5, 10]] has eigenvector (1,2)/sqrt5 with eigenvalue
  // 12.5 and an orthogonal null direction.
  const auto model = PcaFit(LineData(), 2);
  const double inv_sqrt5 = 1.0 / std::sqrt(5.0);
  EXPECT_NEAR(model.components(0, 0), inv_sqrt5, 1e-6);
  EXPECT_NEAR(model.components(0, 1), 2 * inv_sqrt5, 1e-6);
  EXPECT_NEAR(model.explained_variance[0], 12.5, 1e-9);
  EXPECT_NEAR(model.explained_variance[1], 0.0, 1e-9);
}

TEST(PcaFitTest, ProjectsLinePointOntoAxis) {
  const auto model = PcaFit(LineData(), 1);
  const auto z = PcaTransform(model, FloatMatrix(1, 2, std::vector<float>{2, 4}));
  EXPECT_NEAR(z(0, 0), 2.0 * std::sqrt(5.0), 1e-5);
}

TEST(PcaFitTest, IdenticalRowsGiveZeroVariance) {
  FloatMatrix x(4, 3);
  for (size_t r = 0; r < 4; ++r) {
    x(r, 0) = 1.5f;
    x(r, 1) = -2.0f;
    x(r, 2) = 7.0f;
  }
  const auto model = PcaFit(x, 1);
  EXPECT_EQ(model.explained_variance[0], 0.0);
  EXPECT_EQ(model.mean, (std::vector<float>{1.5f, -2.0f, 7.0f}));
}

TEST(PcaFitTest, RejectsTooFewRowsAndBadK) {
  try {
    PcaFit(FloatMatrix(1, 3), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateInput);
  }
  EXPECT_THROW(PcaFit(FloatMatrix(5, 3), 4), Error);
  EXPECT_THROW(PcaFit(FloatMatrix(5, 3), 0), Error);
}

TEST(PcaFitTest, FullRankRoundTripReconstructs) {
  std::mt19937_64 rng(3);
  const auto x = testing::RandomGaussian(40, 6, rng);
  const auto model = PcaFit(x, 6);
  const auto back = PcaInverseTransform(model, PcaTransform(model, x));
  for (size_t i = 0; i < x.data().size(); ++i) {
    EXPECT_NEAR(back.data()[i], x.data()[i], 1e-5);
  }
}

TEST(PcaFitTest, ComponentsAreOrthonormalAndSignNormalized) {
  std::mt19937_64 rng(4);
  const auto x = testing::RandomGaussian(30, 8, rng);
  const auto model = PcaFit(x, 5);
  for (size_t i = 0; i < 5; ++i) {
    size_t pivot = 0;
    for (size_t c = 0; c < 8; ++c) {
      if (std::abs(model.components(i, c)) > std::abs(model.components(i, pivot))) pivot = c;
    }
    EXPECT_GT(model.components(i, pivot), 0.0f);
    for (size_t j = 0; j < 5; ++j) {
      double dot = 0;
      for (size_t c = 0; c < 8; ++c) dot += double{model.components(i, c)} * model.components(j, c);
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-6);
    }
    if (i > 0) {
      EXPECT_LE(model.explained_variance[i], model.explained_variance[i - 1]);
    }
    EXPECT_GE(model.explained_variance[i], 0.0);
  }
}

TEST(PcaFitTest, ProjectedVariancesMatchExplainedVariance) {
  std::mt19937_64 rng(5);
  auto x = testing::RandomGaussian(60, 5, rng);
  for (size_t r = 0; r < x.rows(); ++r) x(r, 2) = 3.0f * x(r, 0) + 0.1f * x(r, 2);
  const auto model = PcaFit(x, 4);
  const auto z = PcaTransform(model, x);
  for (size_t j = 0; j < 4; ++j) {
    double mean = 0, var = 0;
    for (size_t r = 0; r < z.rows(); ++r) mean += z(r, j);
    mean /= static_cast<double>(z.rows());
    for (size_t r = 0; r < z.rows(); ++r) var += (z(r, j) - mean) * (z(r, j) - mean);
    var /= static_cast<double>(z.rows() - 1);
    EXPECT_NEAR(var, model.explained_variance[j], 1e-4 * model.explained_variance[j]);
  }
}

TEST(PcaFitTest, MatchesCovarianceEigenOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    auto x = testing::RandomGaussian(50, 5, rng);
    // Distinct per-axis scales keep the eigenvalues well separated.
    for (size_t r = 0; r < 50; ++r) {
      for (size_t c = 0; c < 5; ++c) x(r, c) *= static_cast<float>(5 - c);
    }
    const auto model = PcaFit(x, 5);
    const auto oracle = oracle::CovarianceEigen(x);
    for (size_t j = 0; j < 5; ++j) {
      EXPECT_LT(oracle::LineAngle(oracle.vectors[j], model.components.row(j)), 1e-5);
      EXPECT_NEAR(model.explained_variance[j], oracle.values[j],
                  1e-9 * oracle.values[0]);
    }
  }
}

TEST(PcaFitTest, FitIsDeterministic) {
  std::mt19937_64 rng(7);
  const auto x = testing::RandomGaussian(100, 12, rng);
  const auto a = PcaFit(x, 6);
  const auto b = PcaFit(x, 6);
  EXPECT_EQ(a.components, b.components);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.explained_variance, b.explained_variance);
  EXPECT_EQ(a.Id(), b.Id());
}

TEST(PcaTransformTest, FittedMeanMapsToZero) {
  std::mt19937_64 rng(8);
  const auto x = testing::RandomGaussian(20, 4, rng);
  const auto model = PcaFit(x, 3);
  const auto z = PcaTransform(model, FloatMatrix(1, 4, model.mean));
  for (float v : z.data()) EXPECT_NEAR(v, 0.0f, 1e-6);
}

TEST(PcaTransformTest, IdentityComponentsLeaveDataUnchanged) {
  PcaModel model;
  model.mean = {0, 0, 0};
  model.components = FloatMatrix(3, 3, std::vector<float>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  model.explained_variance = {1, 1, 1};
  const FloatMatrix x(2, 3, std::vector<float>{1, -2, 3, 4.5f, 5, -6});
  EXPECT_EQ(PcaTransform(model, x), x);
}

TEST(PcaTransformTest, DimMismatchIsAnError) {
  const auto model = PcaFit(LineData(), 1);
  try {
    PcaTransform(model, FloatMatrix(1, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimMismatch);
  }
}

TEST(PcaTransformTest, ThreadCountDoesNotChangeOutput) {
  std::mt19937_64 rng(9);
  const auto x = testing::RandomGaussian(257, 10, rng);
  const auto model = PcaFit(x, 4);
  const auto serial = PcaTransform(model, x, 1);
  EXPECT_EQ(PcaTransform(model, x, 3), serial);
  EXPECT_EQ(PcaTransform(model, x, 8), serial);
}

TEST(PcaModelIoTest, SaveLoadPreservesModelAndId) {
  testing::TempDir dir;
  std::mt19937_64 rng(10);
  const auto model = PcaFit(testing::RandomGaussian(30, 7, rng), 3);
  SavePcaModel(model, dir.path());
  const auto back = LoadPcaModel(dir / "pca.json");
  EXPECT_EQ(back.components, model.components);
  EXPECT_EQ(back.mean, model.mean);
  EXPECT_EQ(back.explained_variance, model.explained_variance);
  EXPECT_EQ(back.Id(), model.Id());
}

TEST(PcaModelIoTest, TamperedArraysFailIdCheck) {
  testing::TempDir dir;
  std::mt19937_64 rng(12);
  auto model = PcaFit(testing::RandomGaussian(30, 7, rng), 3);
  SavePcaModel(model, dir.path());
  model.mean[0] += 1.0f;
  const auto json = ReadFileBytes(dir / "pca.json");
  SavePcaModel(model, dir.path());
  WriteFileBytes(dir / "pca.json", json);
  try {
    LoadPcaModel(dir / "pca.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPreprocMismatch);
  }
}

}  // namespace
}  // namespace conceptree
