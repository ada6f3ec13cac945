#include "conceptree/preprocess.h"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include "conceptree/array_io.h"
#include "conceptree/hash.h"
#include "conceptree/parallel.h"
#include "conceptree/status.h"
#include "json.hpp"

namespace conceptree {

std::string PcaModel::Id() const {
  const auto mean_bytes = EncodeNpy(DenseArray({static_cast<int64_t>(mean.size())}, mean));
  const auto comp_bytes = EncodeNpy(DenseArray::FromMatrix(components));
  return Sha256Hex(mean_bytes + comp_bytes);
}

std::vector<float> SpatialAverage(std::span<const float> tensor, int64_t channels,
                                  int64_t height, int64_t width) {
  if (height * width == 0) {
    throw Error(ErrorCode::kEmptySpatialExtent,
                "spatial extent " + std::to_string(height) + "x" +
                    std::to_string(width) + " has no entries");
  }
  const auto plane = static_cast<size_t>(height * width);
  if (tensor.size() != static_cast<size_t>(channels) * plane) {
    throw Error(ErrorCode::kDimMismatch, "tensor size does not match C*H*W");
  }
  std::vector<float> out(static_cast<size_t>(channels));
  for (size_t c = 0; c < out.size(); ++c) {
    double sum = 0.0;
    for (float v : tensor.subspan(c * plane, plane)) sum += v;
    out[c] = static_cast<float>(sum / static_cast<double>(plane));
  }
  return out;
}

FloatMatrix PoolActivations(const FloatMatrix& activations,
                            const std::vector<int64_t>& feature_shape) {
  if (feature_shape.size() != 3) return activations;
  const int64_t channels = feature_shape[0];
  FloatMatrix pooled(activations.rows(), static_cast<size_t>(channels));
  for (size_t r = 0; r < activations.rows(); ++r) {
    const auto avg = SpatialAverage(activations.row(r), channels, feature_shape[1],
                                    feature_shape[2]);
    std::copy(avg.begin(), avg.end(), pooled.row(r).begin());
  }
  return pooled;
}

PcaModel PcaFit(const FloatMatrix& x, size_t k) {
  const size_t n = x.rows();
  const size_t d = x.cols();
  if (n < 2) {
    throw Error(ErrorCode::kDegenerateInput,
                "PCA needs at least 2 rows, got " + std::to_string(n));
  }
  if (k < 1 || k > std::min(n, d)) {
    throw Error(ErrorCode::kInvalidConfig,
                "PCA target dim " + std::to_string(k) + " outside [1, min(n=" +
                    std::to_string(n) + ", d=" + std::to_string(d) + ")]");
  }

  Eigen::MatrixXd centered(n, d);
  for (size_t r = 0; r < n; ++r) {
    for (size_t c = 0; c < d; ++c) centered(r, c) = x(r, c);
  }
  const Eigen::RowVectorXd mean = centered.colwise().mean();
  centered.rowwise() -= mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& singular = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();

  PcaModel model;
  model.mean.resize(d);
  for (size_t c = 0; c < d; ++c) model.mean[c] = static_cast<float>(mean(c));
  model.components = FloatMatrix(k, d);
  model.explained_variance.resize(k);
  for (size_t j = 0; j < k; ++j) {
    Eigen::VectorXd axis = v.col(static_cast<Eigen::Index>(j));
    Eigen::Index pivot = 0;
    for (Eigen::Index c = 1; c < axis.size(); ++c) {
      if (std::abs(axis(c)) > std::abs(axis(pivot))) pivot = c;
    }
    if (axis(pivot) < 0) axis = -axis;
    for (size_t c = 0; c < d; ++c) {
      model.components(j, c) = static_cast<float>(axis(static_cast<Eigen::Index>(c)));
    }
    const double s = singular(static_cast<Eigen::Index>(j));
    model.explained_variance[j] = s * s / static_cast<double>(n - 1);
  }
  return model;
}

FloatMatrix PcaTransform(const PcaModel& model, const FloatMatrix& x,
                         int num_threads) {
  if (x.cols() != model.input_dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "PCA expects " + std::to_string(model.input_dim()) +
                    " input columns, got " + std::to_string(x.cols()));
  }
  const size_t k = model.output_dim();
  const size_t d = model.input_dim();
  FloatMatrix out(x.rows(), k);
  ParallelFor(x.rows(), num_threads, [&](size_t begin, size_t end) {
    std::vector<double> centered(d);
    for (size_t r = begin; r < end; ++r) {
      const auto row = x.row(r);
      for (size_t c = 0; c < d; ++c) {
        centered[c] = static_cast<double>(row[c]) - model.mean[c];
      }
      for (size_t j = 0; j < k; ++j) {
        const auto axis = model.components.row(j);
        double dot = 0.0;
        for (size_t c = 0; c < d; ++c) dot += centered[c] * axis[c];
        out(r, j) = static_cast<float>(dot);
      }
    }
  });
  return out;
}

FloatMatrix PcaInverseTransform(const PcaModel& model, const FloatMatrix& z) {
  if (z.cols() != model.output_dim()) {
    throw Error(ErrorCode::kDimMismatch, "inverse transform width mismatch");
  }
  const size_t d = model.input_dim();
  FloatMatrix out(z.rows(), d);
  std::vector<double> acc(d);
  for (size_t r = 0; r < z.rows(); ++r) {
    for (size_t c = 0; c < d; ++c) acc[c] = model.mean[c];
    for (size_t j = 0; j < z.cols(); ++j) {
      const double w = z(r, j);
      const auto axis = model.components.row(j);
      for (size_t c = 0; c < d; ++c) acc[c] += w * axis[c];
    }
    for (size_t c = 0; c < d; ++c) out(r, c) = static_cast<float>(acc[c]);
  }
  return out;
}

FloatMatrix ReduceActivations(const PcaModel& model, const FloatMatrix& activations,
                              const std::vector<int64_t>& feature_shape,
                              int num_threads) {
  return PcaTransform(model, PoolActivations(activations, feature_shape),
                      num_threads);
}

void SavePcaModel(const PcaModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteArray(DenseArray({static_cast<int64_t>(model.mean.size())}, model.mean),
             dir / "pca_mean.npy");
  WriteArray(DenseArray::FromMatrix(model.components), dir / "pca_components.npy");
  nlohmann::ordered_json j;
  j["id"] = model.Id();
  j["input_dim"] = model.input_dim();
  j["output_dim"] = model.output_dim();
  j["explained_variance"] = model.explained_variance;
  j["mean_path"] = "pca_mean.npy";
  j["components_path"] = "pca_components.npy";
  WriteFileBytes(dir / "pca.json", j.dump(2) + "\n");
}

PcaModel LoadPcaModel(const std::filesystem::path& sidecar_path) {
  const auto source = sidecar_path.string();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFileBytes(sidecar_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kManifestSchemaError, source + ": " + e.what());
  }
  const auto dir = sidecar_path.parent_path();
  PcaModel model;
  size_t d = 0, k = 0;
  std::string stored_id;
  try {
    model.mean = ReadArray(dir / j.at("mean_path").get<std::string>()).f32();
    model.components =
        ReadArray(dir / j.at("components_path").get<std::string>()).ToFloatMatrix();
    model.explained_variance = j.at("explained_variance").get<std::vector<double>>();
    d = j.at("input_dim").get<size_t>();
    k = j.at("output_dim").get<size_t>();
    stored_id = j.at("id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kManifestSchemaError, source + ": " + e.what());
  }
  if (model.input_dim() != d || model.output_dim() != k ||
      model.components.cols() != d || model.explained_variance.size() != k) {
    throw Error(ErrorCode::kShapeMismatch,
                source + ": stored arrays disagree with input_dim/output_dim");
  }
  if (model.Id() != stored_id) {
    throw Error(ErrorCode::kPreprocMismatch,
                source + ": arrays do not hash to the recorded id");
  }
  return model;
}

}  // namespace conceptree
