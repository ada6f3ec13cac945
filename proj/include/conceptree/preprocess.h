#ifndef CONCEPTREE_PREPROCESS_H_
#define CONCEPTREE_PREPROCESS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "conceptree/matrix.h"

namespace conceptree {

inline constexpr size_t kDefaultPcaDim = 64;

// Centering + orthogonal projection fit on probe activations and replayed,
// never refit, on task activations.
struct PcaModel {
  std::vector<float> mean;                  // input_dim
  FloatMatrix components;                   // output_dim x input_dim
  std::vector<double> explained_variance;   // output_dim, non-increasing

  size_t input_dim() const { return mean.size(); }
  size_t output_dim() const { return components.rows(); }

  // Content hash of (mean, components). Links every downstream artifact to
  // the exact transform that produced its inputs.
  std::string Id() const;
};

// Mean over the H x W entries of each channel of a C x H x W tensor.
std::vector<float> SpatialAverage(std::span<const float> tensor, int64_t channels,
                                  int64_t height, int64_t width);

// Applies SpatialAverage to every row when `feature_shape` is [C,H,W]; rows of
// a rank-1 feature shape are returned unchanged.
FloatMatrix PoolActivations(const FloatMatrix& activations,
                            const std::vector<int64_t>& feature_shape);

// Top-k principal axes of the row-centered data via thin SVD. Each component
// is sign-normalized so its largest-magnitude entry is positive (ties resolved
// by the lowest index). Variances use the n-1 denominator.
PcaModel PcaFit(const FloatMatrix& x, size_t k);

FloatMatrix PcaTransform(const PcaModel& model, const FloatMatrix& x,
                         int num_threads = 1);
FloatMatrix PcaInverseTransform(const PcaModel& model, const FloatMatrix& z);

// Pooling (if spatial) followed by projection.
FloatMatrix ReduceActivations(const PcaModel& model, const FloatMatrix& activations,
                              const std::vector<int64_t>& feature_shape,
                              int num_threads = 1);

// pca.json sidecar + pca_mean.npy + pca_components.npy inside `dir`.
void SavePcaModel(const PcaModel& model, const std::filesystem::path& dir);
PcaModel LoadPcaModel(const std::filesystem::path& sidecar_path);

}  // namespace conceptree

#endif  // CONCEPTREE_PREPROCESS_H_
