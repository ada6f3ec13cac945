#ifndef CONCEPTREE_ARRAY_IO_H_
#define CONCEPTREE_ARRAY_IO_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "conceptree/matrix.h"

namespace conceptree {

enum class DType { kF32, kU8, kI32 };

std::string_view DTypeDescr(DType dtype);

// An n-d array of rank 1..4 as stored in an NPY v1.0 file. Data is always
// row-major in memory.
class DenseArray {
 public:
  using Buffer = std::variant<std::vector<float>, std::vector<uint8_t>,
                              std::vector<int32_t>>;

  DenseArray() : DenseArray(std::vector<int64_t>{0}, std::vector<float>{}) {}
  DenseArray(std::vector<int64_t> shape, Buffer data);

  static DenseArray FromMatrix(const FloatMatrix& m);
  static DenseArray FromMatrix(const BitMatrix& m);

  DType dtype() const;
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t size() const;

  const std::vector<float>& f32() const;
  const std::vector<uint8_t>& u8() const;
  const std::vector<int32_t>& i32() const;
  const Buffer& buffer() const { return data_; }

  // Collapses all trailing extents into columns: shape [n, a, b] -> n x a*b.
  FloatMatrix ToFloatMatrix() const;
  BitMatrix ToBitMatrix() const;

  // Bit-level equality (NaN payloads and signed zeros included).
  friend bool operator==(const DenseArray& a, const DenseArray& b);

 private:
  std::vector<int64_t> shape_;
  Buffer data_;
};

// NPY v1.0 codec. `source` names the file in error messages.
std::string EncodeNpy(const DenseArray& array);
DenseArray DecodeNpy(std::string_view bytes, std::string_view source);

DenseArray ReadArray(const std::filesystem::path& path);
void WriteArray(const DenseArray& array, const std::filesystem::path& path);

// Small file helpers shared by the pipeline stages.
std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes);

enum class DatasetKind { kProbe, kTask };

struct DatasetManifest {
  int format_version = 1;
  DatasetKind kind = DatasetKind::kProbe;
  std::string layer_name;
  int64_t n = 0;
  std::vector<int64_t> feature_shape;
  std::string activations_path;
  // Probe only.
  std::vector<std::string> concept_names;
  std::string concept_labels_path;
  // Task only.
  std::string predictions_path;
  std::vector<std::string> class_names;
  std::optional<std::string> ground_truth_path;
};

inline constexpr int kManifestFormatVersion = 1;

DatasetManifest ParseManifest(std::string_view json_text,
                              std::string_view source);
std::string SerializeManifest(const DatasetManifest& manifest);

// Concept-labelled activations D. `activations` is n x prod(feature_shape).
// `preproc_id` identifies the PcaModel applied, empty for raw activations.
struct ProbeDataset {
  std::string layer_name;
  std::vector<int64_t> feature_shape;
  FloatMatrix activations;
  std::vector<std::string> concept_names;
  BitMatrix concept_labels;
  std::string preproc_id;

  size_t num_samples() const { return activations.rows(); }
  size_t num_concepts() const { return concept_names.size(); }
};

// Task-set activations A together with the model's own predictions.
struct TaskActivationSet {
  std::string layer_name;
  std::vector<int64_t> feature_shape;
  FloatMatrix activations;
  std::vector<int32_t> predictions;
  std::vector<std::string> class_names;
  std::optional<std::vector<int32_t>> ground_truth;
  std::string preproc_id;

  size_t num_samples() const { return activations.rows(); }
};

using LoadedDataset = std::variant<ProbeDataset, TaskActivationSet>;

// Array paths in the manifest are resolved relative to its directory.
LoadedDataset LoadDataset(const std::filesystem::path& manifest_path);
ProbeDataset LoadProbeDataset(const std::filesystem::path& manifest_path);
TaskActivationSet LoadTaskDataset(const std::filesystem::path& manifest_path);

// Writes the arrays under `dir` with fixed file names plus `manifest_name`.
void SaveProbeDataset(const ProbeDataset& probe, const std::filesystem::path& dir,
                      std::string_view manifest_name = "probe.json");
void SaveTaskDataset(const TaskActivationSet& task,
                     const std::filesystem::path& dir,
                     std::string_view manifest_name = "task.json");

}  // namespace conceptree

#endif  // CONCEPTREE_ARRAY_IO_H_
