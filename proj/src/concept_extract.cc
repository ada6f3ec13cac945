#include "conceptree/concept_extract.h"

#include "conceptree/parallel.h"
#include "conceptree/status.h"
#include "json.hpp"

namespace conceptree {

bool PredictConcept(const LinearClassifier& classifier, std::span<const float> v) {
  if (v.size() != classifier.weights.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "classifier expects " + std::to_string(classifier.weights.size()) +
                    " features, got " + std::to_string(v.size()));
  }
  double margin = classifier.bias;
  for (size_t j = 0; j < v.size(); ++j) {
    margin += static_cast<double>(classifier.weights[j]) * v[j];
  }
  return margin >= 0.0;
}

ConceptVectorDataset BuildConceptDataset(const ConceptBank& bank,
                                         const TaskActivationSet& task,
                                         int num_threads) {
  if (bank.empty()) {
    throw Error(ErrorCode::kEmptyBank, "concept bank has no classifiers");
  }
  if (task.preproc_id != bank.pca_ref) {
    throw Error(ErrorCode::kPreprocMismatch,
                "task activations were reduced with '" + task.preproc_id +
                    "' but the bank was trained on '" + bank.pca_ref + "'");
  }
  if (task.activations.cols() != bank.input_dim) {
    throw Error(ErrorCode::kDimMismatch,
                "task activations have " + std::to_string(task.activations.cols()) +
                    " columns, bank expects " + std::to_string(bank.input_dim));
  }

  ConceptVectorDataset out;
  const size_t p = bank.classifiers.size();
  out.matrix = BitMatrix(task.num_samples(), p);
  ParallelFor(task.num_samples(), num_threads, [&](size_t begin, size_t end) {
    for (size_t r = begin; r < end; ++r) {
      const auto v = task.activations.row(r);
      for (size_t j = 0; j < p; ++j) {
        out.matrix(r, j) = PredictConcept(bank.classifiers[j], v) ? 1 : 0;
      }
    }
  });
  out.concept_names = bank.concept_names;
  out.targets = task.predictions;
  out.class_names = task.class_names;
  out.ground_truth = task.ground_truth;
  out.pca_ref = bank.pca_ref;
  return out;
}

void SaveConceptDataset(const ConceptVectorDataset& data,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto n = static_cast<int64_t>(data.num_rows());
  WriteArray(DenseArray::FromMatrix(data.matrix), dir / "concepts.npy");
  WriteArray(DenseArray({n}, data.targets), dir / "targets.npy");
  nlohmann::ordered_json j;
  j["n"] = n;
  j["concept_names"] = data.concept_names;
  j["class_names"] = data.class_names;
  j["pca_ref"] = data.pca_ref;
  j["matrix_path"] = "concepts.npy";
  j["targets_path"] = "targets.npy";
  if (data.ground_truth) {
    WriteArray(DenseArray({n}, *data.ground_truth), dir / "ground_truth.npy");
    j["ground_truth_path"] = "ground_truth.npy";
  }
  WriteFileBytes(dir / "concepts.json", j.dump(2) + "\n");
}

ConceptVectorDataset LoadConceptDataset(const std::filesystem::path& sidecar) {
  const auto source = sidecar.string();
  const auto dir = sidecar.parent_path();
  ConceptVectorDataset data;
  int64_t n = 0;
  DenseArray matrix;
  try {
    const auto j = nlohmann::json::parse(ReadFileBytes(sidecar));
    n = j.at("n").get<int64_t>();
    data.concept_names = j.at("concept_names").get<std::vector<std::string>>();
    data.class_names = j.at("class_names").get<std::vector<std::string>>();
    data.pca_ref = j.at("pca_ref").get<std::string>();
    matrix = ReadArray(dir / j.at("matrix_path").get<std::string>());
    data.targets = ReadArray(dir / j.at("targets_path").get<std::string>()).i32();
    if (j.contains("ground_truth_path")) {
      data.ground_truth =
          ReadArray(dir / j.at("ground_truth_path").get<std::string>()).i32();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kManifestSchemaError, source + ": " + e.what());
  }
  const std::vector<int64_t> expected = {
      n, static_cast<int64_t>(data.concept_names.size())};
  if (matrix.shape() != expected) {
    throw Error(ErrorCode::kShapeMismatch, source + ": matrix_path shape disagrees");
  }
  data.matrix = matrix.ToBitMatrix();
  for (unsigned char v : data.matrix.data()) {
    if (v > 1) throw Error(ErrorCode::kManifestSchemaError, source + ": non-binary concept entry");
  }
  auto check_ids = [&](const std::vector<int32_t>& ids, const char* field) {
    if (static_cast<int64_t>(ids.size()) != n) {
      throw Error(ErrorCode::kShapeMismatch, source + ": " + field + " length != n");
    }
    for (int32_t v : ids) {
      if (v < 0 || static_cast<size_t>(v) >= data.class_names.size()) {
        throw Error(ErrorCode::kManifestSchemaError,
                    source + ": " + field + " value " + std::to_string(v) + " out of range");
      }
    }
  };
  check_ids(data.targets, "targets_path");
  if (data.ground_truth) check_ids(*data.ground_truth, "ground_truth_path");
  return data;
}

}  // namespace conceptree
