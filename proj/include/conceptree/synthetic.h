#ifndef CONCEPTREE_SYNTHETIC_H_
#define CONCEPTREE_SYNTHETIC_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conceptree/array_io.h"
#include "conceptree/matrix.h"

namespace conceptree {

// Ordered if-then clauses over concept bits; the first clause whose
// conditions all hold decides the class, otherwise `default_label`.
struct DecisionList {
  struct Clause {
    std::vector<std::pair<size_t, bool>> conditions;  // (concept, required bit)
    int32_t label = 0;
  };
  std::vector<Clause> clauses;
  int32_t default_label = 0;

  int32_t Evaluate(std::span<const unsigned char> bits) const;
};

// if c0 & c1 -> 0; elif c2 -> 1; else 2. Expressible as a depth-3 tree.
DecisionList Depth3Rule();

struct PlantedSpec {
  size_t n_probe = 4000;
  size_t n_task = 2000;
  size_t p_concepts = 12;
  size_t d_activation = 64;
  double noise_sigma = 0.0;
  size_t num_classes = 3;
  DecisionList rule = Depth3Rule();
  uint64_t seed = 0;

  // Throws kSpecInvalid.
  void Validate() const;
};

struct PlantedData {
  ProbeDataset probe;
  TaskActivationSet task;
  BitMatrix task_concepts;  // true concept bits behind each task row
  FloatMatrix embedding;    // d x p, orthonormal columns
};

// Concept bits are fair coins; activation = E * bits + N(0, sigma^2) noise.
// Probe labels are the true bits and task predictions are rule(bits).
PlantedData GeneratePlanted(const PlantedSpec& spec);

// Writes probe/probe.json, task/task.json and ground_truth/{spec.json,
// task_concepts.npy} under `dir`.
void WritePlanted(const PlantedSpec& spec, const PlantedData& data,
                  const std::filesystem::path& dir);

std::string PlantedSpecToJson(const PlantedSpec& spec);
PlantedSpec PlantedSpecFromJson(std::string_view text);

}  // namespace conceptree

#endif  // CONCEPTREE_SYNTHETIC_H_
