#include "conceptree/synthetic.h"

#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>

#include "conceptree/status.h"
#include "json.hpp"

namespace conceptree {
namespace {

std::string IndexedName(const char* prefix, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%02zu", prefix, i);
  return buf;
}

// Modified Gram-Schmidt over the columns of a d x p matrix.
void OrthonormalizeColumns(std::vector<double>& m, size_t d, size_t p) {
  for (size_t j = 0; j < p; ++j) {
    for (size_t i = 0; i < j; ++i) {
      double dot = 0.0;
      for (size_t r = 0; r < d; ++r) dot += m[r * p + i] * m[r * p + j];
      for (size_t r = 0; r < d; ++r) m[r * p + j] -= dot * m[r * p + i];
    }
    double norm = 0.0;
    for (size_t r = 0; r < d; ++r) norm += m[r * p + j] * m[r * p + j];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error(ErrorCode::kSpecInvalid, "degenerate embedding draw");
    for (size_t r = 0; r < d; ++r) m[r * p + j] /= norm;
  }
}

}  // namespace

int32_t DecisionList::Evaluate(std::span<const unsigned char> bits) const {
  for (const auto& clause : clauses) {
    bool match = true;
    for (const auto& [concept_id, value] : clause.conditions) {
      if ((bits[concept_id] != 0) != value) {
        match = false;
        break;
      }
    }
    if (match) return clause.label;
  }
  return default_label;
}

DecisionList Depth3Rule() {
  DecisionList rule;
  rule.clauses.push_back({{{0, true}, {1, true}}, 0});
  rule.clauses.push_back({{{2, true}}, 1});
  rule.default_label = 2;
  return rule;
}

void PlantedSpec::Validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kSpecInvalid, what); };
  if (p_concepts == 0) fail("p_concepts must be positive");
  if (d_activation < p_concepts) fail("d_activation must be >= p_concepts");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    fail("noise_sigma must be finite and >= 0");
  }
  if (num_classes == 0) fail("num_classes must be positive");
  auto check_label = [&](int32_t label) {
    if (label < 0 || static_cast<size_t>(label) >= num_classes) {
      fail("rule label " + std::to_string(label) + " outside [0, num_classes)");
    }
  };
  for (const auto& clause : rule.clauses) {
    check_label(clause.label);
    for (const auto& [concept_id, value] : clause.conditions) {
      if (concept_id >= p_concepts) {
        fail("rule references concept " + std::to_string(concept_id));
      }
    }
  }
  check_label(rule.default_label);
}

PlantedData GeneratePlanted(const PlantedSpec& spec) {
  spec.Validate();
  const size_t p = spec.p_concepts;
  const size_t d = spec.d_activation;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<double> embedding(d * p);
  for (double& e : embedding) e = gauss(rng);
  OrthonormalizeColumns(embedding, d, p);

  auto draw = [&](size_t n, BitMatrix& bits, FloatMatrix& activations) {
    bits = BitMatrix(n, p);
    activations = FloatMatrix(n, d);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < p; ++j) bits(i, j) = coin(rng) ? 1 : 0;
      for (size_t r = 0; r < d; ++r) {
        double v = 0.0;
        for (size_t j = 0; j < p; ++j) v += embedding[r * p + j] * bits(i, j);
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * gauss(rng);
        activations(i, r) = static_cast<float>(v);
      }
    }
  };

  PlantedData data;
  data.embedding = FloatMatrix(d, p);
  for (size_t i = 0; i < d * p; ++i) data.embedding.data()[i] = static_cast<float>(embedding[i]);

  std::vector<std::string> concept_names, class_names;
  for (size_t j = 0; j < p; ++j) concept_names.push_back(IndexedName("concept", j));
  for (size_t c = 0; c < spec.num_classes; ++c) class_names.push_back(IndexedName("class", c));

  data.probe.layer_name = "planted";
  data.probe.feature_shape = {static_cast<int64_t>(d)};
  data.probe.concept_names = concept_names;
  draw(spec.n_probe, data.probe.concept_labels, data.probe.activations);

  data.task.layer_name = "planted";
  data.task.feature_shape = {static_cast<int64_t>(d)};
  data.task.class_names = class_names;
  draw(spec.n_task, data.task_concepts, data.task.activations);
  data.task.predictions.resize(spec.n_task);
  for (size_t i = 0; i < spec.n_task; ++i) {
    data.task.predictions[i] = spec.rule.Evaluate(data.task_concepts.row(i));
  }
  return data;
}

void WritePlanted(const PlantedSpec& spec, const PlantedData& data,
                  const std::filesystem::path& dir) {
  SaveProbeDataset(data.probe, dir / "probe", "probe.json");
  SaveTaskDataset(data.task, dir / "task", "task.json");
  const auto truth = dir / "ground_truth";
  std::filesystem::create_directories(truth);
  WriteArray(DenseArray::FromMatrix(data.task_concepts), truth / "task_concepts.npy");
  WriteFileBytes(truth / "spec.json", PlantedSpecToJson(spec));
}

std::string PlantedSpecToJson(const PlantedSpec& spec) {
  nlohmann::ordered_json j;
  j["n_probe"] = spec.n_probe;
  j["n_task"] = spec.n_task;
  j["p_concepts"] = spec.p_concepts;
  j["d_activation"] = spec.d_activation;
  j["noise_sigma"] = spec.noise_sigma;
  j["num_classes"] = spec.num_classes;
  j["seed"] = spec.seed;
  nlohmann::ordered_json clauses = nlohmann::ordered_json::array();
  for (const auto& clause : spec.rule.clauses) {
    nlohmann::ordered_json c;
    nlohmann::ordered_json when = nlohmann::ordered_json::array();
    for (const auto& [concept_id, value] : clause.conditions) {
      when.push_back({{"concept", concept_id}, {"present", value}});
    }
    c["when"] = std::move(when);
    c["label"] = clause.label;
    clauses.push_back(std::move(c));
  }
  j["rule"] = {{"clauses", std::move(clauses)}, {"default", spec.rule.default_label}};
  return j.dump(2) + "\n";
}

PlantedSpec PlantedSpecFromJson(std::string_view text) {
  PlantedSpec spec;
  try {
    const auto j = nlohmann::json::parse(text);
    static const std::set<std::string> kKeys = {
        "n_probe", "n_task", "p_concepts", "d_activation",
        "noise_sigma", "num_classes", "seed", "rule"};
    if (!j.is_object()) throw Error(ErrorCode::kSpecInvalid, "planted spec must be an object");
    for (const auto& [key, value] : j.items()) {
      if (!kKeys.count(key)) throw Error(ErrorCode::kSpecInvalid, "unknown key '" + key + "'");
    }
    spec.n_probe = j.value("n_probe", spec.n_probe);
    spec.n_task = j.value("n_task", spec.n_task);
    spec.p_concepts = j.value("p_concepts", spec.p_concepts);
    spec.d_activation = j.value("d_activation", spec.d_activation);
    spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
    spec.num_classes = j.value("num_classes", spec.num_classes);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("rule")) {
      const auto& r = j.at("rule");
      spec.rule = DecisionList{};
      for (const auto& c : r.at("clauses")) {
        DecisionList::Clause clause;
        for (const auto& cond : c.at("when")) {
          clause.conditions.emplace_back(cond.at("concept").get<size_t>(),
                                         cond.at("present").get<bool>());
        }
        clause.label = c.at("label").get<int32_t>();
        spec.rule.clauses.push_back(std::move(clause));
      }
      spec.rule.default_label = r.at("default").get<int32_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSpecInvalid, std::string("planted spec JSON: ") + e.what());
  }
  spec.Validate();
  return spec;
}

}  // namespace conceptree
