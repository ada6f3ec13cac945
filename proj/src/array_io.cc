#include "conceptree/array_io.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "conceptree/status.h"
#include "json.hpp"

namespace conceptree {
namespace {

static_assert(std::endian::native == std::endian::little,
              "NPY payloads are read with memcpy; big-endian hosts need swaps");

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr size_t kPreambleSize = 10;  // magic(6) + version(2) + header_len(2)
constexpr size_t kHeaderAlignment = 64;

size_t ElementSize(DType dtype) {
  switch (dtype) {
    case DType::kF32:
    case DType::kI32:
      return 4;
    case DType::kU8:
      return 1;
  }
  return 0;
}

std::optional<DType> ParseDescr(std::string_view descr) {
  if (descr == "<f4") return DType::kF32;
  if (descr == "|u1" || descr == "<u1") return DType::kU8;
  if (descr == "<i4") return DType::kI32;
  return std::nullopt;
}

// Returns nullopt on overflow.
std::optional<int64_t> CheckedProduct(const std::vector<int64_t>& shape) {
  int64_t total = 1;
  for (int64_t extent : shape) {
    if (extent < 0) return std::nullopt;
    if (extent != 0 &&
        total > std::numeric_limits<int64_t>::max() / extent) {
      return std::nullopt;
    }
    total *= extent;
  }
  return total;
}

// Minimal reader for the python dict literal in an NPY header:
//   {'descr': '<f4', 'fortran_order': False, 'shape': (3, 4), }
class HeaderParser {
 public:
  HeaderParser(std::string_view text, std::string_view source)
      : text_(text), source_(source) {}

  struct Header {
    std::string descr;
    bool fortran_order = false;
    std::vector<int64_t> shape;
  };

  Header Parse() {
    Header header;
    bool seen_descr = false, seen_order = false, seen_shape = false;
    Expect('{');
    while (true) {
      SkipSpace();
      if (Peek() == '}') {
        ++pos_;
        break;
      }
      std::string key = ParseString();
      Expect(':');
      if (key == "descr") {
        header.descr = ParseString();
        seen_descr = true;
      } else if (key == "fortran_order") {
        header.fortran_order = ParseBool();
        seen_order = true;
      } else if (key == "shape") {
        header.shape = ParseTuple();
        seen_shape = true;
      } else {
        Fail("unexpected header key '" + key + "'");
      }
      SkipSpace();
      if (Peek() == ',') {
        ++pos_;
      } else if (Peek() != '}') {
        Fail("expected ',' or '}'");
      }
    }
    SkipSpace();
    if (pos_ != text_.size()) Fail("trailing characters after header dict");
    if (!seen_descr || !seen_order || !seen_shape) {
      Fail("header must define descr, fortran_order and shape");
    }
    return header;
  }

 private:
  [[noreturn]] void Fail(const std::string& what) const {
    throw Error(ErrorCode::kBadHeader,
                std::string(source_) + ": malformed NPY header (" + what + ")");
  }

  char Peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void SkipSpace() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  void Expect(char c) {
    SkipSpace();
    if (Peek() != c) Fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string ParseString() {
    SkipSpace();
    const char quote = Peek();
    if (quote != '\'' && quote != '"') Fail("expected string literal");
    const size_t end = text_.find(quote, pos_ + 1);
    if (end == std::string_view::npos) Fail("unterminated string literal");
    std::string out(text_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }

  bool ParseBool() {
    SkipSpace();
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    Fail("expected True or False");
  }

  std::vector<int64_t> ParseTuple() {
    Expect('(');
    std::vector<int64_t> values;
    while (true) {
      SkipSpace();
      if (Peek() == ')') {
        ++pos_;
        return values;
      }
      if (!std::isdigit(static_cast<unsigned char>(Peek()))) {
        Fail("expected non-negative integer extent");
      }
      int64_t value = 0;
      while (std::isdigit(static_cast<unsigned char>(Peek()))) {
        const int digit = Peek() - '0';
        if (value > (std::numeric_limits<int64_t>::max() - digit) / 10) {
          Fail("extent overflows int64");
        }
        value = value * 10 + digit;
        ++pos_;
      }
      values.push_back(value);
      SkipSpace();
      if (Peek() == ',') {
        ++pos_;
      } else if (Peek() != ')') {
        Fail("expected ',' or ')' in shape");
      }
    }
  }

  std::string_view text_;
  std::string_view source_;
  size_t pos_ = 0;
};

template <typename T>
std::vector<T> CopyPayload(std::string_view payload, size_t count) {
  std::vector<T> out(count);
  if (count > 0) std::memcpy(out.data(), payload.data(), count * sizeof(T));
  return out;
}

// Reorders a column-major buffer into row-major with the same logical index.
template <typename T>
std::vector<T> FortranToRowMajor(const std::vector<T>& in,
                                 const std::vector<int64_t>& shape) {
  const size_t rank = shape.size();
  std::vector<T> out(in.size());
  if (in.empty()) return out;
  std::vector<int64_t> fortran_stride(rank, 1);
  for (size_t a = 1; a < rank; ++a) {
    fortran_stride[a] = fortran_stride[a - 1] * shape[a - 1];
  }
  std::vector<int64_t> index(rank, 0);
  for (size_t linear = 0; linear < out.size(); ++linear) {
    int64_t offset = 0;
    for (size_t a = 0; a < rank; ++a) offset += index[a] * fortran_stride[a];
    out[linear] = in[static_cast<size_t>(offset)];
    for (size_t a = rank; a-- > 0;) {
      if (++index[a] < shape[a]) break;
      index[a] = 0;
    }
  }
  return out;
}

std::string ShapeString(const std::vector<int64_t>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

}  // namespace

std::string_view DTypeDescr(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return "<f4";
    case DType::kU8:
      return "|u1";
    case DType::kI32:
      return "<i4";
  }
  return "";
}

DenseArray::DenseArray(std::vector<int64_t> shape, Buffer data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty() || shape_.size() > 4) {
    throw Error(ErrorCode::kShapeMismatch,
                "array rank must be between 1 and 4, got " +
                    std::to_string(shape_.size()));
  }
  const auto total = CheckedProduct(shape_);
  const size_t held = std::visit([](const auto& v) { return v.size(); }, data_);
  if (!total || static_cast<size_t>(*total) != held) {
    throw Error(ErrorCode::kShapeMismatch,
                "shape " + ShapeString(shape_) + " does not match " +
                    std::to_string(held) + " stored scalars");
  }
}

DenseArray DenseArray::FromMatrix(const FloatMatrix& m) {
  return DenseArray({static_cast<int64_t>(m.rows()),
                     static_cast<int64_t>(m.cols())},
                    m.data());
}

DenseArray DenseArray::FromMatrix(const BitMatrix& m) {
  return DenseArray({static_cast<int64_t>(m.rows()),
                     static_cast<int64_t>(m.cols())},
                    std::vector<uint8_t>(m.data().begin(), m.data().end()));
}

DType DenseArray::dtype() const {
  switch (data_.index()) {
    case 0:
      return DType::kF32;
    case 1:
      return DType::kU8;
    default:
      return DType::kI32;
  }
}

int64_t DenseArray::size() const {
  return std::visit([](const auto& v) { return static_cast<int64_t>(v.size()); },
                    data_);
}

const std::vector<float>& DenseArray::f32() const {
  if (dtype() != DType::kF32) {
    throw Error(ErrorCode::kUnsupportedDtype, "array is not f32");
  }
  return std::get<0>(data_);
}

const std::vector<uint8_t>& DenseArray::u8() const {
  if (dtype() != DType::kU8) {
    throw Error(ErrorCode::kUnsupportedDtype, "array is not u8");
  }
  return std::get<1>(data_);
}

const std::vector<int32_t>& DenseArray::i32() const {
  if (dtype() != DType::kI32) {
    throw Error(ErrorCode::kUnsupportedDtype, "array is not i32");
  }
  return std::get<2>(data_);
}

FloatMatrix DenseArray::ToFloatMatrix() const {
  const size_t rows = static_cast<size_t>(shape_[0]);
  size_t cols = 1;
  for (size_t a = 1; a < shape_.size(); ++a) cols *= static_cast<size_t>(shape_[a]);
  return FloatMatrix(rows, cols, f32());
}

BitMatrix DenseArray::ToBitMatrix() const {
  const size_t rows = static_cast<size_t>(shape_[0]);
  size_t cols = 1;
  for (size_t a = 1; a < shape_.size(); ++a) cols *= static_cast<size_t>(shape_[a]);
  const auto& bytes = u8();
  return BitMatrix(rows, cols,
                   std::vector<unsigned char>(bytes.begin(), bytes.end()));
}

bool operator==(const DenseArray& a, const DenseArray& b) {
  if (a.shape_ != b.shape_ || a.data_.index() != b.data_.index()) return false;
  return std::visit(
      [&](const auto& va) {
        using V = std::decay_t<decltype(va)>;
        const auto& vb = std::get<V>(b.data_);
        return va.size() == vb.size() &&
               (va.empty() ||
                std::memcmp(va.data(), vb.data(),
                            va.size() * sizeof(typename V::value_type)) == 0);
      },
      a.data_);
}

std::string EncodeNpy(const DenseArray& array) {
  std::string header = "{'descr': '";
  header += DTypeDescr(array.dtype());
  header += "', 'fortran_order': False, 'shape': ";
  header += ShapeString(array.shape());
  header += ", }";
  const size_t unpadded = kPreambleSize + header.size() + 1;
  const size_t padding =
      (kHeaderAlignment - unpadded % kHeaderAlignment) % kHeaderAlignment;
  header.append(padding, ' ');
  header.push_back('\n');

  std::string out;
  out.reserve(kPreambleSize + header.size() +
              static_cast<size_t>(array.size()) * ElementSize(array.dtype()));
  out.append(kMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto header_len = static_cast<uint16_t>(header.size());
  out.push_back(static_cast<char>(header_len & 0xff));
  out.push_back(static_cast<char>(header_len >> 8));
  out += header;
  std::visit(
      [&](const auto& v) {
        out.append(reinterpret_cast<const char*>(v.data()),
                   v.size() * sizeof(typename std::decay_t<decltype(v)>::value_type));
      },
      array.buffer());
  return out;
}

DenseArray DecodeNpy(std::string_view bytes, std::string_view source) {
  const std::string src(source);
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::kBadMagic, src + ": not an NPY file");
  }
  if (bytes.size() < kPreambleSize) {
    throw Error(ErrorCode::kTruncatedPayload, src + ": truncated NPY preamble");
  }
  const auto major = static_cast<uint8_t>(bytes[6]);
  const auto minor = static_cast<uint8_t>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw Error(ErrorCode::kUnsupportedVersion,
                src + ": NPY version " + std::to_string(major) + "." +
                    std::to_string(minor) + " (only 1.0 is supported)");
  }
  const size_t header_len = static_cast<uint8_t>(bytes[8]) |
                            (static_cast<size_t>(static_cast<uint8_t>(bytes[9])) << 8);
  if (bytes.size() < kPreambleSize + header_len) {
    throw Error(ErrorCode::kTruncatedPayload, src + ": truncated NPY header");
  }
  const auto header =
      HeaderParser(bytes.substr(kPreambleSize, header_len), source).Parse();

  const auto dtype = ParseDescr(header.descr);
  if (!dtype) {
    throw Error(ErrorCode::kUnsupportedDtype,
                src + ": unsupported dtype descriptor '" + header.descr + "'");
  }
  if (header.shape.empty() || header.shape.size() > 4) {
    throw Error(ErrorCode::kBadHeader,
                src + ": rank " + std::to_string(header.shape.size()) +
                    " outside supported range 1..4");
  }
  const auto count = CheckedProduct(header.shape);
  if (!count) throw Error(ErrorCode::kBadHeader, src + ": shape overflows");

  const std::string_view payload = bytes.substr(kPreambleSize + header_len);
  const size_t expected = static_cast<size_t>(*count) * ElementSize(*dtype);
  if (payload.size() < expected) {
    throw Error(ErrorCode::kTruncatedPayload,
                src + ": payload holds " + std::to_string(payload.size()) +
                    " bytes, shape " + ShapeString(header.shape) + " needs " +
                    std::to_string(expected));
  }
  if (payload.size() > expected) {
    throw Error(ErrorCode::kBadHeader,
                src + ": " + std::to_string(payload.size() - expected) +
                    " unexpected trailing payload bytes");
  }

  const size_t n = static_cast<size_t>(*count);
  auto decode = [&](auto tag) -> DenseArray {
    using T = decltype(tag);
    auto values = CopyPayload<T>(payload, n);
    if (header.fortran_order) values = FortranToRowMajor(values, header.shape);
    return DenseArray(header.shape, std::move(values));
  };
  switch (*dtype) {
    case DType::kF32:
      return decode(float{});
    case DType::kU8:
      return decode(uint8_t{});
    case DType::kI32:
      return decode(int32_t{});
  }
  throw Error(ErrorCode::kUnsupportedDtype, src);
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kMissingFile, path.string() + ": cannot open");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIoFailure, path.string() + ": write failed");
}

DenseArray ReadArray(const std::filesystem::path& path) {
  return DecodeNpy(ReadFileBytes(path), path.string());
}

void WriteArray(const DenseArray& array, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeNpy(array));
}

// ---------------------------------------------------------------------------
// Manifests

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void SchemaError(std::string_view source, const std::string& what) {
  throw Error(ErrorCode::kManifestSchemaError, std::string(source) + ": " + what);
}

template <typename T>
T Field(const json& j, const char* key, std::string_view source) {
  if (!j.contains(key)) SchemaError(source, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    SchemaError(source, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

DatasetManifest ParseManifest(std::string_view json_text,
                              std::string_view source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    SchemaError(source, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) SchemaError(source, "manifest must be a JSON object");

  DatasetManifest m;
  m.format_version = Field<int>(j, "format_version", source);
  if (m.format_version != kManifestFormatVersion) {
    SchemaError(source, "unsupported format_version " +
                            std::to_string(m.format_version));
  }
  const auto kind = Field<std::string>(j, "kind", source);
  if (kind == "probe") {
    m.kind = DatasetKind::kProbe;
  } else if (kind == "task") {
    m.kind = DatasetKind::kTask;
  } else {
    SchemaError(source, "kind must be 'probe' or 'task', got '" + kind + "'");
  }

  static const std::vector<std::string> kCommon = {
      "format_version", "kind", "layer_name", "n", "feature_shape",
      "activations_path"};
  static const std::vector<std::string> kProbeOnly = {"concept_names",
                                                      "concept_labels_path"};
  static const std::vector<std::string> kTaskOnly = {
      "predictions_path", "class_names", "ground_truth_path"};
  const auto& own = m.kind == DatasetKind::kProbe ? kProbeOnly : kTaskOnly;
  for (const auto& [key, value] : j.items()) {
    const bool known =
        std::find(kCommon.begin(), kCommon.end(), key) != kCommon.end() ||
        std::find(own.begin(), own.end(), key) != own.end();
    if (!known) SchemaError(source, "unknown field '" + key + "' for kind " + kind);
  }

  m.layer_name = Field<std::string>(j, "layer_name", source);
  m.n = Field<int64_t>(j, "n", source);
  if (m.n < 0) SchemaError(source, "n must be non-negative");
  m.feature_shape = Field<std::vector<int64_t>>(j, "feature_shape", source);
  if (m.feature_shape.size() != 1 && m.feature_shape.size() != 3) {
    SchemaError(source, "feature_shape must be [d] or [C,H,W]");
  }
  for (int64_t e : m.feature_shape) {
    if (e < 0) SchemaError(source, "feature_shape extents must be non-negative");
  }
  m.activations_path = Field<std::string>(j, "activations_path", source);

  if (m.kind == DatasetKind::kProbe) {
    m.concept_names = Field<std::vector<std::string>>(j, "concept_names", source);
    if (m.concept_names.empty()) SchemaError(source, "concept_names is empty");
    m.concept_labels_path = Field<std::string>(j, "concept_labels_path", source);
  } else {
    m.predictions_path = Field<std::string>(j, "predictions_path", source);
    m.class_names = Field<std::vector<std::string>>(j, "class_names", source);
    if (m.class_names.empty()) SchemaError(source, "class_names is empty");
    if (j.contains("ground_truth_path") && !j["ground_truth_path"].is_null()) {
      m.ground_truth_path = Field<std::string>(j, "ground_truth_path", source);
    }
  }
  return m;
}

std::string SerializeManifest(const DatasetManifest& m) {
  ordered_json j;
  j["format_version"] = m.format_version;
  j["kind"] = m.kind == DatasetKind::kProbe ? "probe" : "task";
  j["layer_name"] = m.layer_name;
  j["n"] = m.n;
  j["feature_shape"] = m.feature_shape;
  j["activations_path"] = m.activations_path;
  if (m.kind == DatasetKind::kProbe) {
    j["concept_names"] = m.concept_names;
    j["concept_labels_path"] = m.concept_labels_path;
  } else {
    j["predictions_path"] = m.predictions_path;
    j["class_names"] = m.class_names;
    if (m.ground_truth_path) j["ground_truth_path"] = *m.ground_truth_path;
  }
  return j.dump(2) + "\n";
}

namespace {

DenseArray LoadReferenced(const std::filesystem::path& base,
                          const std::string& relative, const char* field) {
  const auto path = base / relative;
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingFile,
                std::string(field) + " -> " + path.string() + " does not exist");
  }
  return ReadArray(path);
}

[[noreturn]] void ShapeError(const std::filesystem::path& manifest,
                             const char* field, const std::string& what) {
  throw Error(ErrorCode::kShapeMismatch,
              manifest.string() + ": " + field + ": " + what);
}

FloatMatrix LoadActivations(const std::filesystem::path& manifest_path,
                            const DatasetManifest& m) {
  const auto arr = LoadReferenced(manifest_path.parent_path(),
                                  m.activations_path, "activations_path");
  if (arr.dtype() != DType::kF32) {
    ShapeError(manifest_path, "activations_path", "activations must be f32");
  }
  std::vector<int64_t> expected = {m.n};
  expected.insert(expected.end(), m.feature_shape.begin(), m.feature_shape.end());
  if (arr.shape() != expected) {
    ShapeError(manifest_path, "activations_path",
               "array shape " + ShapeString(arr.shape()) + " but manifest implies " +
                   ShapeString(expected));
  }
  return arr.ToFloatMatrix();
}

std::vector<int32_t> LoadClassIds(const std::filesystem::path& manifest_path,
                                  const DatasetManifest& m,
                                  const std::string& relative, const char* field) {
  const auto arr = LoadReferenced(manifest_path.parent_path(), relative, field);
  if (arr.dtype() != DType::kI32) {
    ShapeError(manifest_path, field, "class ids must be i32");
  }
  if (arr.shape() != std::vector<int64_t>{m.n}) {
    ShapeError(manifest_path, field,
               "array shape " + ShapeString(arr.shape()) + " but n=" +
                   std::to_string(m.n));
  }
  const auto num_classes = static_cast<int32_t>(m.class_names.size());
  for (int32_t v : arr.i32()) {
    if (v < 0 || v >= num_classes) {
      SchemaError(manifest_path.string(),
                  std::string(field) + " value " + std::to_string(v) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  return arr.i32();
}

}  // namespace

LoadedDataset LoadDataset(const std::filesystem::path& manifest_path) {
  const auto m = ParseManifest(ReadFileBytes(manifest_path), manifest_path.string());
  if (m.kind == DatasetKind::kProbe) {
    ProbeDataset probe;
    probe.layer_name = m.layer_name;
    probe.feature_shape = m.feature_shape;
    probe.concept_names = m.concept_names;
    probe.activations = LoadActivations(manifest_path, m);
    const auto labels = LoadReferenced(manifest_path.parent_path(),
                                       m.concept_labels_path, "concept_labels_path");
    if (labels.dtype() != DType::kU8) {
      ShapeError(manifest_path, "concept_labels_path", "labels must be u8");
    }
    const std::vector<int64_t> expected = {
        m.n, static_cast<int64_t>(m.concept_names.size())};
    if (labels.shape() != expected) {
      ShapeError(manifest_path, "concept_labels_path",
                 "array shape " + ShapeString(labels.shape()) +
                     " but manifest implies " + ShapeString(expected));
    }
    for (uint8_t v : labels.u8()) {
      if (v > 1) {
        SchemaError(manifest_path.string(),
                    "concept labels must be 0/1, found " + std::to_string(v));
      }
    }
    probe.concept_labels = labels.ToBitMatrix();
    return probe;
  }

  TaskActivationSet task;
  task.layer_name = m.layer_name;
  task.feature_shape = m.feature_shape;
  task.class_names = m.class_names;
  task.activations = LoadActivations(manifest_path, m);
  task.predictions =
      LoadClassIds(manifest_path, m, m.predictions_path, "predictions_path");
  if (m.ground_truth_path) {
    task.ground_truth =
        LoadClassIds(manifest_path, m, *m.ground_truth_path, "ground_truth_path");
  }
  return task;
}

ProbeDataset LoadProbeDataset(const std::filesystem::path& manifest_path) {
  auto loaded = LoadDataset(manifest_path);
  if (auto* probe = std::get_if<ProbeDataset>(&loaded)) return std::move(*probe);
  SchemaError(manifest_path.string(), "expected a probe manifest");
}

TaskActivationSet LoadTaskDataset(const std::filesystem::path& manifest_path) {
  auto loaded = LoadDataset(manifest_path);
  if (auto* task = std::get_if<TaskActivationSet>(&loaded)) return std::move(*task);
  SchemaError(manifest_path.string(), "expected a task manifest");
}

namespace {

DenseArray ActivationArray(const FloatMatrix& activations,
                           const std::vector<int64_t>& feature_shape) {
  std::vector<int64_t> shape = {static_cast<int64_t>(activations.rows())};
  shape.insert(shape.end(), feature_shape.begin(), feature_shape.end());
  return DenseArray(std::move(shape), activations.data());
}

}  // namespace

void SaveProbeDataset(const ProbeDataset& probe, const std::filesystem::path& dir,
                      std::string_view manifest_name) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.kind = DatasetKind::kProbe;
  m.layer_name = probe.layer_name;
  m.n = static_cast<int64_t>(probe.num_samples());
  m.feature_shape = probe.feature_shape;
  m.activations_path = "activations.npy";
  m.concept_names = probe.concept_names;
  m.concept_labels_path = "concept_labels.npy";
  WriteArray(ActivationArray(probe.activations, probe.feature_shape),
             dir / m.activations_path);
  WriteArray(DenseArray::FromMatrix(probe.concept_labels),
             dir / m.concept_labels_path);
  WriteFileBytes(dir / manifest_name, SerializeManifest(m));
}

void SaveTaskDataset(const TaskActivationSet& task,
                     const std::filesystem::path& dir,
                     std::string_view manifest_name) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.kind = DatasetKind::kTask;
  m.layer_name = task.layer_name;
  m.n = static_cast<int64_t>(task.num_samples());
  m.feature_shape = task.feature_shape;
  m.activations_path = "activations.npy";
  m.predictions_path = "predictions.npy";
  m.class_names = task.class_names;
  WriteArray(ActivationArray(task.activations, task.feature_shape),
             dir / m.activations_path);
  WriteArray(DenseArray({m.n}, task.predictions), dir / m.predictions_path);
  if (task.ground_truth) {
    m.ground_truth_path = "ground_truth.npy";
    WriteArray(DenseArray({m.n}, *task.ground_truth), dir / *m.ground_truth_path);
  }
  WriteFileBytes(dir / manifest_name, SerializeManifest(m));
}

}  // namespace conceptree
