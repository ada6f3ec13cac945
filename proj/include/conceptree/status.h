#ifndef CONCEPTREE_STATUS_H_
#define CONCEPTREE_STATUS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace conceptree {

// Every failure raised by the library carries one of these codes so callers
// (and tests) can branch on the error class rather than on message text.
enum class ErrorCode {
  // array-io
  kBadMagic,
  kUnsupportedVersion,
  kUnsupportedDtype,
  kTruncatedPayload,
  kBadHeader,
  kIoFailure,
  kManifestSchemaError,
  kShapeMismatch,
  kMissingFile,
  // preprocess
  kEmptySpatialExtent,
  kDegenerateInput,
  kDimMismatch,
  // concept-bank
  kConceptDegenerate,
  kSingleClassSplit,
  kEmptyBank,
  kInvalidConfig,
  // concept-extract
  kPreprocMismatch,
  // cart
  kEmptyNode,
  kEmptyDataset,
  // synthetic
  kSpecInvalid,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace conceptree

#endif  // CONCEPTREE_STATUS_H_
