#include "conceptree/status.h"

namespace conceptree {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kUnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kBadHeader: return "BadHeader";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kManifestSchemaError: return "ManifestSchemaError";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kEmptySpatialExtent: return "EmptySpatialExtent";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kConceptDegenerate: return "ConceptDegenerate";
    case ErrorCode::kSingleClassSplit: return "SingleClassSplit";
    case ErrorCode::kEmptyBank: return "EmptyBank";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kPreprocMismatch: return "PreprocMismatch";
    case ErrorCode::kEmptyNode: return "EmptyNode";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kSpecInvalid: return "SpecInvalid";
  }
  return "Unknown";
}

}  // namespace conceptree
