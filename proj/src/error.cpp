#include "seqmargin/error.hpp"

namespace seqmargin {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kArgument: return "argument";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kSampling: return "sampling";
    case ErrorCode::kConstruction: return "construction";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kVocabMismatch: return "vocab-mismatch";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kUsage: return "usage";
  }
  return "unknown";
}

}  // namespace seqmargin
