#pragma once

#include <stdexcept>
#include <string>

namespace seqmargin {

enum class ErrorCode {
  kShape = 1,
  kArgument,
  kEvaluation,
  kSampling,
  kConstruction,
  kIo,
  kFormat,
  kVocabMismatch,
  kDivergence,
  kUsage,
};

const char* error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above; the C
// API maps them onto its integer status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace seqmargin
