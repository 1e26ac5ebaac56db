#ifndef SARMA_ERRORS_HPP
#define SARMA_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace sarma {

enum class ErrorCode {
    ConstantSeries,
    TooShort,
    MissingBase,
    CyclicCrossPredictors,
    ParseError,
    SchemaError,
    ChainTooShort,
    MissingConditioning,
    NumericalFailure,
    TooLarge,
    DegenerateStats,
    NonMonotone,
    MissingCrossValues,
    ShortHistory,
    EmptyHoldout,
    AllTies,
    NonConvergence,
    MissingData,
    SpecError,
    InvalidArgument,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a code so callers (and the
/// CLI's JSON error stream) can dispatch without parsing messages.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace sarma

#endif  // SARMA_ERRORS_HPP
