#pragma once

#include <stdexcept>
#include <string>

namespace igs {

enum class ErrorCode {
    SchemaViolation,
    SemanticViolation,
    UnknownName,
    CubicalViolation,
    SearchBudgetExceeded,
    EqualWords,
    LevelMismatch,
    BudgetExceeded,
    Disconnected,
    UnsupportedClass,
    MissingFlippingSymmetry,
    NotCubical,
    NotFound,
    NoConvergence,
    InvalidExponent,
    Infeasible,
    ExponentMismatch,
    TooLarge,
    HypothesisViolation,
    VerificationFailure,
    TypingIncomplete,
    InsufficientLevels,
    Io
};

const char* error_code_name(ErrorCode c);

class Error : public std::runtime_error {
public:
    Error(ErrorCode c, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(c)) + ": " + msg), code_(c) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace igs
