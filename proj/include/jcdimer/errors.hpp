#pragma once

#include <stdexcept>
#include <string>

namespace jcd {

// Base of every error raised by the library. Solver failures derive from
// SolverError so the CLI can map them to a single exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class SolverError : public Error {
public:
    using Error::Error;
};

#define JCD_DEFINE_SOLVER_ERROR(Name)         \
    class Name : public SolverError {         \
    public:                                   \
        using SolverError::SolverError;       \
    };

JCD_DEFINE_SOLVER_ERROR(MemoryBudgetExceeded)
JCD_DEFINE_SOLVER_ERROR(TailMassExceeded)
JCD_DEFINE_SOLVER_ERROR(UnknownObservable)
JCD_DEFINE_SOLVER_ERROR(StepSizeUnderflow)
JCD_DEFINE_SOLVER_ERROR(NoBracket)
JCD_DEFINE_SOLVER_ERROR(NormDrift)
JCD_DEFINE_SOLVER_ERROR(KrylovBreakdown)
JCD_DEFINE_SOLVER_ERROR(ManifoldTooLarge)
JCD_DEFINE_SOLVER_ERROR(EmptyWindow)
JCD_DEFINE_SOLVER_ERROR(DimensionGuard)
JCD_DEFINE_SOLVER_ERROR(TooFewCrossings)
JCD_DEFINE_SOLVER_ERROR(NoLobe)
JCD_DEFINE_SOLVER_ERROR(NoDeparture)
JCD_DEFINE_SOLVER_ERROR(BadEnvelopeFit)
JCD_DEFINE_SOLVER_ERROR(FitFailed)
JCD_DEFINE_SOLVER_ERROR(FormatError)

#undef JCD_DEFINE_SOLVER_ERROR

}  // namespace jcd
