#pragma once

#include <stdexcept>
#include <string>

namespace optolattice {

enum class ErrorCode {
    InvalidArgument,
    UnknownKey,
    TypeMismatch,
    RangeError,
    Resonance,
    LatticeOverdriven,
    NoConvergence,
    NumericalBlowup,
    IllConditioned,
    NoDominantPeak,
    Io,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this type so the CLI can map
// them to a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace optolattice
