#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctricks {

enum class ErrorKind {
    InvalidCode,
    InvalidGrid,
    Infeasible,
    MalformedRLE,
    MissingArtifact,
    CorruptManifest,
    CorruptPayload,
    Io,
    NotInLexicon,
    UnmatchedSample,
    DimensionMismatch,
    DegenerateInput,
    EmptyTarget,
    EmptyLayerSet,
    ZeroDenominator,
    Divergence,
    InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

// Every failure the toolkit reports goes through this type; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace ctricks
