#include "ctricks/error.hpp"

namespace ctricks {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidCode: return "InvalidCode";
        case ErrorKind::InvalidGrid: return "InvalidGrid";
        case ErrorKind::Infeasible: return "Infeasible";
        case ErrorKind::MalformedRLE: return "MalformedRLE";
        case ErrorKind::MissingArtifact: return "MissingArtifact";
        case ErrorKind::CorruptManifest: return "CorruptManifest";
        case ErrorKind::CorruptPayload: return "CorruptPayload";
        case ErrorKind::Io: return "IoError";
        case ErrorKind::NotInLexicon: return "NotInLexicon";
        case ErrorKind::UnmatchedSample: return "UnmatchedSample";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::DegenerateInput: return "DegenerateInput";
        case ErrorKind::EmptyTarget: return "EmptyTarget";
        case ErrorKind::EmptyLayerSet: return "EmptyLayerSet";
        case ErrorKind::ZeroDenominator: return "ZeroDenominator";
        case ErrorKind::Divergence: return "Divergence";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace ctricks
