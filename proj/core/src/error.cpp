#include "rtlforge/error.hpp"

namespace rtlforge {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvariantViolation: return "InvariantViolation";
        case ErrorKind::PreconditionViolation: return "PreconditionViolation";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::TransportError: return "TransportError";
        case ErrorKind::ProtocolError: return "ProtocolError";
        case ErrorKind::ReplayExhausted: return "ReplayExhausted";
        case ErrorKind::NoCodeFound: return "NoCodeFound";
        case ErrorKind::AmbiguousBundle: return "AmbiguousBundle";
        case ErrorKind::ToolNotFound: return "ToolNotFound";
        case ErrorKind::MissingArtifact: return "MissingArtifact";
        case ErrorKind::ParseFailure: return "ParseFailure";
        case ErrorKind::NothingToDistill: return "NothingToDistill";
        case ErrorKind::InteractionUnavailable: return "InteractionUnavailable";
        case ErrorKind::AgentFailure: return "AgentFailure";
        case ErrorKind::ToolFailure: return "ToolFailure";
        case ErrorKind::MissingReports: return "MissingReports";
        case ErrorKind::DomainError: return "DomainError";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::DuplicateTaskId: return "DuplicateTaskId";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace rtlforge
