#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rtlforge {

enum class ErrorKind {
    InvariantViolation,
    PreconditionViolation,
    IoError,
    // agent gateway
    TransportError,
    ProtocolError,
    ReplayExhausted,
    NoCodeFound,
    AmbiguousBundle,
    // eda harness
    ToolNotFound,
    MissingArtifact,
    // distiller
    ParseFailure,
    NothingToDistill,
    // loops
    InteractionUnavailable,
    AgentFailure,
    ToolFailure,
    MissingReports,
    // bench harness
    DomainError,
    FormatError,
    DuplicateTaskId,
    ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers can map errors to loop statuses and exit codes without string
/// matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace rtlforge
