#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cb {

enum class ErrorCode {
    EmptyFamily,
    SchemaViolation,
    NameTaken,
    CorruptArchive,
    NotOwner,
    UnknownComponent,
    UnknownRun,
    UnknownContext,
    InvalidRun,
    RegistrarUnavailable,
    PermanentEntity,
    Forbidden,
    IntegrityFailure,
    Unauthenticated,
    Conflict,
    ProbeFailure,
    SpawnFailure,
    IncompatibleScenario,
    ShapeMismatch,
    UnknownColumn,
    UnknownNode,
    NoOverlap,
    MissingObjective,
    EmptyTable,
    MissingConfig,
    MalformedConfig,
    Io,
    Transport,
};

/// Stable snake_case wire name, used in API error bodies and CLI messages.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cb
