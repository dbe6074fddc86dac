#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace care {

enum class ErrorCode {
    SpanOutOfBounds,
    RoleMismatch,
    KindConstraintViolated,
    DuplicateEdge,
    NextCycle,
    NextBranch,
    SubCycle,
    UnknownNode,
    GraphFrozen,
    UnresolvedReference,
    SpanMismatch,
    EmptyProcedure,
    MalformedDocument,
    DimensionMismatch,
    GeometryMismatch,
    EmptyGraph,
    EncoderMismatch,
    NoValidClueNode,
    DivergenceDetected,
    InvalidArgument,
    Io,
    UnknownManual,
    DuplicateManual,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Domain error raised by every module. The CLI maps it to exit code 1 and the
/// service maps it to a 4xx response.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// Message without the error-code prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

}  // namespace care
