#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biastrace {

enum class ErrorCode {
    // core
    SchemaError,
    MissingVariant,
    DuplicateId,
    BadMagic,
    DimOverflow,
    NonFiniteValue,
    Truncated,
    IoError,
    BadImage,
    UnsupportedVersion,
    // promptgen
    BadSwapPosition,
    ProfessionNotFound,
    // metrics
    ZeroVector,
    LengthMismatch,
    DimensionMismatch,
    KeyMismatch,
    ShapeMismatch,
    EmptyDataset,
    // objstats
    NoOccurrence,
    DegenerateTable,
    // depgroups
    EmptyObjectMask,
    // report
    MissingSection,
    EmptyEntries,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the engine carries one of the codes above so the
/// CLI can map it to an exit status and a structured diagnostic.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace biastrace
