#include <algorithm>
#include <string>

#include "biastrace/config.hpp"
#include "biastrace/error.hpp"
#include "biastrace/types.hpp"

namespace biastrace {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::MissingVariant: return "MissingVariant";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::DimOverflow: return "DimOverflow";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::Truncated: return "Truncated";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::BadImage: return "BadImage";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::BadSwapPosition: return "BadSwapPosition";
        case ErrorCode::ProfessionNotFound: return "ProfessionNotFound";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::KeyMismatch: return "KeyMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::NoOccurrence: return "NoOccurrence";
        case ErrorCode::DegenerateTable: return "DegenerateTable";
        case ErrorCode::EmptyObjectMask: return "EmptyObjectMask";
        case ErrorCode::MissingSection: return "MissingSection";
        case ErrorCode::EmptyEntries: return "EmptyEntries";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

std::string_view to_string(GenderVariant v) noexcept {
    switch (v) {
        case GenderVariant::neutral: return "neutral";
        case GenderVariant::feminine: return "feminine";
        case GenderVariant::masculine: return "masculine";
    }
    return "neutral";
}

std::optional<GenderVariant> parse_variant(std::string_view s) noexcept {
    for (GenderVariant v : kAllVariants) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

std::string_view to_string(MatchPolicy p) noexcept {
    switch (p) {
        case MatchPolicy::full_string: return "full-string";
        case MatchPolicy::head_noun: return "head-noun";
        case MatchPolicy::any_token: return "any-token";
    }
    return "full-string";
}

std::optional<MatchPolicy> parse_match_policy(std::string_view s) noexcept {
    if (s == "full-string") return MatchPolicy::full_string;
    if (s == "head-noun") return MatchPolicy::head_noun;
    if (s == "any-token") return MatchPolicy::any_token;
    return std::nullopt;
}

void EngineConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
    if (!(theta > 0.0 && theta < 1.0)) fail("theta must lie in (0,1)");
    if (!(sigma_human > 0.0 && sigma_human <= 1.0)) fail("sigma_human must lie in (0,1]");
    if (!(sigma_other > 0.0 && sigma_other <= 1.0)) fail("sigma_other must lie in (0,1]");
    if (!(diffpix_tau > 0.0 && diffpix_tau < 1.0)) fail("diffpix_tau must lie in (0,1)");
    if (min_max_count < 0) fail("min_max_count must be >= 0");
    if (min_objects_chi < 0) fail("min_objects_chi must be >= 0");
    if (threads == 0) fail("threads must be >= 1");
}

std::size_t MaskImage::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

}  // namespace biastrace
