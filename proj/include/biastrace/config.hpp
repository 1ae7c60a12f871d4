#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace biastrace {

/// How a detected object's name is compared with the prompt's noun set.
enum class MatchPolicy { full_string, head_noun, any_token };

std::string_view to_string(MatchPolicy p) noexcept;
std::optional<MatchPolicy> parse_match_policy(std::string_view s) noexcept;

struct EngineConfig {
    double theta = 0.35;        // attention binarization threshold
    double sigma_human = 0.25;  // coverage threshold when object and word both denote humans
    double sigma_other = 0.7;   // coverage threshold otherwise
    double diffpix_tau = 0.5;   // local-SSIM threshold for Diff.Pix
    std::int64_t min_max_count = 20;
    std::int64_t min_objects_chi = 5;
    MatchPolicy match_policy = MatchPolicy::full_string;
    bool exclude_persons = false;
    bool yates = false;
    std::uint32_t threads = 1;
    std::int64_t seed_base = 0;

    /// Throws Error(InvalidArgument) when a threshold is out of range.
    void validate() const;

    friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

}  // namespace biastrace
