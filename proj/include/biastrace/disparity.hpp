#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "biastrace/types.hpp"

namespace biastrace::disparity {

enum class PairKind { neutral_vs_feminine, neutral_vs_masculine };

inline constexpr std::array<PairKind, 2> kPairKinds = {PairKind::neutral_vs_feminine, PairKind::neutral_vs_masculine};

std::string_view to_string(PairKind p) noexcept;
GenderVariant counterpart(PairKind p) noexcept;

/// cos(a, b) in double precision. Throws ZeroVector / LengthMismatch.
double cosine(std::span<const float> a, std::span<const float> b);

/// Mean of cos(a_i, b_i); tensors are compared flattened row-major.
double cosine_pair_mean(const std::vector<Tensor>& a, const std::vector<Tensor>& b);

// SSIM parameterization.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kSsimC1 = (kSsimK1 * 255.0) * (kSsimK1 * 255.0);
inline constexpr double kSsimC2 = (kSsimK2 * 255.0) * (kSsimK2 * 255.0);

/// Rec. 601 luma in [0, 255].
std::vector<double> luma(const RgbImage& img);

/// Local SSIM over the fully-windowed region: (w-10) x (h-10) values.
struct SsimMap {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<double> values;
};

SsimMap ssim_map(const RgbImage& a, const RgbImage& b);

struct SsimSummary {
    double mean_ssim = 0.0;
    double diff_pix = 0.0;  // percent of valid pixels with local SSIM < tau
};

/// Both image-structure metrics from a single SSIM map.
SsimSummary ssim_summary(const RgbImage& a, const RgbImage& b, double tau);
double mean_ssim(const RgbImage& a, const RgbImage& b);
double diff_pix(const RgbImage& a, const RgbImage& b, double tau);

std::map<std::string, double> feature_cosine(const std::map<std::string, Tensor>& a,
                                             const std::map<std::string, Tensor>& b);

/// max over p of cos(a_p, b_p) for P x D patch tensors.
double split_product(const Tensor& a, const Tensor& b);

enum class Metric { prompt, denoise, ssim, diffpix, features, split };

std::string_view to_string(Metric m) noexcept;
std::optional<Metric> parse_metric(std::string_view s) noexcept;
std::set<Metric> all_metrics();

struct DisparityOptions {
    std::set<Metric> metrics = all_metrics();
    double diffpix_tau = 0.5;
    unsigned threads = 1;
};

struct DisparityRow {
    PairKind pair = PairKind::neutral_vs_feminine;
    std::optional<double> prompt_sim;
    std::optional<double> denoise_sim;
    std::optional<double> ssim;
    std::optional<double> diff_pix;
    std::map<std::string, double> feature_sims;
    std::optional<double> split_product;
    std::size_t n_pairs = 0;
    std::map<std::string, std::size_t> cell_counts;  // pairs contributing to each present cell
};

/// One row per PairKind; each cell is the mean over the pairs that carry the
/// needed artifacts. Cells with no contributing pair stay absent. Output is
/// independent of triplet order and thread count.
std::vector<DisparityRow> disparity_table(const DatasetManifest& manifest, const DisparityOptions& options);

nlohmann::json to_json(const DisparityRow& row);
nlohmann::json table_to_json(const std::vector<DisparityRow>& rows);
std::vector<DisparityRow> table_from_json(const nlohmann::json& j);

}  // namespace biastrace::disparity
