#include <algorithm>
#include <array>
#include <cmath>

#include "biastrace/disparity.hpp"
#include "biastrace/error.hpp"

// Wider vectors without fma keep every rounding step identical to the default build.
#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
#define BIASTRACE_WIDE __attribute__((target_clones("avx2", "default")))
#else
#define BIASTRACE_WIDE
#endif

namespace biastrace::disparity {
namespace {

std::array<double, kSsimWindow> gaussian_taps() {
    std::array<double, kSsimWindow> w{};
    const int r = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - r;
        w[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

const std::array<double, kSsimWindow>& taps() {
    static const auto w = gaussian_taps();
    return w;
}

void check_pair(const RgbImage& a, const RgbImage& b) {
    if (a.width != b.width || a.height != b.height) {
        throw Error(ErrorCode::DimensionMismatch, std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                                      std::to_string(b.width) + "x" + std::to_string(b.height));
    }
    if (a.width < std::uint32_t(kSsimWindow) || a.height < std::uint32_t(kSsimWindow)) {
        throw Error(ErrorCode::DimensionMismatch, "image smaller than the 11x11 SSIM window");
    }
}

// Scratch buffers reused across calls on the same thread.
struct Workspace {
    std::vector<double> la, lb;
    std::array<std::vector<double>, 5> rows;  // horizontally filtered x, y, xx, yy, xy
    std::array<std::vector<double>, 5> acc;
    std::array<std::vector<double>, 3> prod;  // xx, yy, xy of the current row
};

Workspace& workspace() {
    thread_local Workspace ws;
    return ws;
}

void luma_into(const RgbImage& img, std::vector<double>& out) {
    const std::size_t n = std::size_t(img.width) * img.height;
    out.resize(n);
    const std::uint8_t* p = img.pixels.data();
    for (std::size_t i = 0; i < n; ++i, p += 3) out[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
}

// dst[x] = sum_k w[k] * src[x + k * stride], accumulated in tap order
BIASTRACE_WIDE void filter(const double* __restrict src, std::size_t stride, double* __restrict dst, std::size_t n,
                           const std::array<double, kSsimWindow>& w) {
    std::array<double, kSsimWindow> t;
    std::copy(w.begin(), w.end(), t.begin());
    for (std::size_t x = 0; x < n; ++x) {
        double acc = t[0] * src[x];
        for (int k = 1; k < kSsimWindow; ++k) acc += t[k] * src[x + std::size_t(k) * stride];
        dst[x] = acc;
    }
}

}  // namespace

std::vector<double> luma(const RgbImage& img) {
    std::vector<double> out;
    luma_into(img, out);
    return out;
}

SsimMap ssim_map(const RgbImage& a, const RgbImage& b) {
    check_pair(a, b);
    const auto& w = taps();
    const std::size_t W = a.width;
    const std::size_t H = a.height;
    const std::size_t ow = W - (kSsimWindow - 1);
    const std::size_t oh = H - (kSsimWindow - 1);

    Workspace& ws = workspace();
    luma_into(a, ws.la);
    luma_into(b, ws.lb);
    for (auto& r : ws.rows) r.resize(H * ow);
    for (auto& r : ws.prod) r.resize(W);

    // Horizontal pass over the five moment images.
    for (std::size_t y = 0; y < H; ++y) {
        const double* __restrict xa = ws.la.data() + y * W;
        const double* __restrict xb = ws.lb.data() + y * W;
        double* __restrict paa = ws.prod[0].data();
        double* __restrict pbb = ws.prod[1].data();
        double* __restrict pab = ws.prod[2].data();
        for (std::size_t x = 0; x < W; ++x) {
            paa[x] = xa[x] * xa[x];
            pbb[x] = xb[x] * xb[x];
            pab[x] = xa[x] * xb[x];
        }
        filter(xa, 1, ws.rows[0].data() + y * ow, ow, w);
        filter(xb, 1, ws.rows[1].data() + y * ow, ow, w);
        filter(paa, 1, ws.rows[2].data() + y * ow, ow, w);
        filter(pbb, 1, ws.rows[3].data() + y * ow, ow, w);
        filter(pab, 1, ws.rows[4].data() + y * ow, ow, w);
    }

    SsimMap out;
    out.width = static_cast<std::uint32_t>(ow);
    out.height = static_cast<std::uint32_t>(oh);
    out.values.resize(ow * oh);
    for (auto& v : ws.acc) v.resize(ow);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t c = 0; c < 5; ++c) filter(ws.rows[c].data() + y * ow, ow, ws.acc[c].data(), ow, w);
        const double* __restrict ax = ws.acc[0].data();
        const double* __restrict ay = ws.acc[1].data();
        const double* __restrict axx = ws.acc[2].data();
        const double* __restrict ayy = ws.acc[3].data();
        const double* __restrict axy = ws.acc[4].data();
        double* __restrict o = out.values.data() + y * ow;
        for (std::size_t x = 0; x < ow; ++x) {
            const double mx = ax[x];
            const double my = ay[x];
            const double vx = axx[x] - mx * mx;
            const double vy = ayy[x] - my * my;
            const double cxy = axy[x] - mx * my;
            const double num = (2.0 * (mx * my) + kSsimC1) * (2.0 * cxy + kSsimC2);
            const double den = (mx * mx + my * my + kSsimC1) * (vx + vy + kSsimC2);
            o[x] = num / den;
        }
    }
    return out;
}

SsimSummary ssim_summary(const RgbImage& a, const RgbImage& b, double tau) {
    const SsimMap m = ssim_map(a, b);
    // Row sums then a sum over rows keeps the accumulation order fixed.
    double total = 0.0;
    std::size_t below = 0;
    for (std::size_t y = 0; y < m.height; ++y) {
        double row = 0.0;
        const double* v = m.values.data() + y * m.width;
        for (std::size_t x = 0; x < m.width; ++x) {
            row += v[x];
            if (v[x] < tau) ++below;
        }
        total += row;
    }
    const double n = static_cast<double>(m.values.size());
    return {total / n, 100.0 * static_cast<double>(below) / n};
}

double mean_ssim(const RgbImage& a, const RgbImage& b) { return ssim_summary(a, b, 0.5).mean_ssim; }

double diff_pix(const RgbImage& a, const RgbImage& b, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorCode::InvalidArgument, "diff_pix tau must lie in (0,1)");
    return ssim_summary(a, b, tau).diff_pix;
}

}  // namespace biastrace::disparity
