#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "biastrace/error.hpp"
#include "biastrace/report.hpp"

namespace biastrace::report {
namespace {

// 1100 digits cover the full decimal expansion of any double.
constexpr int kExactDigits = 1100;

std::string exact(double v, std::chars_format fmt) {
    std::string buf(kExactDigits + 400, '\0');
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, fmt, kExactDigits);
    if (ec != std::errc()) throw Error(ErrorCode::InvalidArgument, "cannot format number");
    buf.resize(static_cast<std::size_t>(end - buf.data()));
    return buf;
}

// Rounds the digit string `digits` (no sign, no point) to `keep` digits,
// half to even on the discarded tail. Returns true on carry out of the top.
bool round_digits(std::string& digits, std::size_t keep) {
    if (digits.size() <= keep) {
        digits.append(keep - digits.size(), '0');
        return false;
    }
    const char first = digits[keep];
    bool rest_nonzero = false;
    for (std::size_t i = keep + 1; i < digits.size(); ++i) {
        if (digits[i] != '0') {
            rest_nonzero = true;
            break;
        }
    }
    digits.resize(keep);
    bool up = false;
    if (first > '5') {
        up = true;
    } else if (first == '5') {
        up = rest_nonzero || (keep > 0 && (digits[keep - 1] - '0') % 2 == 1);
    }
    if (!up) return false;
    for (std::size_t i = keep; i-- > 0;) {
        if (digits[i] == '9') {
            digits[i] = '0';
        } else {
            ++digits[i];
            return false;
        }
    }
    return true;
}

}  // namespace

std::string fixed_half_even(double v, int decimals) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "cannot round a non-finite value");
    if (decimals < 0) throw Error(ErrorCode::InvalidArgument, "decimals must be >= 0");
    std::string s = exact(v, std::chars_format::fixed);
    bool negative = false;
    if (!s.empty() && s[0] == '-') {
        negative = true;
        s.erase(0, 1);
    }
    const auto dot = s.find('.');
    std::string int_part = s.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
    std::string digits = int_part + frac;
    const std::size_t keep = int_part.size() + static_cast<std::size_t>(decimals);
    if (round_digits(digits, keep)) {
        digits.insert(digits.begin(), '1');
        int_part.insert(int_part.begin(), '0');
    }
    std::string out = digits.substr(0, int_part.size());
    if (decimals > 0) out += "." + digits.substr(int_part.size());
    if (negative && out.find_first_not_of("0.") != std::string::npos) out.insert(out.begin(), '-');
    return out;
}

std::string sci3(double v) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "cannot round a non-finite value");
    if (v == 0.0) return "0.00e+00";
    std::string s = exact(v, std::chars_format::scientific);
    bool negative = false;
    if (s[0] == '-') {
        negative = true;
        s.erase(0, 1);
    }
    const auto e = s.find('e');
    int exponent = std::stoi(s.substr(e + 1));
    std::string mantissa = s.substr(0, e);
    mantissa.erase(1, 1);  // drop the point
    if (round_digits(mantissa, 3)) {
        mantissa = "100";
        ++exponent;
    }
    char exp_buf[16];
    std::snprintf(exp_buf, sizeof exp_buf, "e%c%02d", exponent < 0 ? '-' : '+', std::abs(exponent));
    std::string out = negative ? "-" : "";
    out += mantissa.substr(0, 1) + "." + mantissa.substr(1, 2) + exp_buf;
    return out;
}

}  // namespace biastrace::report
