#include "biastrace/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "biastrace/atomic_file.hpp"
#include "biastrace/error.hpp"

namespace biastrace {
namespace {

constexpr std::array<char, 4> kMagic = {'F', '3', '2', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

}  // namespace

Tensor::Tensor(std::vector<std::uint32_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
    if (dims_.empty() || dims_.size() > kF32TMaxDims) {
        throw Error(ErrorCode::DimOverflow, "tensor rank must be 1..4, got " + std::to_string(dims_.size()));
    }
    std::uint64_t n = 1;
    for (auto d : dims_) {
        if (d == 0) throw Error(ErrorCode::DimOverflow, "tensor dimension of size 0");
        n *= d;
        if (n > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorCode::DimOverflow, "tensor too large");
    }
    if (n != data_.size()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "data length " + std::to_string(data_.size()) + " != product of dims " + std::to_string(n));
    }
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    std::vector<std::uint8_t> out;
    out.reserve(6 + 4 * t.dims().size() + 4 * t.size());
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    out.push_back(kF32TVersion);
    out.push_back(static_cast<std::uint8_t>(t.dims().size()));
    for (auto d : t.dims()) put_u32(out, d);
    for (float f : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
        throw Error(ErrorCode::BadMagic, "missing F32T magic");
    }
    if (bytes[4] != kF32TVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "F32T version " + std::to_string(bytes[4]));
    }
    const std::size_t ndim = bytes[5];
    if (ndim == 0 || ndim > kF32TMaxDims) {
        throw Error(ErrorCode::DimOverflow, "F32T ndim " + std::to_string(ndim) + " outside 1..4");
    }
    const std::size_t header = 6 + 4 * ndim;
    if (bytes.size() < header) throw Error(ErrorCode::Truncated, "F32T header truncated");

    std::vector<std::uint32_t> dims(ndim);
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        dims[i] = get_u32(bytes.data() + 6 + 4 * i);
        if (dims[i] == 0) throw Error(ErrorCode::DimOverflow, "F32T zero-sized dimension");
        count *= dims[i];
        if (count > std::numeric_limits<std::uint32_t>::max()) throw Error(ErrorCode::DimOverflow, "F32T too large");
    }
    const std::uint64_t expected = header + 4 * count;
    if (bytes.size() < expected) {
        throw Error(ErrorCode::Truncated, "F32T payload has " + std::to_string(bytes.size() - header) +
                                              " bytes, expected " + std::to_string(4 * count));
    }
    if (bytes.size() > expected) throw Error(ErrorCode::SchemaError, "F32T trailing bytes");

    std::vector<float> data(count);
    const std::uint8_t* p = bytes.data() + header;
    for (std::size_t i = 0; i < count; ++i, p += 4) {
        const float f = std::bit_cast<float>(get_u32(p));
        if (!std::isfinite(f)) {
            throw Error(ErrorCode::NonFiniteValue, "non-finite value at element " + std::to_string(i));
        }
        data[i] = f;
    }
    return Tensor(std::move(dims), std::move(data));
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.filename().string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes);
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
    const auto bytes = encode_tensor(t);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace biastrace
