#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "biastrace/types.hpp"

namespace biastrace {

// F32T layout: "F32T" | version u8 (=1) | ndim u8 (1..4) | ndim x u32 LE dims |
// prod(dims) x f32 LE, row-major, no padding.
inline constexpr std::uint8_t kF32TVersion = 1;
inline constexpr std::size_t kF32TMaxDims = 4;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& t, const std::filesystem::path& path);

}  // namespace biastrace
