#include "biastrace/image_io.hpp"

#include <png.h>

#include <cstring>
#include <vector>

#include "biastrace/atomic_file.hpp"
#include "biastrace/error.hpp"

namespace biastrace {
namespace {

struct PngReader {
    png_image image;
    PngReader() {
        std::memset(&image, 0, sizeof image);
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngReader() { png_image_free(&image); }
    PngReader(const PngReader&) = delete;
    PngReader& operator=(const PngReader&) = delete;
};

std::vector<std::uint8_t> decode(const std::filesystem::path& path, png_uint_32 format, bool require_gray,
                                 std::uint32_t& width, std::uint32_t& height) {
    const std::string bytes = read_file(path);
    PngReader r;
    if (!png_image_begin_read_from_memory(&r.image, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::BadImage, path.filename().string() + ": " + r.image.message);
    }
    if (require_gray && (r.image.format & PNG_FORMAT_FLAG_COLOR) != 0) {
        throw Error(ErrorCode::BadImage, path.filename().string() + ": mask must be grayscale");
    }
    r.image.format = format;
    width = r.image.width;
    height = r.image.height;
    if (width == 0 || height == 0) throw Error(ErrorCode::BadImage, path.filename().string() + ": empty image");
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(r.image));
    if (!png_image_finish_read(&r.image, nullptr, buf.data(), 0, nullptr)) {
        throw Error(ErrorCode::BadImage, path.filename().string() + ": " + r.image.message);
    }
    return buf;
}

void encode(const std::filesystem::path& path, const std::uint8_t* pixels, std::uint32_t width,
            std::uint32_t height, png_uint_32 format) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = width;
    image.height = height;
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw Error(ErrorCode::BadImage, "png encode: " + std::string(image.message));
    }
    std::vector<char> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw Error(ErrorCode::BadImage, "png encode: " + std::string(image.message));
    }
    write_file_atomic(path, std::string_view(out.data(), size));
}

}  // namespace

RgbImage read_rgb_png(const std::filesystem::path& path) {
    RgbImage img;
    img.pixels = decode(path, PNG_FORMAT_RGB, false, img.width, img.height);
    return img;
}

void write_rgb_png(const RgbImage& image, const std::filesystem::path& path) {
    if (image.pixels.size() != std::size_t(image.width) * image.height * 3) {
        throw Error(ErrorCode::ShapeMismatch, "rgb buffer size does not match dimensions");
    }
    encode(path, image.pixels.data(), image.width, image.height, PNG_FORMAT_RGB);
}

MaskImage read_mask_png(const std::filesystem::path& path) {
    MaskImage m;
    auto gray = decode(path, PNG_FORMAT_GRAY, true, m.width, m.height);
    for (auto& g : gray) g = g != 0 ? 1 : 0;
    m.bits = std::move(gray);
    return m;
}

void write_mask_png(const MaskImage& mask, const std::filesystem::path& path) {
    if (mask.bits.size() != std::size_t(mask.width) * mask.height) {
        throw Error(ErrorCode::ShapeMismatch, "mask buffer size does not match dimensions");
    }
    std::vector<std::uint8_t> gray(mask.bits.size());
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = mask.bits[i] ? 255 : 0;
    encode(path, gray.data(), mask.width, mask.height, PNG_FORMAT_GRAY);
}

}  // namespace biastrace
