#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tadc/tensor.hpp"

namespace tadc {

/// Planar float image [C,H,W]; pixel values are in [0,1] unless noted.
struct Image {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> data;

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
        : channels(c), height(h), width(w), data(c * h * w, fill) {}

    std::size_t plane() const { return height * width; }
    float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }

    bool operator==(const Image&) const = default;
};

/// Stacks same-sized images into [B, C, H, W].
Tensor to_tensor(std::span<const Image> images);
Tensor to_tensor(const Image& image);
/// Sample `index` of a [B,C,H,W] (or [C,H,W]) tensor.
Image image_from_tensor(const Tensor& t, std::size_t index = 0);

std::uint8_t from_unit_range(float v);
float to_unit_range(std::uint8_t v);

/// Snaps every value to the nearest 8-bit level (what a PNG round trip yields).
Image quantize8(const Image& image);

/// Area-average resampling to the given size (exact box integration).
Image resize_area(const Image& image, std::size_t height, std::size_t width);

/// Mask with values in {0,1}: anything >= 0.5 maps to 1.
Image binarize(const Image& image);

/// PNG, 8-bit. Reading converts to `channels` (1 = gray, 3 = RGB).
Image read_png(const std::filesystem::path& path, std::size_t channels = 3);
void write_png(const std::filesystem::path& path, const Image& image);

/// Binary PGM (P5), 8-bit or 16-bit (big-endian samples). Single channel.
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& image, int bits = 8);

/// Reads .png or .pgm by extension.
Image read_image(const std::filesystem::path& path, std::size_t channels = 3);
void write_image(const std::filesystem::path& path, const Image& image);

/// Writes `bytes` to `path` via a temporary sibling and rename.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write(const std::filesystem::path& path, const std::string& text);

}  // namespace tadc
