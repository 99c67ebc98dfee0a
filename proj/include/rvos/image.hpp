#pragma once

#include "rvos/mask.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rvos {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit interleaved RGB frame.
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int height, int width, Rgb fill = {});
    RgbImage(int height, int width, std::vector<std::uint8_t> data);

    int height() const { return height_; }
    int width() const { return width_; }
    Extent extent() const { return {height_, width_}; }

    Rgb at(int row, int col) const {
        const auto i = offset(row, col);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set(int row, int col, Rgb c) {
        const auto i = offset(row, col);
        data_[i] = c.r;
        data_[i + 1] = c.g;
        data_[i + 2] = c.b;
    }

    std::span<const std::uint8_t> data() const { return data_; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    std::size_t offset(int row, int col) const {
        return (static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)) * 3;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

struct OverlayStyle {
    Rgb color{255, 0, 0};
    int width = 1;  // band thickness in pixels, >= 1
};

/// Recolors the mask boundary, thickened to style.width; every other pixel is untouched.
RgbImage overlay_boundary(const RgbImage& frame, const BinaryMask& mask, const OverlayStyle& style);

/// Accepts `#rrggbb`, `rrggbb` or `r,g,b`.
Rgb parse_color(std::string_view text);

// PNG codec. Decoding converts gray/alpha/palette/16-bit input to 8-bit RGB.
std::string encode_png(const RgbImage& image);
RgbImage decode_png(std::string_view bytes);
std::string encode_png_gray(const BinaryMask& mask);  // foreground = 255
BinaryMask decode_png_mask(std::string_view bytes);   // any non-zero luma is foreground

RgbImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& image);
BinaryMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

/// FNV-1a over dimensions and pixels; identifies frames by content.
std::uint64_t content_hash(const RgbImage& image);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace rvos
