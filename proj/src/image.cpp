#include "rvos/image.hpp"

#include "rvos/error.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <charconv>
#include <fstream>
#include <memory>

namespace rvos {

RgbImage::RgbImage(int height, int width, Rgb fill) : height_(height), width_(width) {
    if (height < 1 || width < 1) throw Error(ErrorCode::BadImage, "image dimensions must be >= 1");
    data_.resize(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

RgbImage::RgbImage(int height, int width, std::vector<std::uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (height < 1 || width < 1) throw Error(ErrorCode::BadImage, "image dimensions must be >= 1");
    if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3) {
        throw Error(ErrorCode::BadImage, "pixel buffer does not match height*width*3");
    }
}

RgbImage overlay_boundary(const RgbImage& frame, const BinaryMask& mask, const OverlayStyle& style) {
    if (frame.extent() != mask.extent()) {
        throw Error(ErrorCode::DimensionMismatch, "overlay: frame and mask sizes differ");
    }
    const BinaryMask band = dilate_disc(boundary_map(mask), std::max(0, style.width - 1));
    RgbImage out = frame;
    for (int r = 0; r < band.height(); ++r) {
        for (int c = 0; c < band.width(); ++c) {
            if (band.at(r, c)) out.set(r, c, style.color);
        }
    }
    return out;
}

Rgb parse_color(std::string_view text) {
    auto bad = [&]() -> Rgb { throw Error(ErrorCode::InvalidSpec, "bad color '" + std::string(text) + "'"); };
    if (text.find(',') != std::string_view::npos) {
        int parts[3];
        for (int k = 0; k < 3; ++k) {
            const auto comma = text.find(',');
            const auto tok = text.substr(0, comma);
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), parts[k]);
            if (ec != std::errc{} || p != tok.data() + tok.size() || parts[k] < 0 || parts[k] > 255) return bad();
            if (k < 2 && comma == std::string_view::npos) return bad();
            if (k == 2 && comma != std::string_view::npos) return bad();
            text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        }
        return {static_cast<std::uint8_t>(parts[0]), static_cast<std::uint8_t>(parts[1]),
                static_cast<std::uint8_t>(parts[2])};
    }
    if (!text.empty() && text.front() == '#') text.remove_prefix(1);
    if (text.size() != 6) return bad();
    unsigned value = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + 6, value, 16);
    if (ec != std::errc{} || p != text.data() + 6) return bad();
    return {static_cast<std::uint8_t>(value >> 16), static_cast<std::uint8_t>(value >> 8),
            static_cast<std::uint8_t>(value)};
}

namespace {

struct PngImage {
    png_image image{};
    PngImage() { image.version = PNG_IMAGE_VERSION; }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

std::string encode(const std::uint8_t* pixels, int height, int width, png_uint_32 format) {
    PngImage png;
    png.image.width = static_cast<png_uint_32>(width);
    png.image.height = static_cast<png_uint_32>(height);
    png.image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw Error(ErrorCode::BadImage, std::string("png encode: ") + png.image.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw Error(ErrorCode::BadImage, std::string("png encode: ") + png.image.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> decode(std::string_view bytes, png_uint_32 format, int& height, int& width) {
    PngImage png;
    if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::BadImage, std::string("png decode: ") + png.image.message);
    }
    png.image.format = format;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, buffer.data(), 0, nullptr)) {
        throw Error(ErrorCode::BadImage, std::string("png decode: ") + png.image.message);
    }
    height = static_cast<int>(png.image.height);
    width = static_cast<int>(png.image.width);
    return buffer;
}

} // namespace

std::string encode_png(const RgbImage& image) {
    return encode(image.data().data(), image.height(), image.width(), PNG_FORMAT_RGB);
}

RgbImage decode_png(std::string_view bytes) {
    int h = 0, w = 0;
    auto pixels = decode(bytes, PNG_FORMAT_RGB, h, w);
    return RgbImage(h, w, std::move(pixels));
}

std::string encode_png_gray(const BinaryMask& mask) {
    std::vector<std::uint8_t> gray(mask.size());
    const auto bits = mask.bits();
    for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = bits[i] ? 255 : 0;
    return encode(gray.data(), mask.height(), mask.width(), PNG_FORMAT_GRAY);
}

BinaryMask decode_png_mask(std::string_view bytes) {
    int h = 0, w = 0;
    auto gray = decode(bytes, PNG_FORMAT_GRAY, h, w);
    return BinaryMask(h, w, std::move(gray));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

RgbImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }
void write_png(const std::filesystem::path& path, const RgbImage& image) { write_file(path, encode_png(image)); }
BinaryMask read_mask_png(const std::filesystem::path& path) { return decode_png_mask(read_file(path)); }
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
    write_file(path, encode_png_gray(mask));
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw Error(ErrorCode::BadImage, "base64 length is not a multiple of 4");
    std::string out(3 * text.size() / 4, '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) throw Error(ErrorCode::BadImage, "invalid base64");
    // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') ++pad;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::uint64_t content_hash(const RgbImage& image) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint8_t byte) {
        h ^= byte;
        h *= 1099511628211ULL;
    };
    for (int shift = 0; shift < 32; shift += 8) {
        mix(static_cast<std::uint8_t>(image.height() >> shift));
        mix(static_cast<std::uint8_t>(image.width() >> shift));
    }
    for (auto b : image.data()) mix(b);
    return h;
}

} // namespace rvos
