#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rvos {

struct Extent {
    int height = 0;
    int width = 0;

    std::size_t pixels() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
    friend bool operator==(const Extent&, const Extent&) = default;
};

/// Per-frame foreground bitmap, row-major, one byte (0 or 1) per pixel.
class BinaryMask {
public:
    BinaryMask() = default;
    /// All-background mask. Throws InvalidSpec when either side is < 1.
    BinaryMask(int height, int width);
    BinaryMask(int height, int width, std::vector<std::uint8_t> bits);

    static BinaryMask full(int height, int width);

    int height() const { return height_; }
    int width() const { return width_; }
    Extent extent() const { return {height_, width_}; }
    std::size_t size() const { return bits_.size(); }

    bool at(int row, int col) const { return bits_[index(row, col)] != 0; }
    void set(int row, int col, bool value = true) { bits_[index(row, col)] = value ? 1 : 0; }

    bool in_bounds(int row, int col) const { return row >= 0 && col >= 0 && row < height_ && col < width_; }

    std::span<const std::uint8_t> bits() const { return bits_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Uncompressed COCO-style run lengths: column-major scan, first run is background.
struct RleMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint32_t> counts;

    friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleMask& rle);

/// `h,w:c0 c1 c2 ...`
std::string rle_to_text(const RleMask& rle);
RleMask rle_from_text(std::string_view text);

// Foreground pixel count straight from the runs.
std::size_t rle_area(const RleMask& rle);
inline bool rle_empty(const RleMask& rle) { return rle_area(rle) == 0; }
RleMask rle_empty_mask(int height, int width);

std::size_t area(const BinaryMask& mask);
inline bool empty(const BinaryMask& mask) { return area(mask) == 0; }

/// |a∩b| / |a∪b|, with 1.0 when both masks are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Foreground pixels 4-adjacent to background or to the image border.
BinaryMask boundary_map(const BinaryMask& mask);

/// Dilation with a Euclidean disc: every pixel within `radius` of a foreground pixel.
BinaryMask dilate_disc(const BinaryMask& mask, int radius);

/// Boundary F-measure. A boundary pixel matches when a pixel of the other
/// boundary lies within Euclidean distance `tol`. Both boundaries empty → 1,
/// exactly one empty → 0.
double boundary_f(const BinaryMask& pred, const BinaryMask& gt, int tol);

/// round(0.8% of the image diagonal), at least 1.
int default_boundary_tolerance(int height, int width);

/// Pixelwise OR. An empty list needs `hint` for the output size.
BinaryMask mask_union(std::span<const BinaryMask> masks, std::optional<Extent> hint = std::nullopt);
BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);

/// Shift by (dx, dy); pixels leaving the canvas are dropped.
BinaryMask translate(const BinaryMask& mask, int dx, int dy);

struct Centroid {
    double x = 0;
    double y = 0;
};
// nullopt for an empty mask.
std::optional<Centroid> centroid(const BinaryMask& mask);

} // namespace rvos
