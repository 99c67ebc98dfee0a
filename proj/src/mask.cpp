#include "rvos/mask.hpp"

#include "rvos/error.hpp"

#include <charconv>
#include <cmath>
#include <numeric>

namespace rvos {

namespace {

void require_same_extent(const BinaryMask& a, const BinaryMask& b, const char* op) {
    if (a.extent() != b.extent()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(op) + ": " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                        " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
    }
}

void require_valid_extent(int height, int width) {
    if (height < 1 || width < 1) {
        throw Error(ErrorCode::InvalidSpec,
                    "mask dimensions must be >= 1, got " + std::to_string(height) + "x" + std::to_string(width));
    }
}

} // namespace

BinaryMask::BinaryMask(int height, int width) : height_(height), width_(width) {
    require_valid_extent(height, width);
    bits_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> bits)
    : height_(height), width_(width), bits_(std::move(bits)) {
    require_valid_extent(height, width);
    if (bits_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        throw Error(ErrorCode::DimensionMismatch, "bit count does not match height*width");
    }
    for (auto& b : bits_) b = b ? 1 : 0;
}

BinaryMask BinaryMask::full(int height, int width) {
    BinaryMask m(height, width);
    std::fill(m.bits_.begin(), m.bits_.end(), std::uint8_t{1});
    return m;
}

RleMask rle_encode(const BinaryMask& mask) {
    RleMask rle{mask.height(), mask.width(), {}};
    bool current = false;
    std::uint32_t run = 0;
    for (int col = 0; col < mask.width(); ++col) {
        for (int row = 0; row < mask.height(); ++row) {
            const bool v = mask.at(row, col);
            if (v != current) {
                rle.counts.push_back(run);
                run = 0;
                current = v;
            }
            ++run;
        }
    }
    rle.counts.push_back(run);
    return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
    if (rle.height < 1 || rle.width < 1) {
        throw Error(ErrorCode::MalformedRle, "non-positive dimensions");
    }
    const std::size_t total = static_cast<std::size_t>(rle.height) * static_cast<std::size_t>(rle.width);
    std::size_t sum = 0;
    for (std::size_t i = 0; i < rle.counts.size(); ++i) {
        if (i > 0 && rle.counts[i] == 0) {
            throw Error(ErrorCode::MalformedRle, "zero-length run at position " + std::to_string(i));
        }
        sum += rle.counts[i];
    }
    if (rle.counts.empty() || sum != total) {
        throw Error(ErrorCode::MalformedRle,
                    "run lengths sum to " + std::to_string(sum) + ", expected " + std::to_string(total));
    }
    BinaryMask mask(rle.height, rle.width);
    std::size_t pos = 0;
    bool value = false;
    for (auto run : rle.counts) {
        if (value) {
            for (std::size_t k = pos; k < pos + run; ++k) {
                const int col = static_cast<int>(k / static_cast<std::size_t>(rle.height));
                const int row = static_cast<int>(k % static_cast<std::size_t>(rle.height));
                mask.set(row, col);
            }
        }
        pos += run;
        value = !value;
    }
    return mask;
}

std::string rle_to_text(const RleMask& rle) {
    std::string out = std::to_string(rle.height) + "," + std::to_string(rle.width) + ":";
    for (std::size_t i = 0; i < rle.counts.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(rle.counts[i]);
    }
    return out;
}

RleMask rle_from_text(std::string_view text) {
    auto fail = [&](const std::string& why) -> RleMask {
        throw Error(ErrorCode::MalformedRle, why + " in '" + std::string(text.substr(0, 64)) + "'");
    };
    auto parse_int = [&](std::string_view s, auto& out) {
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
    };
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) return fail("missing ':'");
    const auto head = text.substr(0, colon);
    const auto comma = head.find(',');
    if (comma == std::string_view::npos) return fail("missing ','");
    RleMask rle;
    if (!parse_int(head.substr(0, comma), rle.height) || !parse_int(head.substr(comma + 1), rle.width)) {
        return fail("bad dimensions");
    }
    auto body = text.substr(colon + 1);
    while (!body.empty()) {
        const auto sp = body.find(' ');
        const auto tok = body.substr(0, sp);
        std::uint32_t v = 0;
        if (!parse_int(tok, v)) return fail("bad count '" + std::string(tok) + "'");
        rle.counts.push_back(v);
        if (sp == std::string_view::npos) break;
        body = body.substr(sp + 1);
    }
    // Validates the sum and run structure.
    std::size_t sum = std::accumulate(rle.counts.begin(), rle.counts.end(), std::size_t{0});
    if (rle.height < 1 || rle.width < 1 || rle.counts.empty() ||
        sum != static_cast<std::size_t>(rle.height) * static_cast<std::size_t>(rle.width)) {
        return fail("run lengths do not cover the mask");
    }
    for (std::size_t i = 1; i < rle.counts.size(); ++i) {
        if (rle.counts[i] == 0) return fail("zero-length interior run");
    }
    return rle;
}

std::size_t rle_area(const RleMask& rle) {
    std::size_t total = 0;
    for (std::size_t i = 1; i < rle.counts.size(); i += 2) total += rle.counts[i];
    return total;
}

RleMask rle_empty_mask(int height, int width) {
    return RleMask{height, width, {static_cast<std::uint32_t>(height * width)}};
}

std::size_t area(const BinaryMask& mask) {
    std::size_t n = 0;
    for (auto b : mask.bits()) n += b;
    return n;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    require_same_extent(a, b, "iou");
    std::size_t inter = 0;
    std::size_t uni = 0;
    const auto ab = a.bits();
    const auto bb = b.bits();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        inter += ab[i] & bb[i];
        uni += ab[i] | bb[i];
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask boundary_map(const BinaryMask& mask) {
    BinaryMask out(mask.height(), mask.width());
    constexpr int dr[4] = {-1, 1, 0, 0};
    constexpr int dc[4] = {0, 0, -1, 1};
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (!mask.at(r, c)) continue;
            for (int k = 0; k < 4; ++k) {
                const int rr = r + dr[k];
                const int cc = c + dc[k];
                if (!mask.in_bounds(rr, cc) || !mask.at(rr, cc)) {
                    out.set(r, c);
                    break;
                }
            }
        }
    }
    return out;
}

BinaryMask dilate_disc(const BinaryMask& mask, int radius) {
    if (radius <= 0) return mask;
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dy, dx);
        }
    }
    BinaryMask out(mask.height(), mask.width());
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (!mask.at(r, c)) continue;
            for (auto [dy, dx] : offsets) {
                if (out.in_bounds(r + dy, c + dx)) out.set(r + dy, c + dx);
            }
        }
    }
    return out;
}

double boundary_f(const BinaryMask& pred, const BinaryMask& gt, int tol) {
    require_same_extent(pred, gt, "boundary_f");
    if (tol < 0) throw Error(ErrorCode::InvalidSpec, "boundary tolerance must be >= 0");
    const BinaryMask pb = boundary_map(pred);
    const BinaryMask gb = boundary_map(gt);
    const std::size_t np = area(pb);
    const std::size_t ng = area(gb);
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;

    const BinaryMask gd = dilate_disc(gb, tol);
    const BinaryMask pd = dilate_disc(pb, tol);
    std::size_t pred_hits = 0;
    std::size_t gt_hits = 0;
    const auto pbb = pb.bits(), gbb = gb.bits(), gdb = gd.bits(), pdb = pd.bits();
    for (std::size_t i = 0; i < pbb.size(); ++i) {
        pred_hits += pbb[i] & gdb[i];
        gt_hits += gbb[i] & pdb[i];
    }
    const double precision = static_cast<double>(pred_hits) / static_cast<double>(np);
    const double recall = static_cast<double>(gt_hits) / static_cast<double>(ng);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

int default_boundary_tolerance(int height, int width) {
    const double diag = std::hypot(static_cast<double>(height), static_cast<double>(width));
    return std::max(1, static_cast<int>(std::lround(0.008 * diag)));
}

BinaryMask mask_union(std::span<const BinaryMask> masks, std::optional<Extent> hint) {
    if (masks.empty()) {
        if (!hint) throw Error(ErrorCode::DimensionMismatch, "union of no masks needs a dimension hint");
        return BinaryMask(hint->height, hint->width);
    }
    if (hint && *hint != masks.front().extent()) {
        throw Error(ErrorCode::DimensionMismatch, "union: hint does not match mask dimensions");
    }
    std::vector<std::uint8_t> bits(masks.front().bits().begin(), masks.front().bits().end());
    for (std::size_t k = 1; k < masks.size(); ++k) {
        require_same_extent(masks.front(), masks[k], "union");
        const auto src = masks[k].bits();
        for (std::size_t i = 0; i < bits.size(); ++i) bits[i] |= src[i];
    }
    return BinaryMask(masks.front().height(), masks.front().width(), std::move(bits));
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
    const BinaryMask pair[2] = {a, b};
    return mask_union(std::span<const BinaryMask>(pair));
}

BinaryMask translate(const BinaryMask& mask, int dx, int dy) {
    BinaryMask out(mask.height(), mask.width());
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (mask.at(r, c) && out.in_bounds(r + dy, c + dx)) out.set(r + dy, c + dx);
        }
    }
    return out;
}

std::optional<Centroid> centroid(const BinaryMask& mask) {
    double sx = 0, sy = 0;
    std::size_t n = 0;
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (!mask.at(r, c)) continue;
            sx += c;
            sy += r;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return Centroid{sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

} // namespace rvos
