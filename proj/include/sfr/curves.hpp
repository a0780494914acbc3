// Space-filling-curve codecs: bijections between quantized 3D grid cells and
// 1D integer codes. Two curves are provided — Hilbert (locality preserving,
// consecutive codes are face-adjacent cells) and Morton/Z-order (plain bit
// interleave, cheaper but weaker locality).
//
// The Hilbert transform is the iterative algorithm from "Programming the
// Hilbert curve" (J. Skilling, 2004): Gray-code the transposed index and undo
// the per-level axis exchanges in place.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sfr/core.hpp"

namespace sfr {

enum class CurveKind { Hilbert, Morton };

inline const char* to_string(CurveKind k) {
    return k == CurveKind::Hilbert ? "hilbert" : "morton";
}

using CurveCode = std::uint64_t;

struct GridCoord {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::uint32_t z = 0;

    bool operator==(const GridCoord&) const = default;
};

// Quantization parameters shared by every index built over one cloud: cell
// size g, per-axis bit depth, and the origin subtracted before flooring
// (conventionally the cloud's axis-aligned minimum corner, so negative
// coordinates stay valid). 3*bits must fit a 64-bit code.
struct CurveParams {
    double grid_size = 0.01;
    int bits = 21;
    Vec3 origin{0, 0, 0};

    std::uint32_t cells_per_axis() const {
        return bits >= 32 ? 0xffffffffu : (std::uint32_t(1) << bits);
    }
};

// Sets the origin to the cloud minimum so every point quantizes into the
// non-negative cube.
inline CurveParams fit_params(const std::vector<Vec3>& points,
                              double grid_size = 0.01, int bits = 21) {
    CurveParams p;
    p.grid_size = grid_size;
    p.bits = bits;
    if (!points.empty()) p.origin = Aabb::of_points(points).lo;
    return p;
}

namespace detail {

// Spreads the low 21 bits of v so bit i lands at bit 3i.
inline std::uint64_t spread3(std::uint64_t v) {
    v &= 0x1fffff;
    v = (v | v << 32) & 0x1f00000000ffff;
    v = (v | v << 16) & 0x1f0000ff0000ff;
    v = (v | v << 8) & 0x100f00f00f00f00f;
    v = (v | v << 4) & 0x10c30c30c30c30c3;
    v = (v | v << 2) & 0x1249249249249249;
    return v;
}

inline std::uint64_t compact3(std::uint64_t v) {
    v &= 0x1249249249249249;
    v = (v | v >> 2) & 0x10c30c30c30c30c3;
    v = (v | v >> 4) & 0x100f00f00f00f00f;
    v = (v | v >> 8) & 0x1f0000ff0000ff;
    v = (v | v >> 16) & 0x1f00000000ffff;
    v = (v | v >> 32) & 0x1fffff;
    return v;
}

inline void check_bits(int bits) {
    if (bits < 1 || 3 * bits > 63)
        throw OutOfRangeError("bit depth must satisfy 1 <= bits and 3*bits <= 63, got " +
                              std::to_string(bits));
}

inline void check_coord(GridCoord c, int bits) {
    const std::uint64_t limit = std::uint64_t(1) << bits;
    if (c.x >= limit || c.y >= limit || c.z >= limit)
        throw OutOfRangeError("grid coordinate exceeds the " + std::to_string(bits) +
                              "-bit cube");
}

}  // namespace detail

// Floor quantization of Eq.-style gamma: componentwise floor((p - origin)/g).
// Throws OutOfRange when the point falls outside the bit-depth cube.
inline GridCoord quantize(const Vec3& p, const CurveParams& params) {
    detail::check_bits(params.bits);
    if (!p.finite()) throw OutOfRangeError("cannot quantize a non-finite point");
    const double limit = double(std::uint64_t(1) << params.bits);
    std::uint32_t cell[3];
    for (int i = 0; i < 3; ++i) {
        const double t = std::floor((p[i] - params.origin[i]) / params.grid_size);
        if (t < 0.0 || t >= limit)
            throw OutOfRangeError("point coordinate " + std::to_string(p[i]) +
                                  " (axis " + std::to_string(i) +
                                  ") quantizes outside the grid cube");
        cell[i] = std::uint32_t(t);
    }
    return {cell[0], cell[1], cell[2]};
}

// Same floor quantization but clamps into the cube instead of throwing. Used
// for query points, which may legitimately fall outside the indexed bounds.
inline GridCoord quantize_clamped(const Vec3& p, const CurveParams& params) {
    detail::check_bits(params.bits);
    const double limit = double(std::uint64_t(1) << params.bits) - 1.0;
    std::uint32_t cell[3];
    for (int i = 0; i < 3; ++i) {
        double t = std::floor((p[i] - params.origin[i]) / params.grid_size);
        if (!(t >= 0.0)) t = 0.0;
        if (t > limit) t = limit;
        cell[i] = std::uint32_t(t);
    }
    return {cell[0], cell[1], cell[2]};
}

// Morton/Z-order: bit i of x lands at output bit 3i, y at 3i+1, z at 3i+2.
inline CurveCode morton_encode(GridCoord c, int bits) {
    detail::check_bits(bits);
    detail::check_coord(c, bits);
    return detail::spread3(c.x) | (detail::spread3(c.y) << 1) |
           (detail::spread3(c.z) << 2);
}

inline GridCoord morton_decode(CurveCode code, int bits) {
    detail::check_bits(bits);
    if (code >> (3 * bits))
        throw OutOfRangeError("curve code exceeds 2^(3*bits)");
    return {std::uint32_t(detail::compact3(code)),
            std::uint32_t(detail::compact3(code >> 1)),
            std::uint32_t(detail::compact3(code >> 2))};
}

// Hilbert encode via the Skilling transform. Index 0 is the origin cell and
// consecutive indices decode to face-adjacent cells at every bit depth.
inline CurveCode hilbert_encode(GridCoord c, int bits) {
    detail::check_bits(bits);
    detail::check_coord(c, bits);
    std::uint64_t X[3] = {c.x, c.y, c.z};

    if (bits > 1) {
        // Inverse undo: unwind the per-level reflections/exchanges.
        const std::uint64_t M = std::uint64_t(1) << (bits - 1);
        for (std::uint64_t Q = M; Q > 1; Q >>= 1) {
            const std::uint64_t P = Q - 1;
            for (int i = 0; i < 3; ++i) {
                if (X[i] & Q) {
                    X[0] ^= P;
                } else {
                    const std::uint64_t t = (X[0] ^ X[i]) & P;
                    X[0] ^= t;
                    X[i] ^= t;
                }
            }
        }
        // Gray encode.
        X[1] ^= X[0];
        X[2] ^= X[1];
        std::uint64_t t = 0;
        for (std::uint64_t Q = M; Q > 1; Q >>= 1)
            if (X[2] & Q) t ^= Q - 1;
        X[0] ^= t;
        X[1] ^= t;
        X[2] ^= t;
    } else {
        // bits == 1 reduces to the plain Gray code of (x, y, z).
        X[1] ^= X[0];
        X[2] ^= X[1];
    }

    // Interleave the transposed index: bit l of X[0] is index bit 3l+2.
    return (detail::spread3(X[0]) << 2) | (detail::spread3(X[1]) << 1) |
           detail::spread3(X[2]);
}

inline GridCoord hilbert_decode(CurveCode code, int bits) {
    detail::check_bits(bits);
    if (code >> (3 * bits))
        throw OutOfRangeError("curve code exceeds 2^(3*bits)");
    std::uint64_t X[3] = {detail::compact3(code >> 2), detail::compact3(code >> 1),
                          detail::compact3(code)};

    // Gray decode.
    const std::uint64_t N = std::uint64_t(2) << (bits - 1);
    std::uint64_t t = X[2] >> 1;
    X[2] ^= X[1];
    X[1] ^= X[0];
    X[0] ^= t;

    // Undo excess work.
    for (std::uint64_t Q = 2; Q != N; Q <<= 1) {
        const std::uint64_t P = Q - 1;
        for (int i = 2; i >= 0; --i) {
            if (X[i] & Q) {
                X[0] ^= P;
            } else {
                t = (X[0] ^ X[i]) & P;
                X[0] ^= t;
                X[i] ^= t;
            }
        }
    }
    return {std::uint32_t(X[0]), std::uint32_t(X[1]), std::uint32_t(X[2])};
}

inline CurveCode encode_cell(GridCoord c, int bits, CurveKind kind) {
    return kind == CurveKind::Hilbert ? hilbert_encode(c, bits)
                                      : morton_encode(c, bits);
}

inline GridCoord decode_cell(CurveCode code, int bits, CurveKind kind) {
    return kind == CurveKind::Hilbert ? hilbert_decode(code, bits)
                                      : morton_decode(code, bits);
}

// Per-point curve codes. Points sharing a cell produce equal codes; identities
// are kept apart by the caller (see SerializedIndex). Reports the offending
// point index when quantization fails.
inline std::vector<CurveCode> serialize_points(std::span<const Vec3> points,
                                               const CurveParams& params,
                                               CurveKind kind) {
    std::vector<CurveCode> codes(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        try {
            codes[i] = encode_cell(quantize(points[i], params), params.bits, kind);
        } catch (const OutOfRangeError& e) {
            throw OutOfRangeError("point " + std::to_string(i) + ": " + e.what());
        }
    }
    return codes;
}

}  // namespace sfr
