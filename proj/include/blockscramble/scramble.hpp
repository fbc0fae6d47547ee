#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "blockscramble/core.hpp"

namespace blockscramble {

// ---------------------------------------------------------------------------
// Per-block operations
// ---------------------------------------------------------------------------

// Pixel shuffle plus negative-positive mask over the B*B*6 four-bit positions
// of a bit-split block. Position i of the output takes input position
// pixel_perm[i], reversed (v -> 15 - v) when np_mask[i] is set.
struct LeBlockOps {
    std::vector<std::size_t> pixel_perm;
    std::vector<std::uint8_t> np_mask;
};

// rot_flip: low two bits = quarter turns counter-clockwise, bit 2 = horizontal
// flip after rotation. np_flag reverses every 8-bit value. Output channel c
// takes input channel color_perm[c].
struct EtcBlockOps {
    std::uint8_t rot_flip = 0;
    std::uint8_t np_flag = 0;
    std::array<std::uint8_t, 3> color_perm{0, 1, 2};
};

// B x B x 3 (8-bit) -> B x B x 6 (4-bit). Channel 2c = upper nibble of c,
// channel 2c+1 = lower nibble.
std::vector<std::uint8_t> bit_split(std::span<const std::uint8_t> block, std::size_t channels);
// Inverse of bit_split. Throws RangeError if any entry exceeds 15.
std::vector<std::uint8_t> bit_merge(std::span<const std::uint8_t> nibbles, std::size_t channels);

constexpr std::uint8_t np_transform4(std::uint8_t v, bool flag) noexcept {
    return flag ? static_cast<std::uint8_t>(15 - v) : v;
}
constexpr std::uint8_t np_transform8(std::uint8_t v, bool flag) noexcept {
    return flag ? static_cast<std::uint8_t>(255 - v) : v;
}

void apply_le_ops(std::span<const std::uint8_t> nibbles, const LeBlockOps& ops,
                  std::span<std::uint8_t> out);
void invert_le_ops(std::span<const std::uint8_t> scrambled, const LeBlockOps& ops,
                   std::span<std::uint8_t> out);

// Operates on one B x B x 3 block in place of `out`.
void apply_etc_ops(std::span<const std::uint8_t> block, std::size_t block_size,
                   const EtcBlockOps& ops, std::span<std::uint8_t> out);
void invert_etc_ops(std::span<const std::uint8_t> block, std::size_t block_size,
                    const EtcBlockOps& ops, std::span<std::uint8_t> out);

// ---------------------------------------------------------------------------
// Key material
// ---------------------------------------------------------------------------

// Everything a key decides for one image geometry, materialized once so that
// repeated scrambling (datasets, per-epoch augmentation) does not re-derive it.
struct ScramblePlan {
    SchemeId scheme = SchemeId::ELE;
    std::size_t block_size = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<LeBlockOps> le_ops;   // 1 entry (LE) or N entries (ELE)
    std::vector<EtcBlockOps> etc_ops; // N entries (ETC)
    std::vector<std::size_t> block_perm; // empty for LE; output block i <- input block perm[i]

    std::size_t block_count() const noexcept { return rows * cols; }
};

ScramblePlan make_plan(const ScrambleKey& key, std::size_t height, std::size_t width);

LeBlockOps le_ops_from_key(const ScrambleKey& key);
LeBlockOps ele_ops_from_key(const ScrambleKey& key, std::size_t block_index);
EtcBlockOps etc_ops_from_key(const ScrambleKey& key, std::size_t block_index);
std::vector<std::size_t> block_permutation_from_key(const ScrambleKey& key, std::size_t n);

// ---------------------------------------------------------------------------
// Whole-image transforms
// ---------------------------------------------------------------------------

Image8 scramble(const Image8& img, const ScramblePlan& plan);
Image8 unscramble(const Image8& img, const ScramblePlan& plan);

// Dispatch on key.scheme.
Image8 scramble(const Image8& img, const ScrambleKey& key);
Image8 unscramble(const Image8& img, const ScrambleKey& key);

// Scheme-checked entry points; a key for another scheme is a KeyMisuseError.
Image8 le_scramble(const Image8& img, const ScrambleKey& key);
Image8 le_unscramble(const Image8& img, const ScrambleKey& key);
Image8 etc_scramble(const Image8& img, const ScrambleKey& key);
Image8 etc_unscramble(const Image8& img, const ScrambleKey& key);
Image8 ele_scramble(const Image8& img, const ScrambleKey& key);
Image8 ele_unscramble(const Image8& img, const ScrambleKey& key);

// ---------------------------------------------------------------------------
// Key space
// ---------------------------------------------------------------------------

using BigInt = boost::multiprecision::cpp_int;

struct KeySpace {
    BigInt exact;
    double log2_bits = 0.0;
};

// Which EtC factors to count; all on gives 8^N * 2^N * 6^N * N!.
struct EtcComponents {
    bool rotation_flip = true;
    bool negative_positive = true;
    bool color_shuffle = true;
    bool block_shuffle = true;
};

KeySpace key_space(SchemeId scheme, std::size_t block_size, std::size_t blocks,
                   EtcComponents etc = {});

BigInt factorial(std::size_t n);
// log2 of a positive big integer, accurate to ~1e-15 relative.
double log2_big(const BigInt& value);

} // namespace blockscramble
