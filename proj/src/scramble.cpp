#include "blockscramble/scramble.hpp"

#include <cmath>
#include <string>

#include "blockscramble/keying.hpp"

namespace blockscramble {

namespace {

// Stream labels. Changing any of these changes every scrambled output.
constexpr std::string_view kLabelLePixels = "le/pixel-perm";
constexpr std::string_view kLabelLeMask = "le/np-mask";
constexpr std::string_view kLabelElePixels = "ele/pixel-perm";
constexpr std::string_view kLabelEleMask = "ele/np-mask";
constexpr std::string_view kLabelEtcBlock = "etc/block-ops";
constexpr std::string_view kLabelBlockPerm = "block-perm";

void require_scheme(const ScrambleKey& key, SchemeId expected) {
    if (key.scheme != expected)
        throw KeyMisuseError("key is for scheme " + std::string(scheme_name(key.scheme)) +
                             ", operation needs " + std::string(scheme_name(expected)));
}

void check_color(const Image8& img) {
    if (img.channels() != 3)
        throw DimensionError("block scrambling needs a 3-channel image, got " +
                             std::to_string(img.channels()) + " channel(s)");
}

void check_plan_geometry(const Image8& img, const ScramblePlan& plan) {
    check_color(img);
    if (img.height() != plan.rows * plan.block_size || img.width() != plan.cols * plan.block_size)
        throw DimensionError("image is " + std::to_string(img.height()) + "x" +
                             std::to_string(img.width()) + " but the plan was built for " +
                             std::to_string(plan.rows * plan.block_size) + "x" +
                             std::to_string(plan.cols * plan.block_size));
}

LeBlockOps le_ops_from_streams(const ScrambleKey& key, std::string_view perm_label,
                               std::string_view mask_label, std::size_t index) {
    const std::size_t positions = key.block_size * key.block_size * 6;
    SubkeyStream perm_stream = derive(key, perm_label, index);
    SubkeyStream mask_stream = derive(key, mask_label, index);
    LeBlockOps ops;
    ops.pixel_perm = random_permutation(perm_stream, positions);
    ops.np_mask = random_bits(mask_stream, positions);
    return ops;
}

// Source coordinate (row, col) for destination (i, j) after rotating `turns`
// quarter turns counter-clockwise and then optionally flipping horizontally.
std::pair<std::size_t, std::size_t> etc_source(std::size_t i, std::size_t j, std::size_t B,
                                               unsigned rot_flip) {
    if (rot_flip & 4u) j = B - 1 - j;
    for (unsigned t = 0; t < (rot_flip & 3u); ++t) {
        // One CCW turn maps source (r, c) to destination (B-1-c, r).
        const std::size_t r = j;
        const std::size_t c = B - 1 - i;
        i = r;
        j = c;
    }
    return {i, j};
}

void permute_blocks(BlockGrid& grid, const std::vector<std::size_t>& perm, bool inverse) {
    std::vector<Block> out(grid.blocks.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (inverse)
            out[perm[i]] = std::move(grid.blocks[i]);
        else
            out[i] = std::move(grid.blocks[perm[i]]);
    }
    grid.blocks = std::move(out);
}

} // namespace

std::vector<std::uint8_t> bit_split(std::span<const std::uint8_t> block, std::size_t channels) {
    if (channels != 3 || block.size() % 3 != 0)
        throw DimensionError("bit_split: expected a 3-channel block, got " +
                             std::to_string(channels) + " channel(s)");
    std::vector<std::uint8_t> out(block.size() * 2);
    for (std::size_t k = 0; k < block.size(); ++k) {
        out[2 * k] = static_cast<std::uint8_t>(block[k] >> 4);
        out[2 * k + 1] = static_cast<std::uint8_t>(block[k] & 0x0F);
    }
    return out;
}

std::vector<std::uint8_t> bit_merge(std::span<const std::uint8_t> nibbles, std::size_t channels) {
    if (channels != 6 || nibbles.size() % 6 != 0)
        throw DimensionError("bit_merge: expected a 6-channel block, got " +
                             std::to_string(channels) + " channel(s)");
    std::vector<std::uint8_t> out(nibbles.size() / 2);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const std::uint8_t hi = nibbles[2 * k];
        const std::uint8_t lo = nibbles[2 * k + 1];
        if (hi > 15 || lo > 15)
            throw RangeError("bit_merge: entry " + std::to_string(hi > 15 ? hi : lo) +
                             " exceeds 4 bits");
        out[k] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

void apply_le_ops(std::span<const std::uint8_t> nibbles, const LeBlockOps& ops,
                  std::span<std::uint8_t> out) {
    if (nibbles.size() != ops.pixel_perm.size() || out.size() != nibbles.size() ||
        ops.np_mask.size() != nibbles.size())
        throw DimensionError("apply_le_ops: block has " + std::to_string(nibbles.size()) +
                             " positions, ops cover " + std::to_string(ops.pixel_perm.size()));
    for (std::size_t i = 0; i < nibbles.size(); ++i)
        out[i] = np_transform4(nibbles[ops.pixel_perm[i]], ops.np_mask[i] != 0);
}

void invert_le_ops(std::span<const std::uint8_t> scrambled, const LeBlockOps& ops,
                   std::span<std::uint8_t> out) {
    if (scrambled.size() != ops.pixel_perm.size() || out.size() != scrambled.size() ||
        ops.np_mask.size() != scrambled.size())
        throw DimensionError("invert_le_ops: block has " + std::to_string(scrambled.size()) +
                             " positions, ops cover " + std::to_string(ops.pixel_perm.size()));
    for (std::size_t i = 0; i < scrambled.size(); ++i)
        out[ops.pixel_perm[i]] = np_transform4(scrambled[i], ops.np_mask[i] != 0);
}

void apply_etc_ops(std::span<const std::uint8_t> block, std::size_t B, const EtcBlockOps& ops,
                   std::span<std::uint8_t> out) {
    if (block.size() != B * B * 3 || out.size() != block.size())
        throw DimensionError("apply_etc_ops: expected a " + std::to_string(B) + "x" +
                             std::to_string(B) + "x3 block");
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            const auto [si, sj] = etc_source(i, j, B, ops.rot_flip);
            const std::uint8_t* src = &block[(si * B + sj) * 3];
            std::uint8_t* dst = &out[(i * B + j) * 3];
            for (std::size_t c = 0; c < 3; ++c)
                dst[c] = np_transform8(src[ops.color_perm[c]], ops.np_flag != 0);
        }
    }
}

void invert_etc_ops(std::span<const std::uint8_t> block, std::size_t B, const EtcBlockOps& ops,
                    std::span<std::uint8_t> out) {
    if (block.size() != B * B * 3 || out.size() != block.size())
        throw DimensionError("invert_etc_ops: expected a " + std::to_string(B) + "x" +
                             std::to_string(B) + "x3 block");
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            const auto [si, sj] = etc_source(i, j, B, ops.rot_flip);
            const std::uint8_t* src = &block[(i * B + j) * 3];
            std::uint8_t* dst = &out[(si * B + sj) * 3];
            for (std::size_t c = 0; c < 3; ++c)
                dst[ops.color_perm[c]] = np_transform8(src[c], ops.np_flag != 0);
        }
    }
}

LeBlockOps le_ops_from_key(const ScrambleKey& key) {
    return le_ops_from_streams(key, kLabelLePixels, kLabelLeMask, 0);
}

LeBlockOps ele_ops_from_key(const ScrambleKey& key, std::size_t block_index) {
    return le_ops_from_streams(key, kLabelElePixels, kLabelEleMask, block_index);
}

EtcBlockOps etc_ops_from_key(const ScrambleKey& key, std::size_t block_index) {
    SubkeyStream stream = derive(key, kLabelEtcBlock, block_index);
    EtcBlockOps ops;
    ops.rot_flip = static_cast<std::uint8_t>(stream.uniform(8));
    ops.np_flag = random_bits(stream, 1)[0];
    const auto perm = random_permutation(stream, 3);
    for (std::size_t c = 0; c < 3; ++c) ops.color_perm[c] = static_cast<std::uint8_t>(perm[c]);
    return ops;
}

std::vector<std::size_t> block_permutation_from_key(const ScrambleKey& key, std::size_t n) {
    SubkeyStream stream = derive(key, kLabelBlockPerm, 0);
    return random_permutation(stream, n);
}

ScramblePlan make_plan(const ScrambleKey& key, std::size_t height, std::size_t width) {
    const std::size_t B = key.block_size;
    if (B == 0) throw DimensionError("block size must be positive");
    if (height % B != 0)
        throw DimensionError("height " + std::to_string(height) +
                             " is not divisible by block size " + std::to_string(B));
    if (width % B != 0)
        throw DimensionError("width " + std::to_string(width) +
                             " is not divisible by block size " + std::to_string(B));

    ScramblePlan plan;
    plan.scheme = key.scheme;
    plan.block_size = B;
    plan.rows = height / B;
    plan.cols = width / B;
    const std::size_t n = plan.block_count();
    switch (key.scheme) {
    case SchemeId::LE:
        plan.le_ops.push_back(le_ops_from_key(key));
        break;
    case SchemeId::ELE:
        plan.le_ops.reserve(n);
        for (std::size_t b = 0; b < n; ++b) plan.le_ops.push_back(ele_ops_from_key(key, b));
        plan.block_perm = block_permutation_from_key(key, n);
        break;
    case SchemeId::ETC:
        plan.etc_ops.reserve(n);
        for (std::size_t b = 0; b < n; ++b) plan.etc_ops.push_back(etc_ops_from_key(key, b));
        plan.block_perm = block_permutation_from_key(key, n);
        break;
    }
    return plan;
}

Image8 scramble(const Image8& img, const ScramblePlan& plan) {
    check_plan_geometry(img, plan);
    BlockGrid grid = segment(img, plan.block_size);
    const std::size_t B = plan.block_size;
    for (std::size_t b = 0; b < grid.count(); ++b) {
        Block& block = grid.blocks[b];
        if (plan.scheme == SchemeId::ETC) {
            Block out(block.size());
            apply_etc_ops(block, B, plan.etc_ops[b], out);
            block = std::move(out);
        } else {
            const LeBlockOps& ops = plan.le_ops.size() == 1 ? plan.le_ops[0] : plan.le_ops[b];
            const auto nibbles = bit_split(block, 3);
            std::vector<std::uint8_t> shuffled(nibbles.size());
            apply_le_ops(nibbles, ops, shuffled);
            block = bit_merge(shuffled, 6);
        }
    }
    if (!plan.block_perm.empty()) permute_blocks(grid, plan.block_perm, false);
    return assemble(grid);
}

Image8 unscramble(const Image8& img, const ScramblePlan& plan) {
    check_plan_geometry(img, plan);
    BlockGrid grid = segment(img, plan.block_size);
    if (!plan.block_perm.empty()) permute_blocks(grid, plan.block_perm, true);
    const std::size_t B = plan.block_size;
    for (std::size_t b = 0; b < grid.count(); ++b) {
        Block& block = grid.blocks[b];
        if (plan.scheme == SchemeId::ETC) {
            Block out(block.size());
            invert_etc_ops(block, B, plan.etc_ops[b], out);
            block = std::move(out);
        } else {
            const LeBlockOps& ops = plan.le_ops.size() == 1 ? plan.le_ops[0] : plan.le_ops[b];
            const auto nibbles = bit_split(block, 3);
            std::vector<std::uint8_t> plain(nibbles.size());
            invert_le_ops(nibbles, ops, plain);
            block = bit_merge(plain, 6);
        }
    }
    return assemble(grid);
}

Image8 scramble(const Image8& img, const ScrambleKey& key) {
    check_color(img);
    return scramble(img, make_plan(key, img.height(), img.width()));
}

Image8 unscramble(const Image8& img, const ScrambleKey& key) {
    check_color(img);
    return unscramble(img, make_plan(key, img.height(), img.width()));
}

Image8 le_scramble(const Image8& img, const ScrambleKey& key) {
    require_scheme(key, SchemeId::LE);
    return scramble(img, key);
}
Image8 le_unscramble(const Image8& img, const ScrambleKey& key) {
    require_scheme(key, SchemeId::LE);
    return unscramble(img, key);
}
Image8 etc_scramble(const Image8& img, const ScrambleKey& key) {
    require_scheme(key, SchemeId::ETC);
    return scramble(img, key);
}
Image8 etc_unscramble(const Image8& img, const ScrambleKey& key) {
    require_scheme(key, SchemeId::ETC);
    return unscramble(img, key);
}
Image8 ele_scramble(const Image8& img, const ScrambleKey& key) {
    require_scheme(key, SchemeId::ELE);
    return scramble(img, key);
}
Image8 ele_unscramble(const Image8& img, const ScrambleKey& key) {
    require_scheme(key, SchemeId::ELE);
    return unscramble(img, key);
}

BigInt factorial(std::size_t n) {
    BigInt result = 1;
    for (std::size_t k = 2; k <= n; ++k) result *= k;
    return result;
}

double log2_big(const BigInt& value) {
    if (value <= 0) throw DomainError("log2_big: value must be positive");
    const std::size_t msb = boost::multiprecision::msb(value);
    if (msb < 63) return std::log2(value.convert_to<double>());
    const std::size_t shift = msb - 63;
    const auto top = static_cast<std::uint64_t>(value >> shift);
    return std::log2(static_cast<double>(top)) + static_cast<double>(shift);
}

KeySpace key_space(SchemeId scheme, std::size_t block_size, std::size_t blocks,
                   EtcComponents etc) {
    if (block_size == 0 || blocks == 0)
        throw DomainError("key_space: block size and block count must be positive");
    const std::size_t positions = block_size * block_size * 6;
    const BigInt per_block = factorial(positions) * boost::multiprecision::pow(BigInt(2),
                                                                              static_cast<unsigned>(positions));
    KeySpace ks;
    switch (scheme) {
    case SchemeId::LE:
        ks.exact = per_block;
        break;
    case SchemeId::ETC: {
        unsigned per = 1;
        if (etc.rotation_flip) per *= 8;
        if (etc.negative_positive) per *= 2;
        if (etc.color_shuffle) per *= 6;
        ks.exact = boost::multiprecision::pow(BigInt(per), static_cast<unsigned>(blocks));
        if (etc.block_shuffle) ks.exact *= factorial(blocks);
        break;
    }
    case SchemeId::ELE:
        ks.exact = boost::multiprecision::pow(per_block, static_cast<unsigned>(blocks)) *
                   factorial(blocks);
        break;
    }
    ks.log2_bits = log2_big(ks.exact);
    return ks;
}

} // namespace blockscramble
