#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "blockscramble/core.hpp"

namespace blockscramble {

// LE: one sub-network shared by every block, no pseudo-permutation matrix.
// ELE: an independent sub-network per block position followed by U.
enum class AdaptMode { LE, ELE };

std::string_view adapt_mode_name(AdaptMode mode) noexcept;

// Read-only view of one block-wise sub-network: a B x B kernel with stride B
// mapping a B*B*C_in block to `depth` outputs.
struct SubnetParams {
    std::size_t block_size = 0;
    std::size_t in_channels = 0;
    std::size_t depth = 0;
    std::span<const double> kernel; // [depth][B*B*C_in]
    std::span<const double> bias;   // [depth]

    std::size_t block_length() const noexcept { return block_size * block_size * in_channels; }
};

struct AdaptNetParams {
    AdaptMode mode = AdaptMode::ELE;
    std::size_t block_size = 4;
    std::size_t in_channels = 6;
    std::size_t feature_channels = 3; // C_f
    std::size_t rows = 8;
    std::size_t cols = 8;
    std::vector<double> kernel; // [sets][depth][B*B*C_in]
    std::vector<double> bias;   // [sets][depth]
    PseudoPermMatrix u;         // n == blocks() in ELE mode, empty in LE mode

    AdaptNetParams() = default;
    // Zero-initialized parameters of the right shapes (U = identity in ELE mode).
    AdaptNetParams(AdaptMode mode, std::size_t block_size, std::size_t in_channels,
                   std::size_t feature_channels, std::size_t rows, std::size_t cols);

    std::size_t blocks() const noexcept { return rows * cols; }
    std::size_t sets() const noexcept { return mode == AdaptMode::ELE ? blocks() : 1; }
    std::size_t depth() const noexcept { return feature_channels * block_size * block_size; }
    std::size_t block_length() const noexcept { return block_size * block_size * in_channels; }
    SubnetParams subnet(std::size_t block_index) const;
    void validate() const;
};

// Real-valued network input. With `nibbles` the 8-bit channels are split into
// upper/lower 4-bit channels (6 total) mapped to v/15 - 0.5; otherwise each
// channel is v/255 - 0.5. Both maps turn negative-positive reversal into a sign flip.
FeatureMap encode_input(const Image8& img, bool nibbles);

// Row-major block gather of a real map: out[b][(i*B + j)*C + c].
std::vector<double> gather_blocks(const FeatureMap& fm, std::size_t block_size);

std::vector<double> subnet_forward(std::span<const double> block, const SubnetParams& params);

// Places feature b at block-grid position b (row-major): rows x cols x D.
FeatureMap integrate(const std::vector<std::vector<double>>& features, std::size_t rows,
                     std::size_t cols);

// Treats the map as an N x D matrix F (N = height*width) and returns U*F.
FeatureMap apply_perm_matrix(const PseudoPermMatrix& u, const FeatureMap& fm);

// out[h*r+dh, w*r+dw, c] = in[h, w, c*r*r + dh*r + dw]
FeatureMap pixel_shuffle(const FeatureMap& fm, std::size_t r);
FeatureMap pixel_unshuffle(const FeatureMap& fm, std::size_t r);

// segment -> sub-networks -> integrate -> U (ELE only) -> pixel shuffle (r = B).
FeatureMap adaptnet_forward(const Image8& scrambled, const AdaptNetParams& params);

} // namespace blockscramble
