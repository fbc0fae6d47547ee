#include "blockscramble/adaptnet.hpp"

#include <cmath>
#include <string>

#include "blockscramble/kernels.hpp"

namespace blockscramble {

std::string_view adapt_mode_name(AdaptMode mode) noexcept {
    return mode == AdaptMode::LE ? "LE" : "ELE";
}

AdaptNetParams::AdaptNetParams(AdaptMode mode_, std::size_t block_size_, std::size_t in_channels_,
                               std::size_t feature_channels_, std::size_t rows_, std::size_t cols_)
    : mode(mode_), block_size(block_size_), in_channels(in_channels_),
      feature_channels(feature_channels_), rows(rows_), cols(cols_) {
    if (block_size == 0 || in_channels == 0 || feature_channels == 0 || rows == 0 || cols == 0)
        throw DimensionError("AdaptNetParams: all dimensions must be positive");
    kernel.assign(sets() * depth() * block_length(), 0.0);
    bias.assign(sets() * depth(), 0.0);
    if (mode == AdaptMode::ELE) u = PseudoPermMatrix::identity(blocks());
}

SubnetParams AdaptNetParams::subnet(std::size_t block_index) const {
    if (block_index >= blocks())
        throw RangeError("subnet: block index " + std::to_string(block_index) + " out of range");
    const std::size_t s = sets() == 1 ? 0 : block_index;
    const std::size_t kl = depth() * block_length();
    return SubnetParams{block_size, in_channels, depth(),
                        std::span<const double>(kernel).subspan(s * kl, kl),
                        std::span<const double>(bias).subspan(s * depth(), depth())};
}

void AdaptNetParams::validate() const {
    if (kernel.size() != sets() * depth() * block_length())
        throw DimensionError("AdaptNetParams: kernel has " + std::to_string(kernel.size()) +
                             " values, expected " +
                             std::to_string(sets() * depth() * block_length()));
    if (bias.size() != sets() * depth())
        throw DimensionError("AdaptNetParams: bias has wrong length");
    if (mode == AdaptMode::ELE && (u.n != blocks() || u.entries.size() != u.n * u.n))
        throw DimensionError("AdaptNetParams: U must be " + std::to_string(blocks()) + "x" +
                             std::to_string(blocks()));
    if (mode == AdaptMode::LE && u.n != 0)
        throw DimensionError("AdaptNetParams: LE mode takes no pseudo-permutation matrix");
}

FeatureMap encode_input(const Image8& img, bool nibbles) {
    const auto px = img.data();
    if (!nibbles) {
        FeatureMap fm(img.height(), img.width(), img.channels());
        for (std::size_t i = 0; i < px.size(); ++i) fm.data[i] = px[i] / 255.0 - 0.5;
        return fm;
    }
    FeatureMap fm(img.height(), img.width(), img.channels() * 2);
    for (std::size_t i = 0; i < px.size(); ++i) {
        fm.data[2 * i] = (px[i] >> 4) / 15.0 - 0.5;
        fm.data[2 * i + 1] = (px[i] & 0x0F) / 15.0 - 0.5;
    }
    return fm;
}

std::vector<double> gather_blocks(const FeatureMap& fm, std::size_t B) {
    if (B == 0 || fm.height % B != 0 || fm.width % B != 0)
        throw DimensionError("gather_blocks: " + std::to_string(fm.height) + "x" +
                             std::to_string(fm.width) + " map is not divisible by block size " +
                             std::to_string(B));
    const std::size_t rows = fm.height / B;
    const std::size_t cols = fm.width / B;
    const std::size_t row_len = B * fm.channels;
    std::vector<double> out(fm.data.size());
    for (std::size_t br = 0; br < rows; ++br)
        for (std::size_t bc = 0; bc < cols; ++bc) {
            double* dst = &out[(br * cols + bc) * B * row_len];
            for (std::size_t i = 0; i < B; ++i) {
                const double* src = &fm.data[((br * B + i) * fm.width + bc * B) * fm.channels];
                std::copy(src, src + row_len, dst + i * row_len);
            }
        }
    return out;
}

std::vector<double> subnet_forward(std::span<const double> block, const SubnetParams& params) {
    const std::size_t len = params.block_length();
    if (block.size() != len)
        throw DimensionError("subnet_forward: block has " + std::to_string(block.size()) +
                             " values, kernel expects " + std::to_string(len));
    if (params.kernel.size() != params.depth * len || params.bias.size() != params.depth)
        throw DimensionError("subnet_forward: malformed parameters");
    std::vector<double> out(params.depth);
    kernels::subnet_forward(block, 1, len, params.kernel, params.bias, 1, params.depth, out);
    return out;
}

FeatureMap integrate(const std::vector<std::vector<double>>& features, std::size_t rows,
                     std::size_t cols) {
    if (features.size() != rows * cols)
        throw DimensionError("integrate: " + std::to_string(features.size()) +
                             " feature vectors for a " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " grid");
    if (features.empty()) throw DimensionError("integrate: no features");
    const std::size_t depth = features.front().size();
    FeatureMap fm(rows, cols, depth);
    for (std::size_t b = 0; b < features.size(); ++b) {
        if (features[b].size() != depth)
            throw DimensionError("integrate: feature " + std::to_string(b) + " has length " +
                                 std::to_string(features[b].size()) + ", expected " +
                                 std::to_string(depth));
        std::copy(features[b].begin(), features[b].end(), fm.data.begin() +
                  static_cast<std::ptrdiff_t>(b * depth));
    }
    return fm;
}

FeatureMap apply_perm_matrix(const PseudoPermMatrix& u, const FeatureMap& fm) {
    const std::size_t n = fm.height * fm.width;
    if (u.n != n || u.entries.size() != n * n)
        throw DimensionError("apply_perm_matrix: U is " + std::to_string(u.n) + "x" +
                             std::to_string(u.n) + " but the map has " + std::to_string(n) +
                             " positions");
    FeatureMap out(fm.height, fm.width, fm.channels);
    kernels::perm_apply(u.entries, n, fm.data, fm.channels, out.data);
    return out;
}

FeatureMap pixel_shuffle(const FeatureMap& fm, std::size_t r) {
    if (r == 0 || fm.channels % (r * r) != 0)
        throw DimensionError("pixel_shuffle: " + std::to_string(fm.channels) +
                             " channels not divisible by r^2 = " + std::to_string(r * r));
    const std::size_t c_out = fm.channels / (r * r);
    FeatureMap out(fm.height * r, fm.width * r, c_out);
    kernels::pixel_shuffle(fm.data, fm.height, fm.width, c_out, r, out.data);
    return out;
}

FeatureMap pixel_unshuffle(const FeatureMap& fm, std::size_t r) {
    if (r == 0 || fm.height % r != 0 || fm.width % r != 0)
        throw DimensionError("pixel_unshuffle: map is not divisible by r = " + std::to_string(r));
    FeatureMap out(fm.height / r, fm.width / r, fm.channels * r * r);
    kernels::pixel_unshuffle(fm.data, fm.height / r, fm.width / r, fm.channels, r, out.data);
    return out;
}

FeatureMap adaptnet_forward(const Image8& scrambled, const AdaptNetParams& params) {
    params.validate();
    const std::size_t B = params.block_size;
    if (scrambled.height() != params.rows * B || scrambled.width() != params.cols * B)
        throw DimensionError("adaptnet_forward: image is " + std::to_string(scrambled.height()) +
                             "x" + std::to_string(scrambled.width()) + ", network expects " +
                             std::to_string(params.rows * B) + "x" +
                             std::to_string(params.cols * B));
    const bool nibbles = params.in_channels == 2 * scrambled.channels();
    if (!nibbles && params.in_channels != scrambled.channels())
        throw DimensionError("adaptnet_forward: network expects " +
                             std::to_string(params.in_channels) + " input channels");

    const FeatureMap input = encode_input(scrambled, nibbles);
    const auto x = gather_blocks(input, B);
    const std::size_t n = params.blocks();
    FeatureMap integrated(params.rows, params.cols, params.depth());
    kernels::subnet_forward(x, n, params.block_length(), params.kernel, params.bias,
                            params.sets(), params.depth(), integrated.data);
    if (params.mode == AdaptMode::ELE) integrated = apply_perm_matrix(params.u, integrated);
    return pixel_shuffle(integrated, B);
}

} // namespace blockscramble
