#include "blockscramble/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace blockscramble {

namespace {

void check_channels(std::size_t channels) {
    if (channels != 1 && channels != 3)
        throw DimensionError("Image8: channels must be 1 or 3, got " + std::to_string(channels));
}

} // namespace

Image8::Image8(std::size_t height, std::size_t width, std::size_t channels)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, 0) {
    check_channels(channels);
}

Image8::Image8(std::size_t height, std::size_t width, std::size_t channels,
               std::vector<std::uint8_t> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_channels(channels);
    if (data_.size() != height * width * channels)
        throw DimensionError("Image8: data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(height) + "x" + std::to_string(width) +
                             "x" + std::to_string(channels));
}

std::string_view scheme_name(SchemeId scheme) noexcept {
    switch (scheme) {
    case SchemeId::LE: return "LE";
    case SchemeId::ETC: return "ETC";
    case SchemeId::ELE: return "ELE";
    }
    return "?";
}

SchemeId parse_scheme(std::string_view text) {
    std::string upper(text);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    if (upper == "LE") return SchemeId::LE;
    if (upper == "ETC") return SchemeId::ETC;
    if (upper == "ELE") return SchemeId::ELE;
    throw SchemeError("unknown scheme '" + std::string(text) + "' (expected LE, ETC or ELE)");
}

FeatureMap::FeatureMap(std::size_t h, std::size_t w, std::size_t c, std::vector<double> values)
    : height(h), width(w), channels(c), data(std::move(values)) {
    if (data.size() != h * w * c)
        throw DimensionError("FeatureMap: data length " + std::to_string(data.size()) +
                             " != " + std::to_string(h * w * c));
}

bool FeatureMap::all_finite() const noexcept {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

PseudoPermMatrix::PseudoPermMatrix(std::size_t size, std::vector<double> values)
    : n(size), entries(std::move(values)) {
    if (entries.size() != n * n)
        throw DimensionError("PseudoPermMatrix: expected " + std::to_string(n * n) +
                             " entries, got " + std::to_string(entries.size()));
}

PseudoPermMatrix PseudoPermMatrix::identity(std::size_t size) {
    PseudoPermMatrix u(size);
    for (std::size_t i = 0; i < size; ++i) u(i, i) = 1.0;
    return u;
}

PseudoPermMatrix PseudoPermMatrix::from_permutation(std::span<const std::size_t> perm) {
    PseudoPermMatrix u(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= perm.size()) throw RangeError("from_permutation: index out of range");
        u(i, perm[i]) = 1.0;
    }
    return u;
}

void check_label(const LabeledExample& example, std::size_t num_classes) {
    if (example.label >= num_classes)
        throw RangeError("label " + std::to_string(example.label) + " >= class count " +
                         std::to_string(num_classes));
}

BlockGrid segment(const Image8& img, std::size_t block_size) {
    if (block_size == 0) throw DimensionError("segment: block size must be positive");
    if (img.height() % block_size != 0)
        throw DimensionError("segment: height " + std::to_string(img.height()) +
                             " is not divisible by block size " + std::to_string(block_size));
    if (img.width() % block_size != 0)
        throw DimensionError("segment: width " + std::to_string(img.width()) +
                             " is not divisible by block size " + std::to_string(block_size));

    BlockGrid grid;
    grid.block_size = block_size;
    grid.rows = img.height() / block_size;
    grid.cols = img.width() / block_size;
    grid.channels = img.channels();
    grid.blocks.reserve(grid.rows * grid.cols);

    const std::size_t row_len = block_size * img.channels();
    const auto src = img.data();
    for (std::size_t br = 0; br < grid.rows; ++br) {
        for (std::size_t bc = 0; bc < grid.cols; ++bc) {
            Block block(grid.block_length());
            for (std::size_t i = 0; i < block_size; ++i) {
                const std::size_t offset =
                    ((br * block_size + i) * img.width() + bc * block_size) * img.channels();
                std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(offset), row_len,
                            block.begin() + static_cast<std::ptrdiff_t>(i * row_len));
            }
            grid.blocks.push_back(std::move(block));
        }
    }
    return grid;
}

Image8 assemble(const BlockGrid& grid) {
    if (grid.block_size == 0 || grid.rows == 0 || grid.cols == 0)
        throw DimensionError("assemble: empty grid");
    if (grid.blocks.size() != grid.rows * grid.cols)
        throw DimensionError("assemble: grid has " + std::to_string(grid.blocks.size()) +
                             " blocks, expected " + std::to_string(grid.rows * grid.cols));
    const std::size_t len = grid.block_length();
    for (std::size_t b = 0; b < grid.blocks.size(); ++b)
        if (grid.blocks[b].size() != len)
            throw DimensionError("assemble: block " + std::to_string(b) + " has " +
                                 std::to_string(grid.blocks[b].size()) + " entries, expected " +
                                 std::to_string(len));

    const std::size_t B = grid.block_size;
    Image8 img(grid.rows * B, grid.cols * B, grid.channels);
    const std::size_t row_len = B * grid.channels;
    auto dst = img.data();
    for (std::size_t br = 0; br < grid.rows; ++br) {
        for (std::size_t bc = 0; bc < grid.cols; ++bc) {
            const Block& block = grid.blocks[br * grid.cols + bc];
            for (std::size_t i = 0; i < B; ++i) {
                const std::size_t offset = ((br * B + i) * img.width() + bc * B) * grid.channels;
                std::copy_n(block.begin() + static_cast<std::ptrdiff_t>(i * row_len), row_len,
                            dst.begin() + static_cast<std::ptrdiff_t>(offset));
            }
        }
    }
    return img;
}

} // namespace blockscramble
