#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blockscramble/errors.hpp"

namespace blockscramble {

// H x W x C grid of 8-bit intensities, row-major (h, w, c).
class Image8 {
public:
    Image8() = default;
    Image8(std::size_t height, std::size_t width, std::size_t channels);
    Image8(std::size_t height, std::size_t width, std::size_t channels,
           std::vector<std::uint8_t> data);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<const std::uint8_t> data() const noexcept { return data_; }
    std::span<std::uint8_t> data() noexcept { return data_; }

    std::uint8_t at(std::size_t h, std::size_t w, std::size_t c) const noexcept {
        return data_[(h * width_ + w) * channels_ + c];
    }
    std::uint8_t& at(std::size_t h, std::size_t w, std::size_t c) noexcept {
        return data_[(h * width_ + w) * channels_ + c];
    }

    friend bool operator==(const Image8&, const Image8&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<std::uint8_t> data_;
};

// One B x B x C block, row-major (i, j, c) inside the block.
using Block = std::vector<std::uint8_t>;

struct BlockGrid {
    std::size_t block_size = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t channels = 0;
    std::vector<Block> blocks; // row-major over the block grid

    std::size_t count() const noexcept { return blocks.size(); }
    std::size_t block_length() const noexcept { return block_size * block_size * channels; }
    friend bool operator==(const BlockGrid&, const BlockGrid&) = default;
};

enum class SchemeId { LE, ETC, ELE };

std::string_view scheme_name(SchemeId scheme) noexcept;
// Accepts "LE", "ETC", "ELE" (case-insensitive, "EtC" included); throws SchemeError.
SchemeId parse_scheme(std::string_view text);

using Seed256 = std::array<std::uint8_t, 32>;

struct ScrambleKey {
    SchemeId scheme = SchemeId::ELE;
    std::size_t block_size = 4;
    Seed256 master_seed{};

    friend bool operator==(const ScrambleKey&, const ScrambleKey&) = default;
};

// H x W x C grid of reals, row-major (h, w, c).
struct FeatureMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), data(h * w * c, fill) {}
    FeatureMap(std::size_t h, std::size_t w, std::size_t c, std::vector<double> values);

    double at(std::size_t h, std::size_t w, std::size_t c) const noexcept {
        return data[(h * width + w) * channels + c];
    }
    double& at(std::size_t h, std::size_t w, std::size_t c) noexcept {
        return data[(h * width + w) * channels + c];
    }
    bool all_finite() const noexcept;
};

// Trainable N x N real matrix, row-major. Entries may be negative.
struct PseudoPermMatrix {
    std::size_t n = 0;
    std::vector<double> entries;

    PseudoPermMatrix() = default;
    explicit PseudoPermMatrix(std::size_t size) : n(size), entries(size * size, 0.0) {}
    PseudoPermMatrix(std::size_t size, std::vector<double> values);

    static PseudoPermMatrix identity(std::size_t size);
    // Row i holds a single 1 at column perm[i].
    static PseudoPermMatrix from_permutation(std::span<const std::size_t> perm);

    double operator()(std::size_t i, std::size_t j) const noexcept { return entries[i * n + j]; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return entries[i * n + j]; }
};

struct LabeledExample {
    Image8 image;
    std::size_t label = 0;
};

void check_label(const LabeledExample& example, std::size_t num_classes);

// Splits an image into B x B blocks, row-major over the block grid.
BlockGrid segment(const Image8& img, std::size_t block_size);
Image8 assemble(const BlockGrid& grid);

} // namespace blockscramble
