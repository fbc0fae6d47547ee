#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "blockscramble/core.hpp"
#include "blockscramble/keying.hpp"

namespace blockscramble {

// ---------------------------------------------------------------------------
// CIFAR binary
// ---------------------------------------------------------------------------

enum class CifarVariant { Cifar10, Cifar100 };

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPixels = 3 * kCifarSide * kCifarSide;

constexpr std::size_t cifar_record_size(CifarVariant v) noexcept {
    return v == CifarVariant::Cifar10 ? kCifarPixels + 1 : kCifarPixels + 2;
}
constexpr std::size_t cifar_classes(CifarVariant v) noexcept {
    return v == CifarVariant::Cifar10 ? 10 : 100;
}

// One record as stored: label byte(s) followed by planar R, G, B planes.
struct CifarRecord {
    std::uint8_t coarse_label = 0; // CIFAR-100 only
    std::uint8_t label = 0;        // CIFAR-10 label or CIFAR-100 fine label
    Image8 image;                  // interleaved 32x32x3
};

std::vector<CifarRecord> read_cifar_records(const std::filesystem::path& path, CifarVariant variant);
void write_cifar_records(const std::filesystem::path& path, std::span<const CifarRecord> records,
                         CifarVariant variant);

// Labels are the CIFAR-10 label or the CIFAR-100 fine label.
std::vector<LabeledExample> read_cifar(const std::filesystem::path& path, CifarVariant variant);

// Keeps examples whose label appears in `classes`, relabelled to its index there.
std::vector<LabeledExample> select_classes(std::span<const LabeledExample> data,
                                           std::span<const std::size_t> classes,
                                           std::size_t per_class_limit = SIZE_MAX);

// ---------------------------------------------------------------------------
// PNG (8-bit gray or RGB)
// ---------------------------------------------------------------------------

Image8 png_read(const std::filesystem::path& path);
void png_write(const Image8& img, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Augmentation and dataset scrambling
// ---------------------------------------------------------------------------

// Reflect-pad by 4, take a random crop of the original size, flip
// horizontally with probability 1/2. Works for any image size.
Image8 augment(const Image8& img, SubkeyStream& stream);

struct DatasetManifest {
    SchemeId scheme = SchemeId::ELE;
    std::size_t block_size = 0;
    std::string key_fingerprint;
    std::size_t count = 0;
    bool augmented = false;
};

std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text);

// Scrambles every record of a CIFAR file with one key, carrying labels
// through untouched, and writes `out_path` plus `out_path` + ".manifest".
// Augmentation (before scrambling) draws from streams derived from
// augment_seed and the record index, so output is reproducible.
DatasetManifest scramble_dataset(const std::filesystem::path& in_path,
                                 const std::filesystem::path& out_path, const ScrambleKey& key,
                                 CifarVariant variant, bool augment_first = false,
                                 std::uint64_t augment_seed = 0);

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path);

} // namespace blockscramble
