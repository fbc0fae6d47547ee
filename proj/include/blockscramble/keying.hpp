#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "blockscramble/core.hpp"

namespace blockscramble {

// Deterministic uniform integer source. The bytes are a ChaCha20 keystream
// under a 256-bit subkey, so output is identical on every platform.
class SubkeyStream {
public:
    explicit SubkeyStream(const Seed256& seed);

    std::uint64_t next_u64();
    std::uint8_t next_byte();
    // Uniform integer in [0, bound), rejection sampled; bound must be > 0.
    std::uint64_t uniform(std::uint64_t bound);
    // Uniform real in [0, 1) with 53 bits of resolution.
    double uniform_real();

private:
    void refill();

    Seed256 key_;
    std::uint64_t counter_ = 0;
    std::array<std::uint8_t, 256> buffer_{};
    std::size_t pos_ = 256;
};

// Keyed BLAKE2b(master_seed; label || 0x00 || le64(index)) -> ChaCha20 stream.
SubkeyStream derive(const ScrambleKey& master, std::string_view label, std::uint64_t index);
SubkeyStream derive(const Seed256& master_seed, std::string_view label, std::uint64_t index);

// Fisher-Yates over 0..n-1. Throws DomainError for n == 0.
std::vector<std::size_t> random_permutation(SubkeyStream& stream, std::size_t n);
std::vector<std::uint8_t> random_bits(SubkeyStream& stream, std::size_t n);

bool is_permutation_of_iota(const std::vector<std::size_t>& perm);
std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm);

// Fresh key from the OS entropy source.
ScrambleKey generate_key(SchemeId scheme, std::size_t block_size);

std::string format_keyfile(const ScrambleKey& key);
ScrambleKey parse_keyfile(std::string_view text);
void write_keyfile(const ScrambleKey& key, const std::filesystem::path& path);
ScrambleKey read_keyfile(const std::filesystem::path& path);

// SHA-256 (hex) of the serialized key file. Safe to log; the seed is not recoverable.
std::string key_fingerprint(const ScrambleKey& key);

std::string to_hex(std::span<const std::uint8_t> bytes);
Seed256 seed_from_hex(std::string_view hex);
// Convenience for tests and tools: expands a 64-bit value into a full seed.
Seed256 seed_from_u64(std::uint64_t value);

} // namespace blockscramble
