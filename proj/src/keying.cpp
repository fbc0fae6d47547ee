#include "blockscramble/keying.hpp"

#include <sodium.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace blockscramble {

namespace {

void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) throw Error("libsodium initialisation failed");
        return true;
    }();
    (void)ready;
}

constexpr std::string_view kHexDigits = "0123456789abcdef";

int hex_value(char ch) {
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
    return -1;
}

} // namespace

SubkeyStream::SubkeyStream(const Seed256& seed) : key_(seed) { ensure_sodium(); }

void SubkeyStream::refill() {
    static constexpr std::array<std::uint8_t, crypto_stream_chacha20_NONCEBYTES> nonce{};
    buffer_.fill(0);
    // 256 bytes = 4 ChaCha20 blocks; the block counter advances by 4 per refill.
    crypto_stream_chacha20_xor_ic(buffer_.data(), buffer_.data(), buffer_.size(), nonce.data(),
                                  counter_, key_.data());
    counter_ += buffer_.size() / 64;
    pos_ = 0;
}

std::uint8_t SubkeyStream::next_byte() {
    if (pos_ == buffer_.size()) refill();
    return buffer_[pos_++];
}

std::uint64_t SubkeyStream::next_u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(next_byte()) << (8 * i);
    return v;
}

std::uint64_t SubkeyStream::uniform(std::uint64_t bound) {
    if (bound == 0) throw DomainError("uniform: bound must be positive");
    // Values below 2^64 mod bound would bias the modulo; reject them.
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t x = next_u64();
        if (x >= threshold) return x % bound;
    }
}

double SubkeyStream::uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

SubkeyStream derive(const Seed256& master_seed, std::string_view label, std::uint64_t index) {
    ensure_sodium();
    if (label.empty()) throw DomainError("derive: label must be nonempty");
    std::vector<std::uint8_t> message(label.begin(), label.end());
    message.push_back(0);
    for (int i = 0; i < 8; ++i) message.push_back(static_cast<std::uint8_t>(index >> (8 * i)));

    Seed256 subkey{};
    crypto_generichash(subkey.data(), subkey.size(), message.data(), message.size(),
                       master_seed.data(), master_seed.size());
    return SubkeyStream(subkey);
}

SubkeyStream derive(const ScrambleKey& master, std::string_view label, std::uint64_t index) {
    return derive(master.master_seed, label, index);
}

std::vector<std::size_t> random_permutation(SubkeyStream& stream, std::size_t n) {
    if (n == 0) throw DomainError("random_permutation: empty domain");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(stream.uniform(i + 1));
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

std::vector<std::uint8_t> random_bits(SubkeyStream& stream, std::size_t n) {
    std::vector<std::uint8_t> bits(n);
    std::uint8_t byte = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 8 == 0) byte = stream.next_byte();
        bits[i] = static_cast<std::uint8_t>((byte >> (i % 8)) & 1u);
    }
    return bits;
}

bool is_permutation_of_iota(const std::vector<std::size_t>& perm) {
    std::vector<std::size_t> sorted(perm);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != i) return false;
    return true;
}

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
    return inv;
}

ScrambleKey generate_key(SchemeId scheme, std::size_t block_size) {
    ensure_sodium();
    if (block_size == 0) throw DomainError("generate_key: block size must be positive");
    ScrambleKey key;
    key.scheme = scheme;
    key.block_size = block_size;
    randombytes_buf(key.master_seed.data(), key.master_seed.size());
    return key;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0xF]);
    }
    return out;
}

Seed256 seed_from_hex(std::string_view hex) {
    if (hex.size() != 64) throw ParseError("seed must be 64 hex characters, got " +
                                           std::to_string(hex.size()));
    Seed256 seed{};
    for (std::size_t i = 0; i < 32; ++i) {
        const int hi = hex_value(hex[2 * i]);
        const int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw ParseError("seed contains a non-hex character");
        seed[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return seed;
}

Seed256 seed_from_u64(std::uint64_t value) {
    ensure_sodium();
    std::array<std::uint8_t, 8> bytes{};
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(value >> (8 * i));
    Seed256 seed{};
    crypto_generichash(seed.data(), seed.size(), bytes.data(), bytes.size(), nullptr, 0);
    return seed;
}

std::string format_keyfile(const ScrambleKey& key) {
    std::ostringstream out;
    out << "version=1\n"
        << "scheme=" << scheme_name(key.scheme) << '\n'
        << "block_size=" << key.block_size << '\n'
        << "seed=" << to_hex(key.master_seed) << '\n';
    return out.str();
}

ScrambleKey parse_keyfile(std::string_view text) {
    std::map<std::string, std::pair<std::string, int>> fields;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError("key file line " + std::to_string(line_no) +
                             ": expected name=value, got '" + line + "'");
        std::string name = line.substr(0, eq);
        if (name != "version" && name != "scheme" && name != "block_size" && name != "seed")
            throw ParseError("key file line " + std::to_string(line_no) + ": unknown field '" +
                             name + "'");
        if (fields.contains(name))
            throw ParseError("key file line " + std::to_string(line_no) + ": duplicate field '" +
                             name + "'");
        fields[name] = {line.substr(eq + 1), line_no};
    }
    for (const char* required : {"version", "scheme", "block_size", "seed"})
        if (!fields.contains(required))
            throw ParseError(std::string("key file: missing field '") + required + "'");

    const auto& [version, version_line] = fields["version"];
    if (version != "1")
        throw ParseError("key file line " + std::to_string(version_line) +
                         ": unsupported version '" + version + "'");

    ScrambleKey key;
    key.scheme = parse_scheme(fields["scheme"].first);

    const auto& [bs, bs_line] = fields["block_size"];
    try {
        std::size_t used = 0;
        const long long value = std::stoll(bs, &used);
        if (used != bs.size() || value <= 0) throw std::invalid_argument("bad");
        key.block_size = static_cast<std::size_t>(value);
    } catch (const std::exception&) {
        throw ParseError("key file line " + std::to_string(bs_line) +
                         ": block_size must be a positive integer, got '" + bs + "'");
    }

    const auto& [seed, seed_line] = fields["seed"];
    try {
        key.master_seed = seed_from_hex(seed);
    } catch (const ParseError& e) {
        throw ParseError("key file line " + std::to_string(seed_line) + ": " + e.what());
    }
    return key;
}

void write_keyfile(const ScrambleKey& key, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open key file for writing: " + path.string());
    out << format_keyfile(key);
    if (!out) throw IoError("failed writing key file: " + path.string());
}

ScrambleKey read_keyfile(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open key file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_keyfile(buf.str());
}

std::string key_fingerprint(const ScrambleKey& key) {
    ensure_sodium();
    const std::string text = format_keyfile(key);
    std::array<std::uint8_t, crypto_hash_sha256_BYTES> digest{};
    crypto_hash_sha256(digest.data(), reinterpret_cast<const unsigned char*>(text.data()),
                       text.size());
    return to_hex(digest);
}

} // namespace blockscramble
