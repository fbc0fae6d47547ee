#include <doctest.h>

#include <algorithm>
#include <array>
#include <set>
#include <tuple>

#include "blockscramble/keying.hpp"
#include "blockscramble/scramble.hpp"
#include "test_util.hpp"

using namespace blockscramble;

namespace {

using Grid = std::vector<std::vector<std::array<std::uint8_t, 3>>>;

Grid to_grid(std::span<const std::uint8_t> block, std::size_t B) {
    Grid g(B, std::vector<std::array<std::uint8_t, 3>>(B));
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j)
            for (std::size_t c = 0; c < 3; ++c) g[i][j][c] = block[(i * B + j) * 3 + c];
    return g;
}

// numpy.rot90(k=1): counter-clockwise quarter turn.
Grid rot90(const Grid& g) {
    const std::size_t B = g.size();
    Grid out = g;
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j) out[i][j] = g[j][B - 1 - i];
    return out;
}

Grid fliplr(const Grid& g) {
    Grid out = g;
    for (auto& row : out) std::reverse(row.begin(), row.end());
    return out;
}

std::vector<std::uint8_t> etc_oracle(std::span<const std::uint8_t> block, std::size_t B,
                                     const EtcBlockOps& ops) {
    Grid g = to_grid(block, B);
    for (int t = 0; t < (ops.rot_flip & 3); ++t) g = rot90(g);
    if (ops.rot_flip & 4) g = fliplr(g);
    std::vector<std::uint8_t> out;
    for (const auto& row : g)
        for (const auto& px : row)
            for (std::size_t c = 0; c < 3; ++c) {
                const std::uint8_t v = px[ops.color_perm[c]];
                out.push_back(ops.np_flag ? static_cast<std::uint8_t>(255 - v) : v);
            }
    return out;
}

// Direct transcription of the LE/ELE pipeline on one block.
std::vector<std::uint8_t> le_oracle(std::span<const std::uint8_t> block, const LeBlockOps& ops) {
    std::vector<std::uint8_t> nib;
    for (auto v : block) {
        nib.push_back(v >> 4);
        nib.push_back(v & 15);
    }
    std::vector<std::uint8_t> shuffled(nib.size());
    for (std::size_t i = 0; i < nib.size(); ++i)
        shuffled[i] = ops.np_mask[i] ? 15 - nib[ops.pixel_perm[i]] : nib[ops.pixel_perm[i]];
    std::vector<std::uint8_t> out;
    for (std::size_t k = 0; k < shuffled.size(); k += 2)
        out.push_back(static_cast<std::uint8_t>(shuffled[k] << 4 | shuffled[k + 1]));
    return out;
}

std::vector<std::uint8_t> block_of(const Image8& img, std::size_t B, std::size_t b) {
    const std::size_t cols = img.width() / B;
    const std::size_t r0 = (b / cols) * B, c0 = (b % cols) * B;
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < B; ++j)
            for (std::size_t c = 0; c < 3; ++c) out.push_back(img.at(r0 + i, c0 + j, c));
    return out;
}

// Expected scrambled image built block by block from the key material.
Image8 scramble_oracle(const Image8& img, const ScrambleKey& key) {
    const std::size_t B = key.block_size;
    const std::size_t n = (img.height() / B) * (img.width() / B);
    std::vector<std::vector<std::uint8_t>> transformed(n);
    for (std::size_t b = 0; b < n; ++b) {
        const auto blk = block_of(img, B, b);
        switch (key.scheme) {
        case SchemeId::LE: transformed[b] = le_oracle(blk, le_ops_from_key(key)); break;
        case SchemeId::ELE: transformed[b] = le_oracle(blk, ele_ops_from_key(key, b)); break;
        case SchemeId::ETC: transformed[b] = etc_oracle(blk, B, etc_ops_from_key(key, b)); break;
        }
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    if (key.scheme != SchemeId::LE) perm = block_permutation_from_key(key, n);
    Image8 out(img.height(), img.width(), 3);
    const std::size_t cols = img.width() / B;
    for (std::size_t dst = 0; dst < n; ++dst) {
        const auto& src = transformed[perm[dst]];
        const std::size_t r0 = (dst / cols) * B, c0 = (dst % cols) * B;
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t j = 0; j < B; ++j)
                for (std::size_t c = 0; c < 3; ++c) out.at(r0 + i, c0 + j, c) = src[(i * B + j) * 3 + c];
    }
    return out;
}

std::multiset<int> folded_nibbles(const Image8& img) {
    std::multiset<int> s;
    for (auto v : img.data()) {
        s.insert(std::min(v >> 4, 15 - (v >> 4)));
        s.insert(std::min(v & 15, 15 - (v & 15)));
    }
    return s;
}

std::multiset<int> folded_bytes(const Image8& img) {
    std::multiset<int> s;
    for (auto v : img.data()) s.insert(std::min<int>(v, 255 - v));
    return s;
}

constexpr std::array<SchemeId, 3> kSchemes{SchemeId::LE, SchemeId::ETC, SchemeId::ELE};

} // namespace

TEST_SUITE("scramble") {

TEST_CASE("bit split and merge") {
    std::mt19937_64 rng(21);
    const Image8 img = testutil::random_image(rng, 4, 4);
    const auto nib = bit_split(img.data(), 3);
    REQUIRE(nib.size() == 96);
    for (std::size_t k = 0; k < img.size(); ++k) {
        CHECK(nib[2 * k] == img.data()[k] >> 4);
        CHECK(nib[2 * k + 1] == (img.data()[k] & 15));
    }
    CHECK(bit_merge(nib, 6) == std::vector<std::uint8_t>(img.data().begin(), img.data().end()));
    std::vector<std::uint8_t> bad(6, 3);
    bad[4] = 16;
    CHECK_THROWS_AS(bit_merge(bad, 6), RangeError);
    CHECK_THROWS_AS(bit_split(img.data(), 1), DimensionError);
}

TEST_CASE("negative-positive transforms are involutions") {
    for (int v = 0; v < 16; ++v) {
        CHECK(np_transform4(np_transform4(static_cast<std::uint8_t>(v), true), true) == v);
        CHECK(np_transform4(static_cast<std::uint8_t>(v), true) == 15 - v);
        CHECK(np_transform4(static_cast<std::uint8_t>(v), false) == v);
    }
    for (int v = 0; v < 256; ++v) {
        CHECK(np_transform8(static_cast<std::uint8_t>(v), true) == 255 - v);
        CHECK(np_transform8(np_transform8(static_cast<std::uint8_t>(v), true), true) == v);
    }
}

TEST_CASE("EtC block ops match rot90/fliplr for all 96 combinations") {
    std::mt19937_64 rng(22);
    for (std::size_t B : {1u, 2u, 3u, 4u}) {
        const Image8 blk = testutil::random_image(rng, B, B);
        std::array<std::uint8_t, 3> perm{0, 1, 2};
        do {
            for (std::uint8_t rf = 0; rf < 8; ++rf)
                for (std::uint8_t np = 0; np < 2; ++np) {
                    const EtcBlockOps ops{rf, np, perm};
                    std::vector<std::uint8_t> out(blk.size()), back(blk.size());
                    apply_etc_ops(blk.data(), B, ops, out);
                    CHECK(out == etc_oracle(blk.data(), B, ops));
                    invert_etc_ops(out, B, ops, back);
                    CHECK(std::equal(back.begin(), back.end(), blk.data().begin()));
                }
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
}

TEST_CASE("LE block ops invert") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 20; ++t) {
        const ScrambleKey k = testutil::random_key(rng, SchemeId::LE, 4);
        const LeBlockOps ops = le_ops_from_key(k);
        CHECK(is_permutation_of_iota(ops.pixel_perm));
        CHECK(ops.pixel_perm.size() == 96);
        const Image8 blk = testutil::random_image(rng, 4, 4);
        const auto nib = bit_split(blk.data(), 3);
        std::vector<std::uint8_t> out(96), back(96);
        apply_le_ops(nib, ops, out);
        invert_le_ops(out, ops, back);
        CHECK(back == nib);
    }
}

TEST_CASE("whole-image scrambling equals the block-by-block oracle") {
    std::mt19937_64 rng(24);
    for (SchemeId s : kSchemes)
        for (std::size_t B : {1u, 2u, 4u, 8u}) {
            const ScrambleKey k = testutil::random_key(rng, s, B);
            const Image8 img = testutil::random_image(rng, 16, 24);
            CHECK(scramble(img, k) == scramble_oracle(img, k));
        }
}

TEST_CASE("round trip is exact for every scheme, block size and shape") {
    std::mt19937_64 rng(25);
    for (SchemeId s : kSchemes)
        for (auto [h, w, B] : {std::tuple{32, 32, 4}, {32, 48, 4}, {24, 16, 8}, {6, 9, 3}, {5, 5, 5}}) {
            for (int t = 0; t < 5; ++t) {
                const ScrambleKey k = testutil::random_key(rng, s, B);
                const Image8 img = testutil::random_image(rng, h, w);
                const Image8 enc = scramble(img, k);
                CHECK(enc.height() == img.height());
                CHECK(enc.width() == img.width());
                CHECK(unscramble(enc, k) == img);
                const ScramblePlan plan = make_plan(k, h, w);
                CHECK(scramble(img, plan) == enc);
                CHECK(unscramble(enc, plan) == img);
            }
        }
}

TEST_CASE("scrambling preserves folded value multisets") {
    std::mt19937_64 rng(26);
    for (int t = 0; t < 10; ++t) {
        const Image8 img = testutil::random_image(rng, 32, 32);
        for (SchemeId s : {SchemeId::LE, SchemeId::ELE}) {
            const ScrambleKey k = testutil::random_key(rng, s, 4);
            CHECK(folded_nibbles(scramble(img, k)) == folded_nibbles(img));
        }
        const ScrambleKey k = testutil::random_key(rng, SchemeId::ETC, 4);
        CHECK(folded_bytes(scramble(img, k)) == folded_bytes(img));
    }
}

TEST_CASE("LE uses one op set and keeps block positions") {
    std::mt19937_64 rng(27);
    const ScrambleKey k = testutil::random_key(rng, SchemeId::LE, 4);
    const Image8 tile = testutil::random_image(rng, 4, 4);
    Image8 img(32, 32, 3);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = tile.at(y % 4, x % 4, c);
    const Image8 enc = scramble(img, k);
    for (std::size_t b = 1; b < 64; ++b) CHECK(block_of(enc, 4, b) == block_of(enc, 4, 0));
    CHECK(make_plan(k, 32, 32).block_perm.empty());
}

TEST_CASE("ELE blocks get independent ops (100 keys)") {
    std::mt19937_64 rng(28);
    int identical_pairs = 0;
    for (int t = 0; t < 100; ++t) {
        const ScrambleKey k = testutil::random_key(rng, SchemeId::ELE, 4);
        const LeBlockOps a = ele_ops_from_key(k, 0), b = ele_ops_from_key(k, 1);
        if (a.pixel_perm == b.pixel_perm || a.np_mask == b.np_mask) ++identical_pairs;
        const ScramblePlan plan = make_plan(k, 32, 32);
        CHECK(is_permutation_of_iota(plan.block_perm));
        CHECK(plan.le_ops.size() == 64);
    }
    CHECK(identical_pairs == 0);
}

TEST_CASE("wrong keys do not unscramble") {
    std::mt19937_64 rng(29);
    for (SchemeId s : kSchemes) {
        const Image8 img = testutil::random_image(rng, 32, 32);
        const ScrambleKey k1 = testutil::random_key(rng, s, 4), k2 = testutil::random_key(rng, s, 4);
        CHECK(unscramble(scramble(img, k1), k2) != img);
    }
}

TEST_CASE("scheme-checked entry points reject foreign keys") {
    std::mt19937_64 rng(30);
    const Image8 img = testutil::random_image(rng, 8, 8);
    const ScrambleKey le = testutil::random_key(rng, SchemeId::LE, 4);
    const ScrambleKey etc = testutil::random_key(rng, SchemeId::ETC, 4);
    const ScrambleKey ele = testutil::random_key(rng, SchemeId::ELE, 4);
    CHECK_THROWS_AS(le_scramble(img, ele), KeyMisuseError);
    CHECK_THROWS_AS(etc_scramble(img, le), KeyMisuseError);
    CHECK_THROWS_AS(ele_unscramble(img, etc), KeyMisuseError);
    CHECK(le_unscramble(le_scramble(img, le), le) == img);
    CHECK(etc_unscramble(etc_scramble(img, etc), etc) == img);
    CHECK(ele_unscramble(ele_scramble(img, ele), ele) == img);
}

TEST_CASE("geometry and channel errors") {
    std::mt19937_64 rng(31);
    const ScrambleKey k = testutil::random_key(rng, SchemeId::ELE, 4);
    CHECK_THROWS_AS(scramble(testutil::random_image(rng, 30, 32), k), DimensionError);
    CHECK_THROWS_AS(scramble(testutil::random_image(rng, 32, 32, 1), k), DimensionError);
    const ScramblePlan plan = make_plan(k, 32, 32);
    CHECK_THROWS_AS(scramble(testutil::random_image(rng, 16, 16), plan), DimensionError);
}

TEST_CASE("same key and input give identical output") {
    std::mt19937_64 rng(32);
    for (SchemeId s : kSchemes) {
        const ScrambleKey k = testutil::random_key(rng, s, 4);
        const Image8 img = testutil::random_image(rng, 32, 32);
        CHECK(scramble(img, k) == scramble(img, k));
    }
}

}
