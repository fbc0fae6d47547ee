#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "blockscramble/adaptnet.hpp"
#include "blockscramble/model.hpp"
#include "blockscramble/scramble.hpp"
#include "test_util.hpp"

using namespace blockscramble;
using testutil::random_reals;

namespace {

FeatureMap random_map(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t c) {
    return FeatureMap(h, w, c, random_reals(rng, h * w * c));
}

} // namespace

TEST_SUITE("adaptnet") {

TEST_CASE("32x32x3 input with B=4 and C_f=3 gives a 32x32x3 map") {
    std::mt19937_64 rng(51);
    const Image8 img = testutil::random_image(rng, 32, 32);
    for (AdaptMode mode : {AdaptMode::LE, AdaptMode::ELE})
        for (std::size_t cin : {3u, 6u}) {
            AdaptNetParams p(mode, 4, cin, 3, 8, 8);
            p.kernel = random_reals(rng, p.kernel.size());
            const FeatureMap out = adaptnet_forward(img, p);
            CHECK(out.height == 32);
            CHECK(out.width == 32);
            CHECK(out.channels == 3);
        }
    AdaptNetParams p(AdaptMode::ELE, 4, 6, 3, 8, 8);
    CHECK(p.kernel.size() == 64 * 48 * 96);
    CHECK(p.u.n == 64);
    CHECK_THROWS_AS(adaptnet_forward(testutil::random_image(rng, 32, 28), p), DimensionError);
}

TEST_CASE("pixel shuffle conserves the value multiset on 1000 random maps") {
    std::mt19937_64 rng(52);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t r = 1 + rng() % 4, h = 1 + rng() % 4, w = 1 + rng() % 4, c = 1 + rng() % 3;
        const FeatureMap fm = random_map(rng, h, w, c * r * r);
        const FeatureMap out = pixel_shuffle(fm, r);
        REQUIRE(out.height == h * r);
        REQUIRE(out.width == w * r);
        REQUIRE(out.channels == c);
        auto a = fm.data, b = out.data;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
        CHECK(pixel_unshuffle(out, r).data == fm.data);
    }
    CHECK_THROWS_AS(pixel_shuffle(FeatureMap(2, 2, 3), 2), DimensionError);
}

TEST_CASE("pseudo-permutation product is linear and the identity is a no-op") {
    std::mt19937_64 rng(53);
    const std::size_t n = 6;
    const PseudoPermMatrix u(n, random_reals(rng, n * n));
    const FeatureMap a = random_map(rng, 2, 3, 4), b = random_map(rng, 2, 3, 4);
    FeatureMap sum = a;
    for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] = 2.0 * a.data[i] - 3.0 * b.data[i];
    const auto ua = apply_perm_matrix(u, a), ub = apply_perm_matrix(u, b), us = apply_perm_matrix(u, sum);
    for (std::size_t i = 0; i < us.data.size(); ++i)
        CHECK(us.data[i] == doctest::Approx(2.0 * ua.data[i] - 3.0 * ub.data[i]).epsilon(1e-12));
    CHECK(apply_perm_matrix(PseudoPermMatrix::identity(n), a).data == a.data);

    // A permutation matrix moves whole feature rows.
    const std::vector<std::size_t> perm{5, 3, 0, 1, 4, 2};
    const auto moved = apply_perm_matrix(PseudoPermMatrix::from_permutation(perm), a);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < 4; ++d) CHECK(moved.data[i * 4 + d] == a.data[perm[i] * 4 + d]);
    CHECK_THROWS_AS(apply_perm_matrix(PseudoPermMatrix::identity(5), a), DimensionError);
}

TEST_CASE("input encodings map negative-positive reversal to a sign flip") {
    std::mt19937_64 rng(54);
    const Image8 img = testutil::random_image(rng, 4, 4);
    Image8 neg = img;
    for (auto& v : neg.data()) v = static_cast<std::uint8_t>(255 - v);
    for (bool nibbles : {false, true}) {
        const FeatureMap a = encode_input(img, nibbles), b = encode_input(neg, nibbles);
        CHECK(a.channels == (nibbles ? 6u : 3u));
        for (std::size_t i = 0; i < a.data.size(); ++i) CHECK(std::abs(a.data[i] + b.data[i]) < 1e-15);
    }
    const FeatureMap plain = encode_input(img, false);
    for (std::size_t i = 0; i < plain.data.size(); ++i)
        CHECK(plain.data[i] == img.data()[i] / 255.0 - 0.5);
    const FeatureMap nib = encode_input(img, true);
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(nib.data[2 * i] == (img.data()[i] >> 4) / 15.0 - 0.5);
        CHECK(nib.data[2 * i + 1] == (img.data()[i] & 15) / 15.0 - 0.5);
    }
}

TEST_CASE("gather_blocks follows segment order") {
    std::mt19937_64 rng(55);
    const Image8 img = testutil::random_image(rng, 8, 12);
    const auto g = segment(img, 4);
    const auto x = gather_blocks(encode_input(img, false), 4);
    for (std::size_t b = 0; b < g.count(); ++b)
        for (std::size_t i = 0; i < 48; ++i) CHECK(x[b * 48 + i] == g.blocks[b][i] / 255.0 - 0.5);
    CHECK_THROWS_AS(gather_blocks(FeatureMap(6, 8, 1), 4), DimensionError);
}

TEST_CASE("an identity kernel reproduces the plain encoding") {
    std::mt19937_64 rng(56);
    const std::size_t B = 4;
    const Image8 img = testutil::random_image(rng, 16, 16);
    for (AdaptMode mode : {AdaptMode::LE, AdaptMode::ELE}) {
        AdaptNetParams p(mode, B, 3, 3, 4, 4);
        // Output channel c*B*B + dh*B + dw reads block pixel (dh, dw), channel c.
        for (std::size_t s = 0; s < p.sets(); ++s)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t dh = 0; dh < B; ++dh)
                    for (std::size_t dw = 0; dw < B; ++dw) {
                        const std::size_t out = c * B * B + dh * B + dw;
                        const std::size_t in = (dh * B + dw) * 3 + c;
                        p.kernel[(s * p.depth() + out) * p.block_length() + in] = 1.0;
                    }
        const FeatureMap got = adaptnet_forward(img, p);
        const FeatureMap expect = encode_input(img, false);
        REQUIRE(got.data.size() == expect.data.size());
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(got.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-15));
    }
}

TEST_CASE("ELE uses one sub-network per block, LE shares one") {
    AdaptNetParams le(AdaptMode::LE, 4, 6, 3, 8, 8), ele(AdaptMode::ELE, 4, 6, 3, 8, 8);
    CHECK(le.sets() == 1);
    CHECK(ele.sets() == 64);
    CHECK(le.u.n == 0);
    std::mt19937_64 rng(57);
    ele.kernel = random_reals(rng, ele.kernel.size());
    const auto s0 = ele.subnet(0), s5 = ele.subnet(5);
    CHECK(s0.kernel.data() != s5.kernel.data());
    CHECK(s0.kernel.size() == 48 * 96);
    CHECK(le.subnet(0).kernel.data() == le.subnet(63).kernel.data());
    CHECK_THROWS_AS(ele.subnet(64), RangeError);
}

TEST_CASE("the initialised ELE model has the expected parameter count") {
    const Model m = Model::initialize(ModelConfig{}, 1);
    // subnets 64*(48*96+48), U 64*64, head conv 16*27+16, 32*144+32, fc 10*2048+10
    const std::size_t expect = 64 * (48 * 96 + 48) + 64 * 64 + (16 * 27 + 16) + (32 * 144 + 32) +
                               (10 * 2048 + 10);
    CHECK(m.parameter_count() == expect);
}

}
