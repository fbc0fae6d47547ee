#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>
#include <string>
#include <tuple>

#include "blockscramble/core.hpp"
#include "test_util.hpp"

using namespace blockscramble;

TEST_SUITE("core") {

TEST_CASE("segment of an 8x8 ramp matches brute-force index enumeration") {
    std::vector<std::uint8_t> data(64);
    for (std::size_t i = 0; i < 64; ++i) data[i] = static_cast<std::uint8_t>(i);
    const Image8 img(8, 8, 1, data);
    const BlockGrid g = segment(img, 4);
    REQUIRE(g.count() == 4);
    CHECK(g.rows == 2);
    CHECK(g.cols == 2);

    const std::vector<std::uint8_t> first{0, 1, 2, 3, 8, 9, 10, 11, 16, 17, 18, 19, 24, 25, 26, 27};
    CHECK(g.blocks[0] == first);

    for (std::size_t br = 0; br < 2; ++br)
        for (std::size_t bc = 0; bc < 2; ++bc) {
            std::vector<std::uint8_t> expect;
            for (std::size_t y = br * 4; y < br * 4 + 4; ++y)
                for (std::size_t x = bc * 4; x < bc * 4 + 4; ++x)
                    expect.push_back(static_cast<std::uint8_t>(y * 8 + x));
            CHECK(g.blocks[br * 2 + bc] == expect);
        }
}

TEST_CASE("32x32x3 with B=4 gives 64 blocks of 48 values") {
    std::mt19937_64 rng(1);
    const BlockGrid g = segment(testutil::random_image(rng, 32, 32), 4);
    CHECK(g.count() == 64);
    for (const auto& b : g.blocks) CHECK(b.size() == 48);
}

TEST_CASE("a single block equal to the image") {
    std::mt19937_64 rng(2);
    const Image8 img = testutil::random_image(rng, 4, 4);
    const BlockGrid g = segment(img, 4);
    REQUIRE(g.count() == 1);
    CHECK(std::equal(g.blocks[0].begin(), g.blocks[0].end(), img.data().begin()));
}

TEST_CASE("assemble inverts segment") {
    std::mt19937_64 rng(3);
    for (auto [h, w, b] : {std::tuple{32, 32, 4}, {32, 48, 8}, {6, 9, 3}, {5, 5, 1}, {16, 8, 8}}) {
        const Image8 img = testutil::random_image(rng, h, w);
        CHECK(assemble(segment(img, b)) == img);
    }
}

TEST_CASE("segment names the offending axis") {
    std::mt19937_64 rng(4);
    try {
        segment(testutil::random_image(rng, 30, 32), 4);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("height") != std::string::npos);
    }
    try {
        segment(testutil::random_image(rng, 32, 30), 4);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("width") != std::string::npos);
    }
    CHECK_THROWS_AS(segment(testutil::random_image(rng, 4, 4), 0), DimensionError);
}

TEST_CASE("assemble rejects malformed grids") {
    BlockGrid g{2, 1, 2, 3, {Block(12), Block(11)}};
    CHECK_THROWS_AS(assemble(g), DimensionError);
    g.blocks.pop_back();
    CHECK_THROWS_AS(assemble(g), DimensionError);
}

TEST_CASE("Image8 validates its shape") {
    CHECK_THROWS_AS(Image8(2, 2, 2), DimensionError);
    CHECK_THROWS_AS(Image8(2, 2, 3, std::vector<std::uint8_t>(11)), DimensionError);
    const Image8 ok(2, 3, 1);
    CHECK(ok.size() == 6);
}

TEST_CASE("scheme names parse case-insensitively") {
    CHECK(parse_scheme("LE") == SchemeId::LE);
    CHECK(parse_scheme("EtC") == SchemeId::ETC);
    CHECK(parse_scheme("ele") == SchemeId::ELE);
    for (SchemeId s : {SchemeId::LE, SchemeId::ETC, SchemeId::ELE})
        CHECK(parse_scheme(scheme_name(s)) == s);
    CHECK_THROWS_AS(parse_scheme("XYZ"), SchemeError);
    CHECK_THROWS_AS(parse_scheme(""), SchemeError);
}

TEST_CASE("pseudo-permutation matrix helpers") {
    const auto id = PseudoPermMatrix::identity(3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(id(i, j) == (i == j ? 1.0 : 0.0));
    const std::vector<std::size_t> perm{2, 0, 1};
    const auto p = PseudoPermMatrix::from_permutation(perm);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(p(i, j) == (perm[i] == j ? 1.0 : 0.0));
    CHECK_THROWS_AS(PseudoPermMatrix(2, {1.0, 2.0, 3.0}), DimensionError);
    const std::vector<std::size_t> bad{0, 3, 1};
    CHECK_THROWS_AS(PseudoPermMatrix::from_permutation(bad), RangeError);
}

TEST_CASE("labels must be below the class count") {
    LabeledExample ex{Image8(1, 1, 3), 3};
    CHECK_NOTHROW(check_label(ex, 4));
    CHECK_THROWS_AS(check_label(ex, 3), RangeError);
}

TEST_CASE("feature map finiteness") {
    FeatureMap fm(2, 2, 1, 0.5);
    CHECK(fm.all_finite());
    fm.at(1, 1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(fm.all_finite());
    CHECK_THROWS_AS(FeatureMap(2, 2, 1, std::vector<double>(3)), DimensionError);
}

}
