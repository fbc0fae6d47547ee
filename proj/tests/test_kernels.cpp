#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <tuple>

#include "blockscramble/kernels.hpp"
#include "test_util.hpp"

using namespace blockscramble;
using testutil::random_reals;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

constexpr double kTol = 1e-12;

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("sub-network forward/backward match the reference") {
    std::mt19937_64 rng(41);
    for (std::size_t sets : {1u, 0u}) {
        const std::size_t n = 16, len = 24, depth = 12;
        const std::size_t s = sets ? 1 : n;
        const auto x = random_reals(rng, n * len);
        const auto w = random_reals(rng, s * depth * len);
        const auto b = random_reals(rng, s * depth);
        std::vector<double> out_k(n * depth), out_r(n * depth);
        kernels::subnet_forward(x, n, len, w, b, s, depth, out_k);
        reference::subnet_forward(x, n, len, w, b, s, depth, out_r);
        CHECK(max_abs_diff(out_k, out_r) < kTol);

        const auto g = random_reals(rng, n * depth);
        std::vector<double> gw_k(w.size(), 0.5), gw_r(w.size(), 0.5), gb_k(b.size(), 0.5),
            gb_r(b.size(), 0.5);
        kernels::subnet_backward(x, n, len, g, s, depth, gw_k, gb_k);
        reference::subnet_backward(x, n, len, g, s, depth, gw_r, gb_r);
        CHECK(max_abs_diff(gw_k, gw_r) < kTol);
        CHECK(max_abs_diff(gb_k, gb_r) < kTol);
    }
}

TEST_CASE("pseudo-permutation product and its backward match the reference") {
    std::mt19937_64 rng(42);
    const std::size_t n = 20, d = 7;
    const auto u = random_reals(rng, n * n), f = random_reals(rng, n * d), g = random_reals(rng, n * d);
    std::vector<double> ok(n * d), orf(n * d);
    kernels::perm_apply(u, n, f, d, ok);
    reference::perm_apply(u, n, f, d, orf);
    CHECK(max_abs_diff(ok, orf) < kTol);
    std::vector<double> gu_k(n * n, 0.0), gu_r(n * n, 0.0), gf_k(n * d, 0.0), gf_r(n * d, 0.0);
    kernels::perm_backward(u, n, f, d, g, gu_k, gf_k);
    reference::perm_backward(u, n, f, d, g, gu_r, gf_r);
    CHECK(max_abs_diff(gu_k, gu_r) < kTol);
    CHECK(max_abs_diff(gf_k, gf_r) < kTol);
}

TEST_CASE("im2col convolution matches direct convolution") {
    std::mt19937_64 rng(43);
    for (auto [h, w, c, o] : {std::tuple{8, 8, 3, 4}, {5, 7, 2, 3}, {1, 1, 1, 1}, {16, 16, 16, 8}}) {
        const auto in = random_reals(rng, h * w * c);
        const auto wt = random_reals(rng, o * 9 * c);
        const auto b = random_reals(rng, o);
        std::vector<double> cols(h * w * 9 * c), out_k(h * w * o), out_r(h * w * o);
        kernels::im2col3x3(in, h, w, c, cols);
        kernels::conv3x3_forward(cols, h, w, c, wt, b, o, out_k);
        reference::conv3x3_forward(in, h, w, c, wt, b, o, out_r);
        CHECK(max_abs_diff(out_k, out_r) < kTol);

        const auto g = random_reals(rng, h * w * o);
        std::vector<double> gw_k(wt.size(), 0.0), gw_r(wt.size(), 0.0), gb_k(o, 0.0), gb_r(o, 0.0),
            gi_k(in.size(), 0.0), gi_r(in.size(), 0.0);
        kernels::conv3x3_backward(cols, h, w, c, wt, o, g, gw_k, gb_k, gi_k);
        reference::conv3x3_backward(in, h, w, c, wt, o, g, gw_r, gb_r, gi_r);
        CHECK(max_abs_diff(gw_k, gw_r) < 1e-11);
        CHECK(max_abs_diff(gb_k, gb_r) < 1e-11);
        CHECK(max_abs_diff(gi_k, gi_r) < 1e-11);
    }
}

TEST_CASE("relu, max pooling and linear layers") {
    std::vector<double> v{-1.0, 0.0, 2.0};
    kernels::relu_forward(v);
    CHECK(v == std::vector<double>{0.0, 0.0, 2.0});
    std::vector<double> g{1.0, 1.0, 1.0};
    kernels::relu_backward(v, g);
    CHECK(g == std::vector<double>{0.0, 0.0, 1.0});

    // 2x2x1 input -> one output holding the max and its flat index.
    const std::vector<double> in{1.0, 5.0, 3.0, 2.0};
    std::vector<double> out(1);
    std::vector<std::size_t> arg(1);
    kernels::maxpool2_forward(in, 2, 2, 1, out, arg);
    CHECK(out[0] == 5.0);
    CHECK(arg[0] == 1);
    std::vector<double> gin(4, 0.0);
    const std::vector<double> gout{2.0};
    kernels::maxpool2_backward(arg, gout, gin);
    CHECK(gin == std::vector<double>{0.0, 2.0, 0.0, 0.0});

    std::mt19937_64 rng(44);
    const auto x = random_reals(rng, 5), w = random_reals(rng, 15), b = random_reals(rng, 3);
    std::vector<double> y(3);
    kernels::linear_forward(x, w, b, 3, y);
    for (std::size_t k = 0; k < 3; ++k) {
        double s = b[k];
        for (std::size_t i = 0; i < 5; ++i) s += w[k * 5 + i] * x[i];
        CHECK(y[k] == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("pixel shuffle follows its index formula and unshuffle inverts it") {
    std::mt19937_64 rng(45);
    const std::size_t h = 3, w = 5, c = 2, r = 4;
    const auto in = random_reals(rng, h * w * c * r * r);
    std::vector<double> out(in.size()), back(in.size());
    kernels::pixel_shuffle(in, h, w, c, r, out);
    const std::size_t W = w * r;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t dh = 0; dh < r; ++dh)
                    for (std::size_t dw = 0; dw < r; ++dw)
                        CHECK(out[((y * r + dh) * W + x * r + dw) * c + ch] ==
                              in[(y * w + x) * c * r * r + ch * r * r + dh * r + dw]);
    kernels::pixel_unshuffle(out, h, w, c, r, back);
    CHECK(back == in);
}

TEST_CASE("results do not depend on the thread count") {
    std::mt19937_64 rng(46);
    const std::size_t h = 16, w = 16, c = 8, o = 16;
    const auto in = random_reals(rng, h * w * c), wt = random_reals(rng, o * 9 * c),
               b = random_reals(rng, o), g = random_reals(rng, h * w * o);
    std::vector<double> cols(h * w * 9 * c);
    kernels::im2col3x3(in, h, w, c, cols);
    auto run = [&](int threads) {
        omp_set_num_threads(threads);
        std::vector<double> out(h * w * o), gw(wt.size(), 0.0), gb(o, 0.0), gi(in.size(), 0.0);
        kernels::conv3x3_forward(cols, h, w, c, wt, b, o, out);
        kernels::conv3x3_backward(cols, h, w, c, wt, o, g, gw, gb, gi);
        out.insert(out.end(), gw.begin(), gw.end());
        out.insert(out.end(), gi.begin(), gi.end());
        return out;
    };
    const auto one = run(1), four = run(4);
    omp_set_num_threads(omp_get_num_procs());
    CHECK(one == four);
}

}
