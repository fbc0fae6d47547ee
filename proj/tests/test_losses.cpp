#include <doctest.h>

#include <cmath>
#include <numeric>

#include "blockscramble/losses.hpp"
#include "test_util.hpp"

using namespace blockscramble;
using testutil::random_reals;

namespace {

double norm(const std::vector<double>& v) {
    return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double scale = std::max(norm(a), norm(b));
    return scale == 0.0 ? 0.0 : norm(d) / scale;
}

template <class F>
std::vector<double> central_difference(std::vector<double> x, F f, double delta) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + delta;
        const double up = f(x);
        x[i] = keep - delta;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * delta);
    }
    return g;
}

} // namespace

TEST_SUITE("losses") {

TEST_CASE("loss_u unit values") {
    CHECK(loss_u(PseudoPermMatrix::identity(8)) == 0.0);
    const std::vector<std::size_t> perm{3, 1, 0, 2};
    CHECK(loss_u(PseudoPermMatrix::from_permutation(perm)) == 0.0);
    CHECK(loss_u(PseudoPermMatrix(4, std::vector<double>(16, 0.25))) == 0.25);
    // Scaled permutation: still one nonzero per row and column.
    CHECK(loss_u(PseudoPermMatrix(2, {0.0, -3.0, 7.0, 0.0})) == 0.0);
    CHECK(loss_u(PseudoPermMatrix(2, {1.0, 1.0, 0.0, 0.0})) > 0.0);
    CHECK_THROWS_AS(loss_u(std::vector<double>(5), 2), DimensionError);
}

TEST_CASE("loss_u is positively homogeneous and non-negative") {
    std::mt19937_64 rng(61);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng() % 8;
        auto u = random_reals(rng, n * n);
        const double base = loss_u(u, n);
        CHECK(base >= 0.0);
        for (auto& v : u) v *= 2.0;
        CHECK(loss_u(u, n) == doctest::Approx(2.0 * base).epsilon(1e-12));
    }
}

TEST_CASE("smoothness unit values") {
    CHECK(smoothness(FeatureMap(5, 4, 3, 0.7)) == 0.0);
    FeatureMap ramp(2, 2, 1);
    ramp.at(0, 1, 0) = 1.0;
    ramp.at(1, 1, 0) = 1.0;
    CHECK(smoothness(ramp) == 1.0);
    const std::vector<FeatureMap> maps{ramp, FeatureMap(2, 2, 1, 3.0)};
    CHECK(loss_s(maps) == 0.5);
    // Degenerate axes contribute nothing.
    FeatureMap row(1, 3, 1, std::vector<double>{0.0, 1.0, 3.0});
    CHECK(smoothness(row) == doctest::Approx((1.0 + 4.0) / 2.0));
    CHECK(smoothness(FeatureMap(1, 1, 2, 5.0)) == 0.0);
}

TEST_CASE("smoothness scales with the square of the map") {
    std::mt19937_64 rng(62);
    FeatureMap fm(5, 6, 3, random_reals(rng, 90));
    const double base = smoothness(fm);
    for (auto& v : fm.data) v *= 2.0;
    CHECK(smoothness(fm) == doctest::Approx(4.0 * base).epsilon(1e-12));
}

TEST_CASE("cross entropy unit values") {
    CHECK(loss_ce(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 0.0}, 2).value == 0.0);
    CHECK(std::abs(loss_ce(std::vector<double>{0.5, 0.5}, std::vector<double>{0.0, 1.0}, 2).value -
                   std::log(2.0)) < 1e-10);
    const std::vector<double> p{0.5, 0.5, 0.0, 0.25, 0.25, 0.5}, t{1, 0, 0, 0, 1, 0};
    CHECK(loss_ce(p, t, 3).value == doctest::Approx(1.039721).epsilon(1e-6));

    const auto clamped = loss_ce(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 0.0}, 2);
    CHECK(clamped.clamped);
    CHECK(clamped.value == doctest::Approx(-std::log(kProbabilityFloor)));
    CHECK_FALSE(loss_ce(std::vector<double>{0.3, 0.7}, std::vector<double>{1.0, 0.0}, 2).clamped);

    CHECK_THROWS_AS(loss_ce(std::vector<double>{0.5, 0.6}, std::vector<double>{1, 0}, 2), DomainError);
    CHECK_THROWS_AS(loss_ce(std::vector<double>{0.5, 0.5}, std::vector<double>{1, 0, 0}, 2), DimensionError);
}

TEST_CASE("total loss is the weighted sum") {
    const LossBreakdown a = loss_total(1.0, 0.0, 0.0);
    CHECK(a.total == 1.0);
    const LossBreakdown b = loss_total(0.5, 2.0, 1.0);
    CHECK(b.total == doctest::Approx(0.602).epsilon(1e-12));
    CHECK(b.lambda_u == 0.001);
    CHECK(b.lambda_s == 0.1);
    CHECK(loss_total(0.37, 5.0, 9.0, 0.0, 0.0).total == 0.37);
}

TEST_CASE("softmax is stable and normalised") {
    const auto p = softmax(std::vector<double>{1000.0, 1000.0, -1000.0});
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK(p[2] == 0.0);
    std::mt19937_64 rng(63);
    const auto q = softmax(random_reals(rng, 10, -30.0, 30.0));
    CHECK(std::accumulate(q.begin(), q.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("loss_u gradient matches central differences over 20 draws") {
    std::mt19937_64 rng(64);
    int failures = 0;
    for (int draw = 0; draw < 20; ++draw) {
        const std::size_t n = 2 + rng() % 7;
        auto u = random_reals(rng, n * n);
        // Keep entries away from the kink of |u| at zero.
        for (auto& v : u)
            if (std::abs(v) < 1e-2) v = 0.5;
        std::vector<double> analytic(n * n, 0.0);
        loss_u_gradient(u, n, 1.0, analytic);
        const auto numeric = central_difference(u, [&](const std::vector<double>& x) { return loss_u(x, n); }, 1e-6);
        if (relative_error(analytic, numeric) >= 1e-5) ++failures;
    }
    CHECK(failures == 0);
}

TEST_CASE("loss_u gradient near the identity") {
    std::mt19937_64 rng(65);
    const std::size_t n = 6;
    auto u = random_reals(rng, n * n, 0.02, 0.05);
    for (std::size_t i = 0; i < n; ++i) u[i * n + i] += 1.0;
    std::vector<double> analytic(n * n, 0.0);
    loss_u_gradient(u, n, 3.0, analytic);
    const auto numeric = central_difference(u, [&](const std::vector<double>& x) { return 3.0 * loss_u(x, n); }, 1e-6);
    CHECK(relative_error(analytic, numeric) < 1e-5);
}

TEST_CASE("smoothness gradient matches central differences over 20 draws") {
    std::mt19937_64 rng(66);
    int failures = 0;
    for (int draw = 0; draw < 20; ++draw) {
        const std::size_t h = 1 + rng() % 5, w = 1 + rng() % 5, c = 1 + rng() % 3;
        const FeatureMap fm(h, w, c, random_reals(rng, h * w * c));
        std::vector<double> analytic(fm.data.size(), 0.0);
        smoothness_gradient(fm, 0.7, analytic);
        const auto numeric = central_difference(
            fm.data, [&](const std::vector<double>& x) { return 0.7 * smoothness(FeatureMap(h, w, c, x)); }, 1e-5);
        if (relative_error(analytic, numeric) >= 1e-5) ++failures;
    }
    CHECK(failures == 0);
}

}
