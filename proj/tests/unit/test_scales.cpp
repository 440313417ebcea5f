#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "cyl/scales.hpp"

using namespace cyl;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("weight sequence validation") {
    CHECK_NOTHROW(validate(WeightSequence{{0.1, 0.2, 0.3}, 0.5}));
    CHECK_THROWS(validate(WeightSequence{{0.1, 0.1}, 0.5}));
    CHECK_THROWS(validate(WeightSequence{{0.2, 0.1}, 0.5}));
    CHECK_THROWS(validate(WeightSequence{{-0.1, 0.2}, 0.5}));
    CHECK_THROWS(validate(WeightSequence{{0.1, 0.6}, 0.5}));
}

TEST_CASE("weighted norms against quadrature oracles") {
    auto g = make_grid(10, 4001, 8);
    CHECK(weighted_norm(Field(g, 1), 2, 0.3) == 0.0);

    // u = exp(-2 eta), delta = 1: ||u||^2 = int exp(-2 eta) ds
    Field u = sample_field(g, 1, [](double s, double, int) { return cplx(std::exp(-2.0 * weight_eta(s))); });
    boost::math::quadrature::tanh_sinh<double> ts;
    double inner = ts.integrate([](double s) { return std::exp(-2.0 * weight_eta(s)); }, -0.5, 0.5);
    double outer = 2.0 * (std::exp(-1.0) - std::exp(-20.0)) / 2.0;
    double oracle = std::sqrt(inner + outer);
    CHECK(weighted_norm(u, 0, 1.0) == doctest::Approx(oracle).epsilon(1e-6));

    // Gaussian, unweighted: int exp(-2 s^2) ds = sqrt(pi / 2)
    Field gs = sample_field(g, 1, [](double s, double, int) { return cplx(std::exp(-s * s)); });
    CHECK(weighted_norm(gs, 0, 0.0) == doctest::Approx(std::pow(kPi / 2, 0.25)).epsilon(1e-6));
    // H^1 adds int |2 s e^{-s^2}|^2 = sqrt(pi/2)
    CHECK(weighted_norm(gs, 1, 0.0) == doctest::Approx(std::sqrt(2 * std::sqrt(kPi / 2))).epsilon(1e-6));

    for (int k : {0, 1, 2}) {
        CHECK(weighted_norm(gs, k, 0.0) == doctest::Approx(unweighted_norm(gs, k)).epsilon(1e-14));
        CHECK(weighted_norm(gs, k, 0.4) == doctest::Approx(weighted_norm_serial(gs, k, 0.4)).epsilon(1e-12));
    }
    // the mask keeps full-grid trapezoid weights, so s = 0 enters with weight h
    double half = weighted_norm(gs, 0, 0.0, [](double s) { return s >= 0.0; });
    CHECK(half * half == doctest::Approx(0.5 * std::sqrt(kPi / 2) + 0.5 * g.h_s()).epsilon(1e-6));
}

TEST_CASE("embedding tail bound and slope") {
    auto g = make_grid(12, 481, 8);
    ProbeOptions po;
    po.n_random = 4;
    for (double R : {2.0, 4.0, 6.0}) {
        auto r = embedding_tail_norm(g, 1, 0.2, 0, 0.1, R, po);
        CHECK(r.measured <= r.bound * 1.05);
        CHECK(r.n_probes > 0);
    }
    std::vector<double> Rs{2, 3, 4, 5, 6}, lg;
    for (double R : Rs) lg.push_back(std::log(embedding_tail_norm(g, 1, 1.1, 0, 0.1, R, po).measured));
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < Rs.size(); ++i) mx += Rs[i] / Rs.size(), my += lg[i] / Rs.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < Rs.size(); ++i) sxy += (Rs[i] - mx) * (lg[i] - my), sxx += (Rs[i] - mx) * (Rs[i] - mx);
    CHECK(sxy / sxx == doctest::Approx(-1.0).epsilon(0.1));

    // probe supported strictly inside |s| < R has an empty tail
    Field inside = sample_field(g, 1, [](double s, double, int) {
        return std::abs(s) < 1 ? cplx(std::exp(-1.0 / (1 - s * s))) : cplx(0.0);
    });
    CHECK(embedding_tail_norm({inside}, 1, 0.2, 0, 0.1, 2.0).measured == 0.0);
    CHECK_THROWS(embedding_tail_norm(std::vector<Field>{}, 1, 0.2, 0, 0.1, 2.0));
}

TEST_CASE("norm scale ratios") {
    auto g = make_grid(8, 321, 64);
    std::vector<ScaleSpec> lv{{0, 0, 0.0, 2}, {1, 0, 0.0, 2}};
    for (int n : {4, 8, 12}) {
        Field u = sample_field(g, 1, [n](double s, double t, int) {
            return cplx(std::exp(-s * s) * std::cos(2 * kPi * n * t));
        });
        auto rows = norm_scale_check(lv, {u});
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].finite);
        CHECK(rows[0].measured * 2 * kPi * n == doctest::Approx(1.0).epsilon(0.02));
    }
    Field bump = sample_field(g, 1, [](double s, double, int) { return std::abs(s) < 2 ? cplx(1.0) : cplx(0.0); });
    std::vector<ScaleSpec> three{{0, 0, 0.1, 2}, {1, 0, 0.2, 2}, {2, 0, 0.3, 2}};
    for (const auto& r : norm_scale_check(three, {bump})) CHECK(std::isfinite(r.measured));
    std::vector<ScaleSpec> same{{0, 1, 0.1, 2}, {0, 1, 0.1, 2}};
    auto eq = norm_scale_check(same, {bump});
    for (const auto& r : eq) CHECK(r.measured == doctest::Approx(1.0));
}

TEST_CASE("translation action differentiability") {
    std::vector<double> hs{1e-1, 5e-2, 2.5e-2, 1.25e-2};
    auto smooth = translation_diff_check(sin_mode(1), 0.0, 1.0, constant_function(0.0), hs);
    REQUIRE(smooth.size() == hs.size());
    for (std::size_t i = 1; i < smooth.size(); ++i)
        CHECK(smooth[i - 1].remainder_over_h / smooth[i].remainder_over_h == doctest::Approx(2.0).epsilon(0.05));
    CHECK(smooth.back().remainder_over_h < 0.5);

    auto flat = translation_diff_check(constant_function(3.0), 0.2, 1.0, constant_function(0.0), hs);
    for (const auto& r : flat) CHECK(r.remainder_over_h == 0.0);

    auto rough = translation_rough_family(hs);
    for (const auto& r : rough) CHECK(r.remainder_over_h > 0.1);

    auto d = sin_mode(1).derivative();
    CHECK(d(0.0) == doctest::Approx(2 * kPi));
}
