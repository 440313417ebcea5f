#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "cyl/grid.hpp"

using namespace cyl;

namespace {

constexpr double kPi = std::numbers::pi;

// eta(s) = int |s - y| rho(y) dy / int rho, rho the bump exp(-1/(1 - 4y^2))
// on (-1/2, 1/2); evaluated with a different quadrature family.
double eta_oracle(double s) {
    auto rho = [](double y) {
        double q = 1.0 - 4.0 * y * y;
        return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    double z = ts.integrate(rho, -0.5, 0.5);
    double num = 0.0;
    if (s > -0.5) num += ts.integrate([&](double y) { return (s - y) * rho(y); }, -0.5, std::min(s, 0.5));
    if (s < 0.5) num += ts.integrate([&](double y) { return (y - s) * rho(y); }, std::max(s, -0.5), 0.5);
    return num / z;
}

}  // namespace

TEST_CASE("grid construction") {
    auto g = make_grid(10, 401, 32);
    CHECK(g.h_s() == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(g.h_t() == doctest::Approx(1.0 / 32));
    CHECK(g.s(g.center()) == doctest::Approx(0.0));
    auto m = make_grid(1, 3, 4);
    CHECK(m.h_s() == doctest::Approx(1.0));
    CHECK_THROWS_AS(make_grid(10, 400, 32), GridError);
    CHECK_THROWS_AS(make_grid(10, 401, 3), GridError);
    CHECK_THROWS_AS(make_grid(0, 401, 32), GridError);
    CHECK_THROWS_AS(make_grid(-1, 401, 32), GridError);
    auto sp = grid_from_spacing(60, 0.5, 8);
    CHECK(sp.n_s % 2 == 1);
    CHECK(sp.h_s() == doctest::Approx(0.5));
}

TEST_CASE("shifts") {
    auto g = make_grid(10, 401, 16);
    Field c = sample_field(g, 1, [](double, double, int) { return cplx(1.5, -0.5); });
    CHECK(max_abs_diff(shift_field(c, 0.0), c) == 0.0);

    Field bump = sample_field(g, 1, [](double s, double, int) { return std::abs(s) <= 1 ? cplx(1.0) : cplx(0.0); });
    CHECK(max_abs(shift_field(bump, 2 * g.s_max)) == 0.0);

    // off-grid shift of a Gaussian against pointwise evaluation
    const double R = 1.013;
    Field gauss = sample_field(g, 1, [](double s, double t, int) {
        return std::exp(-s * s) * std::polar(1.0, 2 * kPi * t);
    });
    Field sh = shift_field(gauss, R);
    double err = 0.0;
    for (int i = 0; i < g.n_s; ++i) {
        if (g.s(i) + R > g.s_max - 0.2) continue;
        for (int j = 0; j < g.n_t; ++j) {
            double s = g.s(i) + R;
            err = std::max(err, std::abs(sh(i, j) - std::exp(-s * s) * std::polar(1.0, 2 * kPi * g.t(j))));
        }
    }
    CHECK(err < 1e-5);

    // round trip on the interior
    Field back = shift_field(shift_field(gauss, R), -R);
    double rt = 0.0;
    for (int i = 0; i < g.n_s; ++i)
        if (std::abs(g.s(i)) < g.s_max - 3)
            for (int j = 0; j < g.n_t; ++j) rt = std::max(rt, std::abs(back(i, j) - gauss(i, j)));
    CHECK(rt < 1e-5);

    // grid multiples are exact index shifts
    int steps = 0;
    CHECK(is_grid_multiple(g, 1.0, &steps));
    CHECK(steps == 20);
    CHECK(max_abs_diff(shift_field(gauss, 1.0), shift_steps(gauss, 20)) == 0.0);

    // d_t commutes with the shift exactly
    CHECK(max_abs_diff(diff_t(shift_field(gauss, R)), shift_field(diff_t(gauss), R)) < 1e-12);
    Field ds_sh = diff_s(shift_field(gauss, R)), sh_ds = shift_field(diff_s(gauss), R);
    double dd = 0.0;
    for (int i = 10; i < g.n_s - 40; ++i)
        for (int j = 0; j < g.n_t; ++j) dd = std::max(dd, std::abs(ds_sh(i, j) - sh_ds(i, j)));
    CHECK(dd < 1e-4);
}

TEST_CASE("cutoff and weight") {
    CHECK(cutoff_beta(-1.0) == 0.0);
    CHECK(cutoff_beta(-3.0) == 0.0);
    CHECK(cutoff_beta(1.0) == 1.0);
    CHECK(cutoff_beta(2.5) == 1.0);
    CHECK(cutoff_beta(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    double prev = 0.0;
    for (double s = -1.2; s <= 1.2; s += 0.01) {
        CHECK(cutoff_beta(s) + cutoff_beta(-s) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(cutoff_beta(s) >= prev);
        prev = cutoff_beta(s);
        double h = 1e-5;
        CHECK(cutoff_beta_ds(s) == doctest::Approx((cutoff_beta(s + h) - cutoff_beta(s - h)) / (2 * h)).epsilon(1e-6));
    }

    CHECK(weight_eta(2.0) == 2.0);
    CHECK(weight_eta(-3.0) == 3.0);
    CHECK(weight_eta(1.0) == 1.0);
    CHECK(weight_eta(0.0) > 0.0);
    CHECK(weight_eta(0.0) < 0.5);
    for (double s : {0.0, 0.1, -0.2, 0.37, -0.49, 0.45})
        CHECK(weight_eta(s) == doctest::Approx(eta_oracle(s)).epsilon(1e-10));
    for (double s : {-0.3, 0.0, 0.21}) {
        double h = 1e-5;
        CHECK(weight_eta_ds(s) == doctest::Approx((weight_eta(s + h) - weight_eta(s - h)) / (2 * h)).epsilon(1e-6));
    }
    auto g = make_grid(3, 61, 4);
    for (int i = 0; i < g.n_s; ++i) {
        double s = g.s(i), e = weight_eta(s), b = cutoff_beta(s);
        CHECK(b >= 0.0);
        CHECK(b <= 1.0);
        if (std::abs(s) < 1.0) {
            CHECK(e > 0.0);
            CHECK(e < 1.0);
        }
    }
}

TEST_CASE("derivatives") {
    auto g = make_grid(5, 201, 16);
    Field c = sample_field(g, 2, [](double, double, int k) { return cplx(1.0 + k, 2.0); });
    CHECK(max_abs(diff_s(c)) < 1e-11);
    CHECK(max_abs(diff_t(c)) < 1e-12);

    Field sn = sample_field(g, 1, [](double, double t, int) { return cplx(std::sin(2 * kPi * t)); });
    Field cs = sample_field(g, 1, [](double, double t, int) { return cplx(2 * kPi * std::cos(2 * kPi * t)); });
    CHECK(max_abs_diff(diff_t(sn), cs) < 1e-12);
    CHECK(max_abs_diff(diff_t(sn, 2), -(4 * kPi * kPi) * sn) < 1e-10);

    // the one-sided closures are exact for quartics, so s^2 -> 2 everywhere
    Field sq = sample_field(g, 1, [](double s, double, int) { return cplx(s * s); });
    Field two = diff_s(sq, 2);
    for (int i = 0; i < g.n_s; ++i) CHECK(two(i, 0).real() == doctest::Approx(2.0).epsilon(1e-8));
    Field d1 = diff_s(sq);
    for (int i = 0; i < g.n_s; ++i) CHECK(d1(i, 3).real() == doctest::Approx(2 * g.s(i)).epsilon(1e-9));

    // fourth-order convergence on a non-polynomial
    double prev = 0.0;
    for (int n : {101, 201, 401}) {
        auto gg = make_grid(5, n, 4);
        Field u = sample_field(gg, 1, [](double s, double, int) { return cplx(std::sin(s)); });
        Field du = diff_s(u);
        double e = 0.0;
        for (int i = 0; i < gg.n_s; ++i) e = std::max(e, std::abs(du(i, 0) - std::cos(gg.s(i))));
        if (prev > 0) CHECK(prev / e > 12.0);
        prev = e;
    }

    CHECK_THROWS(diff_s(c, kMaxSOrder + 1));
    CHECK_THROWS(diff_t(c, kMaxTOrder + 1));
    CHECK(max_abs_diff(diff_s(c, 0), c) == 0.0);
    CHECK(max_abs_diff(diff_s(sn), diff_s_serial(sn)) == 0.0);
    CHECK(max_abs_diff(diff_t(sn), diff_t_serial(sn)) == 0.0);
}

TEST_CASE("field csv round trip") {
    auto g = make_grid(2, 21, 4);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    Field u = sample_field(g, 2, [&](double, double, int) { return cplx(nd(rng), nd(rng)); });
    const std::string path = "grid_roundtrip_test.csv";
    write_field_csv(u, path);
    Field v = read_field_csv(path);
    std::remove(path.c_str());
    CHECK(v.grid == g);
    CHECK(v.dim == 2);
    CHECK(max_abs_diff(u, v) == 0.0);
}
