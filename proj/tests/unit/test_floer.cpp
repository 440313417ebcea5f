#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "cyl/floer.hpp"
#include "cyl/scales.hpp"

using namespace cyl;

namespace {

constexpr double kPi = std::numbers::pi;

// c e^{(2 pi k - a) s} e^{2 pi i k t}
Field linear_mode(const CylinderGrid& g, double a, int k, double c) {
    return sample_field(g, 1, [=](double s, double t, int) {
        return c * std::exp((2 * kPi * k - a) * s) * std::polar(1.0, 2 * kPi * k * t);
    });
}

Field smooth_random(const CylinderGrid& g, int dim, std::mt19937_64& rng, double amp) {
    std::normal_distribution<double> nd;
    cplx c0(nd(rng), nd(rng)), c1(nd(rng), nd(rng)), c2(nd(rng), nd(rng));
    double s0 = nd(rng), w = 1.0 + std::abs(nd(rng));
    return sample_field(g, dim, [=](double s, double t, int c) {
        double env = std::exp(-(s - s0) * (s - s0) / (w * w));
        return amp * env * (c0 + c1 * std::polar(1.0, 2 * kPi * t + c) + c2 * std::polar(1.0, -4 * kPi * t));
    });
}

double max_rel(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace

TEST_CASE("model evaluators") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (const char* kind : {"linear", "perturbed", "twisted"}) {
        for (int n : {1, 2}) {
            auto M = make_model(kind, 1.0, 0.3, n);
            Vec zero = Vec::Zero(2 * n);
            CHECK(M->X(zero).norm() == 0.0);
            Eigen::JacobiSVD<Eigen::MatrixXd> sv(Eigen::MatrixXd(M->DX(zero)));
            CHECK(sv.singularValues().minCoeff() > 0.0);
            CHECK(M->gap_info() > 0.0);
            for (int trial = 0; trial < 100; ++trial) {
                Vec z(2 * n), v(2 * n);
                for (int q = 0; q < 2 * n; ++q) z[q] = 0.8 * nd(rng), v[q] = nd(rng);
                Mat J = M->J(z);
                CHECK((J * J + Mat::Identity(2 * n, 2 * n)).norm() < 1e-12);
                const double h = 1e-5;
                Mat fdX(2 * n, 2 * n), fdJ(2 * n, 2 * n);
                for (int q = 0; q < 2 * n; ++q) {
                    Vec e = Vec::Zero(2 * n);
                    e[q] = h;
                    fdX.col(q) = (M->X(z + e) - M->X(z - e)) / (2 * h);
                    fdJ.col(q) = (M->J(z + e) - M->J(z - e)) * v / (2 * h);
                }
                CHECK(max_rel(M->DX(z), fdX) < 1e-6);
                CHECK(max_rel(M->DJ_times(z, v), fdJ) < 1e-6);
            }
        }
    }
    CHECK_THROWS(make_model("unknown", 1.0, 0.0));
    CHECK(model_chi(0.5) == 1.0);
    CHECK(model_chi(4.5) == 0.0);
}

TEST_CASE("residual") {
    auto g = make_grid(3, 601, 16);
    LinearModel M(1.0);
    CHECK(max_abs(floer_residual(M, Field(g, 1))) == 0.0);
    for (int k : {0, 1, -1}) {
        const double lam = 2 * kPi * k - 1.0;
        Field u = linear_mode(g, 1.0, k, std::exp(-std::abs(lam) * 3.0));
        Field r = floer_residual(M, u);
        CHECK(max_abs(r) / max_abs(diff_s(u)) < 1e-5);
    }
    // pointwise oracle on a non-solution
    PerturbedModel P(1.0, 0.05);
    Field b = sample_field(g, 1, [](double s, double t, int) {
        return std::exp(-s * s) * cplx(1.0 + 0.3 * std::cos(2 * kPi * t), 0.2);
    });
    Field r = floer_residual(P, b);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> is(40, g.n_s - 41), it(0, g.n_t - 1);
    for (int q = 0; q < 5; ++q) {
        int i = is(rng), j = it(rng);
        double s = g.s(i), t = g.t(j);
        cplx z = std::exp(-s * s) * cplx(1.0 + 0.3 * std::cos(2 * kPi * t), 0.2);
        cplx zs = -2 * s * z;
        cplx zt = std::exp(-s * s) * cplx(-0.3 * 2 * kPi * std::sin(2 * kPi * t), 0.0);
        double rho = std::norm(z);
        cplx X = cplx(0, 1) * z + 0.05 * model_chi(rho) * std::conj(z) * std::conj(z);
        cplx want = zs + cplx(0, 1) * (zt - X);
        CHECK(std::abs(r(i, j) - want) < 1e-6);
    }
}

TEST_CASE("energy") {
    auto g = make_grid(3, 1201, 16);
    LinearModel M(1.0);
    CHECK(energy(M, Field(g, 1)) == 0.0);
    const double c = 0.05, lam = 2 * kPi - 1.0;
    Field u = linear_mode(g, 1.0, 1, c * std::exp(-lam * 3.0));
    // exact solutions: E = 2 int |d_s u|^2 = 2 c'^2 lam^2 sinh(2 lam S) / lam
    const double cc = c * std::exp(-lam * 3.0);
    const double oracle = 2 * cc * cc * lam * lam * std::sinh(2 * lam * 3.0) / lam;
    CHECK(energy(M, u) == doctest::Approx(oracle).epsilon(1e-3));
    Field b = sample_field(g, 1, [](double s, double t, int) { return std::exp(-s * s) * std::polar(1.0, 2 * kPi * t); });
    CHECK(energy(M, 2.0 * b) == doctest::Approx(4.0 * energy(M, b)).epsilon(1e-12));
}

TEST_CASE("linearization") {
    auto g = make_grid(4, 161, 16);
    LinearModel lin(1.0);
    Field xi = sample_field(g, 1, [](double s, double t, int) { return std::exp(-s * s) * std::polar(1.0, 2 * kPi * t); });
    FieldOperator L0 = linearize_cr(lin, Field(g, 1));
    Field want = diff_s(xi);
    Field dt = diff_t(xi);
    for (std::size_t q = 0; q < want.size(); ++q) want.data[q] += cplx(0, 1) * dt.data[q] + xi.data[q];
    CHECK(max_abs_diff(L0.apply({xi})[0], want) < 1e-12);
    CHECK(max_abs_diff(linearize_cr(lin, xi, LinVariant::Reduced).apply({xi})[0],
                       linearize_cr(lin, xi, LinVariant::Full).apply({xi})[0]) == 0.0);

    // directional derivative of the residual, 20 random directions, O(h)
    TwistedModel tw(1.0, 0.3);
    std::mt19937_64 rng(5);
    Field base = smooth_random(g, 1, rng, 0.6);
    FieldOperator L = linearize_cr(tw, base, LinVariant::Full);
    FieldOperator Lp = linearize_cr(tw, base, LinVariant::Reduced);
    Field r0 = floer_residual(tw, base);
    double variant_gap = 0.0;
    for (int d = 0; d < 20; ++d) {
        Field v = smooth_random(g, 1, rng, 1.0);
        Field Lv = L.apply({v})[0];
        double e1 = max_abs_diff((1.0 / 1e-3) * (floer_residual(tw, base + 1e-3 * v) - r0), Lv);
        double e2 = max_abs_diff((1.0 / 1e-4) * (floer_residual(tw, base + 1e-4 * v) - r0), Lv);
        CHECK(e1 / e2 > 7.0);
        CHECK(e1 / e2 < 13.0);
        CHECK(e2 < 1e-3 * std::max(1.0, max_abs(Lv)));
        variant_gap = std::max(variant_gap, max_abs_diff(Lp.apply({v})[0], Lv));
    }
    // the variants differ for non-constant J off solutions
    CHECK(variant_gap > 1e-3);
    // serial and parallel application agree
    Field v = smooth_random(g, 1, rng, 1.0);
    CHECK(max_abs_diff(L.apply({v})[0], L.apply_serial({v})[0]) < 1e-14);
}

TEST_CASE("Newton solver") {
    auto g = make_grid(3, 241, 8);
    LinearModel lin(1.0);
    auto z = solve_trajectory(lin, Field(g, 1));
    CHECK(z.converged);
    CHECK(z.iterations <= 1);
    CHECK(max_abs(z.gamma) == 0.0);

    Field mode = linear_mode(g, 1.0, 1, std::exp(-(2 * kPi - 1.0) * 3.0));
    // noise vanishing at the pinned ends
    Field noise = sample_field(g, 1, [](double s, double t, int) {
        return 1e-3 * std::exp(-2 * s * s) * cplx(std::cos(2 * kPi * t), 0.5);
    });
    auto T = solve_trajectory(lin, mode + noise);
    CHECK(T.converged);
    CHECK(T.residual_norm < 1e-10);
    CHECK(max_abs_diff(T.gamma, mode) < 1e-5);

    PerturbedModel pm(1.0, 0.05);
    Field guess = linear_mode(g, 1.0, 0, 0.08);
    auto P = solve_trajectory(pm, guess);
    CHECK(P.converged);
    CHECK(P.residual_norm < 1e-10);
    const auto& h = P.residual_history;
    REQUIRE(h.size() >= 3);
    // quadratic convergence on the last steps above round-off
    for (std::size_t k = 1; k < h.size(); ++k)
        if (h[k - 1] < 1e-2 && h[k] > 1e-13) CHECK(h[k] < 50.0 * h[k - 1] * h[k - 1]);
}

TEST_CASE("decay rate") {
    auto g = make_grid(12, 961, 8);
    Field u = sample_field(g, 1, [](double s, double t, int) {
        return -std::copysign(0.5, s) * std::exp(-2.0 * std::abs(s)) * cplx(1.0 + 0.5 * std::cos(2 * kPi * t), 0.3);
    });
    CHECK(decay_rate(u) == doctest::Approx(2.0).epsilon(0.02));
    CHECK(decay_rate(Field(g, 1)) == kInfiniteRate);
    Field m = linear_mode(g, 1.0, 0, 1.0);
    CHECK(decay_rate(m, TailSide::Right) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("trajectory save and load") {
    auto g = make_grid(2, 41, 4);
    LinearModel lin(1.0);
    auto T = solve_trajectory(lin, Field(g, 1));
    save_trajectory(T, "traj_test.csv", "traj_test.json");
    auto U = load_trajectory("traj_test.csv", "traj_test.json");
    std::remove("traj_test.csv");
    std::remove("traj_test.json");
    CHECK(U.model_id == T.model_id);
    CHECK(U.converged == T.converged);
    CHECK(max_abs_diff(U.gamma, T.gamma) == 0.0);
}
