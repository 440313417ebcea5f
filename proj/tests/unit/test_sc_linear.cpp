#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cyl/sc_linear.hpp"

using namespace cyl;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd samples(int n_t, const Eigen::VectorXd& c) { return ddt_synthesis(n_t) * c; }

}  // namespace

TEST_CASE("d/dt acts as the Fourier multiplier") {
    const int n_t = 16;
    auto T = assemble_ddt(n_t, {0, 1, 2});
    const auto& M = T.level(0).matrix;
    auto one = ddt_coefficients(n_t, [](double) { return 1.0; });
    CHECK((M * one).norm() < 1e-13);
    for (int k : {1, 3, 7}) {
        auto c = ddt_coefficients(n_t, [k](double t) { return std::cos(2 * kPi * k * t); });
        auto want = ddt_coefficients(n_t, [k](double t) { return -2 * kPi * k * std::sin(2 * kPi * k * t); });
        CHECK((M * c - want).norm() < 1e-11);
        // e^{2 pi i k t} -> 2 pi i k e^{2 pi i k t} through its real and imaginary parts
        auto s = ddt_coefficients(n_t, [k](double t) { return std::sin(2 * kPi * k * t); });
        auto ws = ddt_coefficients(n_t, [k](double t) { return 2 * kPi * k * std::cos(2 * kPi * k * t); });
        CHECK((M * s - ws).norm() < 1e-11);
    }
    // synthesis/analysis round trip on the band-limited space (the matrix is real, so reality is kept)
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(ddt_synthesis(n_t).cols(), -1.0, 2.0);
    CHECK((ddt_coefficients(n_t, [&](double t) {
               Eigen::VectorXd x = samples(n_t, v);
               return x(int(std::lround(t * n_t)) % n_t);
           }) - v).norm() < 1e-12);
    CHECK_THROWS(assemble_ddt(3, {0}));
}

TEST_CASE("Fredholm reports") {
    auto T = assemble_ddt(16, {0, 1, 2});
    for (int m : {0, 1, 2}) {
        auto r = fredholm_report(T, m);
        CHECK(r.dim_ker == 1);
        CHECK(r.dim_coker == 1);
        CHECK(r.index == 0);
        CHECK(r.trustworthy);
        CHECK(r.sv_gap > 10);
    }
    auto I = fredholm_report(identity_operator(9, {0}), 0);
    CHECK(I.dim_ker == 0);
    CHECK(I.dim_coker == 0);
    auto Z = fredholm_report(zero_operator(7, {0}), 0);
    CHECK(Z.dim_ker == 7);
    CHECK(Z.dim_coker == 7);
    CHECK(Z.index == 0);

    auto all = index_all_scales(T);
    CHECK(all.consistent);
    REQUIRE(all.reports.size() == 3);
    for (const auto& r : all.reports) CHECK(r.index == 0);
    CHECK(index_all_scales(identity_operator(5, {0, 1, 2})).consistent);

    // negative control: drop a column at level 1
    auto bad = T;
    auto& L = bad.levels[1];
    L.matrix.col(3).setZero();
    auto diag = index_all_scales(bad);
    CHECK_FALSE(diag.consistent);
    CHECK(diag.diagnostic.find("level") != std::string::npos);

    // threshold policy with multiplicities
    auto cl = classify_blocks({{{3.0, 1e-14}, 2, 2, 2}, {{2.0}, 1, 1, 1}}, 0);
    CHECK(cl.dim_ker == 2);
    CHECK(cl.dim_coker == 2);
    auto rect = classify_spectrum({1.0, 0.5}, 2, 3, 0);
    CHECK(rect.dim_ker == 1);
    CHECK(rect.index == 1);
}

TEST_CASE("regularizing check") {
    const int n_t = 32;
    auto T = assemble_ddt(n_t, {0, 1, 2, 3});
    auto f = ddt_coefficients(n_t, [](double t) { return std::cos(2 * kPi * t); });
    for (int m : {1, 2, 3}) {
        auto r = regularizing_check(T, f, m);
        CHECK(r.passed());
        auto want = ddt_coefficients(n_t, [](double t) { return std::sin(2 * kPi * t) / (2 * kPi); });
        // the solution is fixed up to the kernel (constants)
        Eigen::VectorXd d = r.solution - want;
        d(0) = 0.0;
        CHECK(d.norm() < 1e-12);
    }
    auto z = regularizing_check(T, Eigen::VectorXd::Zero(f.size()), 2);
    CHECK(z.passed());
    auto c = regularizing_check(T, ddt_coefficients(n_t, [](double) { return 1.0; }), 2);
    CHECK(c.status == RegularityStatus::NoPreimage);
}

TEST_CASE("splittings") {
    const int n_t = 16;
    auto T = assemble_ddt(n_t, {0, 1});
    auto sp = build_splittings(T, 1);
    const long n = T.level(1).matrix.rows();
    REQUIRE(sp.kernel_basis.cols() == 1);
    REQUIRE(sp.C_basis.cols() == 1);
    // kernel and cokernel complement are the constants
    CHECK(std::abs(sp.kernel_basis(0, 0)) / sp.kernel_basis.norm() == doctest::Approx(1.0));
    CHECK(std::abs(sp.C_basis(0, 0)) / sp.C_basis.norm() == doctest::Approx(1.0));
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(n, n);
    avg(0, 0) = 1.0;
    CHECK((sp.Pi_C - avg).norm() < 1e-12);
    CHECK((sp.Pi_C + sp.Pi_C_perp - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-12);
    CHECK((sp.Pi_C * sp.Pi_C - sp.Pi_C).norm() < 1e-12);
    CHECK(sp.smoothing_ok);
    const auto& M = T.level(1).matrix;
    CHECK((sp.Pi_C_perp * M - M).norm() <= 1e-10 * M.norm());
    // T restricted to X composed with the pseudo-inverse is the identity on range(Pi_C_perp)
    Eigen::MatrixXd back = M * sp.X_projector * sp.pseudo_inverse * sp.Pi_C_perp;
    CHECK((back - sp.Pi_C_perp).norm() < 1e-8);

    auto inv = build_splittings(identity_operator(6, {0}), 0);
    CHECK(inv.kernel_basis.cols() == 0);
    CHECK(inv.C_basis.cols() == 0);
    CHECK(inv.Pi_C.norm() == 0.0);
    auto zero = build_splittings(zero_operator(4, {0}), 0);
    CHECK((zero.Pi_C - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-12);
    CHECK(principal_angle_sin(Eigen::MatrixXd::Identity(4, 2), Eigen::MatrixXd::Identity(4, 2)) < 1e-15);
}
