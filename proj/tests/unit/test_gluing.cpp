#include "doctest.h"

#include <cmath>
#include <random>

#include "cyl/gluing.hpp"

using namespace cyl;

namespace {

Field bump(const CylinderGrid& g, double center, double width, int k, double amp) {
    return sample_field(g, 1, [&](double s, double t, int) {
        double x = (s - center) / width;
        return amp * std::exp(-x * x) * std::polar(1.0, 2.0 * M_PI * k * t);
    });
}

Field decaying(const CylinderGrid& g, double kappa, double amp, double phase) {
    return sample_field(g, 1, [&](double s, double t, int) {
        double e = std::exp(-kappa * std::sqrt(1.0 + s * s));
        return amp * e * (cplx(1.0, 0.4) + 0.3 * std::polar(1.0, 2.0 * M_PI * t + phase));
    });
}

}  // namespace

TEST_CASE("profile: r to R and hard neck bound") {
    auto g = make_grid(80.0, 1601, 8);
    auto p = make_profile(g, 0.25);
    CHECK(p.R_exact == doctest::Approx(std::exp(4.0)));
    CHECK(std::abs(p.R - p.R_exact) <= 0.5 * g.h_s() + 1e-12);
    int steps = 0;
    CHECK(is_grid_multiple(g, p.R, &steps));
    CHECK(steps == p.steps);
    CHECK_THROWS_AS(make_profile(g, 0.3), GridError);
    CHECK_FALSE(make_profile(g, 0.0).glued());
    CHECK_THROWS_AS(check_margin(make_grid(50.0, 1001, 8), p), GridError);
}

TEST_CASE("preglue of constants and of a single slot") {
    auto g = make_grid(80.0, 1601, 8);
    auto p = make_profile(g, 0.25);
    Field c = sample_field(g, 1, [](double, double, int) { return cplx(0.7, -0.2); });
    Field u = preglue(p, {c, c});
    // the constant survives wherever both shifted copies are on the grid
    for (int i = 0; i < g.n_s; ++i) {
        double s = g.s(i);
        if (std::abs(s) > g.s_max - p.R) continue;
        CHECK(std::abs(u(i, 3) - c(i, 3)) < 1e-14);
    }
    Field a = antiglue(p, {c, c});
    for (int i = 0; i < g.n_s; i += 37) {
        double s = g.s(i);
        if (std::abs(s) > g.s_max - p.R) continue;
        CHECK(std::abs(a(i, 1) - (1.0 - 2.0 * cutoff_beta(s)) * c(i, 1)) < 1e-14);
    }
}

TEST_CASE("preglue pointwise against the direct formula") {
    auto g = make_grid(80.0, 1601, 8);
    auto p = make_profile(g, 0.25);
    Field x1 = bump(g, -p.R, 2.0, 1, 1.0);  // sits at s = 0 after translation
    Field x2 = bump(g, p.R + 0.5, 1.5, 0, 0.5);
    Field u = preglue(p, {x1, x2});
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> pick(0, g.n_s - 1);
    for (int k = 0; k < 10; ++k) {
        int i = pick(rng);
        double s = g.s(i), b = cutoff_beta(s);
        double y1 = (s - p.R + p.R) / 2.0, y2 = (s + p.R - p.R - 0.5) / 1.5;
        cplx expect = b * std::exp(-y1 * y1) * std::polar(1.0, 2.0 * M_PI * g.t(2)) +
                      (1.0 - b) * 0.5 * std::exp(-y2 * y2);
        bool in1 = s - p.R >= -g.s_max, in2 = s + p.R <= g.s_max;
        if (!in1) expect -= b * std::exp(-y1 * y1) * std::polar(1.0, 2.0 * M_PI * g.t(2));
        if (!in2) expect -= (1.0 - b) * 0.5 * std::exp(-y2 * y2);
        CHECK(std::abs(u(i, 2) - expect) < 1e-10);
    }
}

TEST_CASE("gluing identities and splicing projection") {
    auto g = make_grid(80.0, 1601, 8);
    for (double R : {45.0, 55.0, 70.0}) {
        auto p = profile_for_neck(g, R);
        std::mt19937 rng(11);
        std::normal_distribution<double> N;
        auto rnd = [&] {
            Field f(g, 1);
            for (auto& z : f.data) z = cplx(N(rng), N(rng));
            return f;
        };
        PairField xi = {rnd(), rnd()}, zeta = {rnd(), rnd()};
        auto rep = gluing_identities(p, xi, zeta);
        CHECK(rep.forward_error < 1e-12);
        CHECK(rep.backward_error < 1e-12);
        PairField pr = splicing_projection(p, xi);
        PairField pr2 = splicing_projection(p, pr);
        CHECK(max_abs_diff(pr[0], pr2[0]) < 1e-12);
        CHECK(max_abs_diff(pr[1], pr2[1]) < 1e-12);
        CHECK(splicing_membership(p, pr) < 1e-12);
        // zeta_minus = 0 lands in the kernel of antiglue
        PairField k = glue_inverse(p, zeta[0], Field(g, 1));
        CHECK(splicing_membership(p, k) < 1e-12);
    }
    auto p0 = make_profile(g, 0.0);
    Field a(g, 1);
    a(3, 3) = 1.0;
    CHECK(max_abs(antiglue(p0, {a, a})) == 0.0);
    CHECK(max_abs_diff(splicing_projection(p0, {a, a})[0], a) == 0.0);
}

TEST_CASE("DPhi matches finite differences of the filled section") {
    auto g = make_grid(60.0, 481, 8);
    auto p = profile_for_neck(g, 45.0);
    TwistedModel M(1.0, 0.3);
    PairField gamma = {decaying(g, 0.5, 0.8, 0.0), decaying(g, 0.5, 0.6, 1.0)};
    PairField e = {bump(g, 1.0, 3.0, 1, 0.2), bump(g, -2.0, 3.0, 0, 0.1)};
    FieldOperator D = assemble_DPhi(M, gamma, p, e);
    Windows w = glue_windows(g, p);
    std::mt19937 rng(3);
    std::normal_distribution<double> N;
    PairField base = filled_section(M, gamma, p, e);
    std::vector<double> errs;
    for (double h : {1e-3, 1e-4}) {
        double worst = 0.0;
        for (int trial = 0; trial < 3; ++trial) {
            PairField xi = {bump(g, N(rng) * 5, 2.0, trial, 1.0), bump(g, N(rng) * 5, 2.0, 1 - trial % 2, 1.0)};
            PairField ep = {e[0] + h * xi[0], e[1] + h * xi[1]};
            PairField fd = filled_section(M, gamma, p, ep);
            PairField lin = mask_to_windows(D.apply(xi), w);
            for (int a = 0; a < 2; ++a) {
                Field diff = (1.0 / h) * (fd[a] - base[a]);
                worst = std::max(worst, max_abs_diff(diff, lin[a]));
            }
        }
        errs.push_back(worst);
    }
    CHECK(errs[0] < 1e-2);
    CHECK(errs[0] / errs[1] > 7.0);
    CHECK(errs[0] / errs[1] < 13.0);
}

TEST_CASE("error decomposition reassembles DPhi") {
    auto g = make_grid(60.0, 481, 8);
    for (double R : {45.0, 50.0}) {
        auto p = profile_for_neck(g, R);
        PairField gamma = {decaying(g, 0.5, 0.8, 0.0), decaying(g, 0.5, 0.6, 1.0)};
        TwistedModel T(1.0, 0.3);
        PerturbedModel P(1.0, 0.05);
        for (const HamiltonianModel* M : {static_cast<const HamiltonianModel*>(&T), static_cast<const HamiltonianModel*>(&P)}) {
            auto rep = reassembly_check(*M, gamma, p);
            INFO(rep.where);
            CHECK(rep.max_discrepancy < 1e-10);
            CHECK(rep.s1_outside == 0.0);
            CHECK(rep.s2_outside == 0.0);
        }
    }
}

TEST_CASE("linear model: J-difference terms of Q vanish") {
    auto g = make_grid(60.0, 481, 8);
    auto p = profile_for_neck(g, 45.0);
    LinearModel M(1.0);
    PairField gamma = {decaying(g, 0.5, 0.8, 0.0), decaying(g, 0.5, 0.6, 1.0)};
    auto d = decompose_errors(M, gamma, p);
    CHECK(max_coef(d.Q_coef, 0, 0) < 1e-15);
    CHECK(max_coef(d.Q_coef, 1, 1) < 1e-15);
    // the S blocks reduce to the cutoff derivative
    const OpTerm* st = d.S.find(0, 1, Deriv::Dt, 2 * p.steps);
    REQUIRE(st != nullptr);
    double m = 0.0;
    for (double v : st->coef) m = std::max(m, std::abs(v));
    CHECK(m < 1e-15);
}
