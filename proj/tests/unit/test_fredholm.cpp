#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cyl/fredholm_verify.hpp"

using namespace cyl;

namespace {

constexpr double kPi = std::numbers::pi;

PairField zeros(const CylinderGrid& g) { return {Field(g, 1), Field(g, 1)}; }

double max_abs(const PairField& p) { return std::max(cyl::max_abs(p[0]), cyl::max_abs(p[1])); }

PairField diff(const PairField& a, const PairField& b) { return {a[0] - b[0], a[1] - b[1]}; }

}  // namespace

TEST_CASE("norm helpers and probes") {
    auto g = grid_from_spacing(20, 0.1, 16);
    // exact exponentials give their rate back
    std::vector<double> x{1, 2, 3, 4}, y;
    for (double v : x) y.push_back(3.0 * std::exp(-0.7 * v));
    CHECK(fit_rate(x, y) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(fit_rate({1.0}, {1.0}) == kInfiniteRate);
    CHECK(fit_rate(x, {0.0, 0.0, 0.0, 0.0}) == kInfiniteRate);

    // C^1 norm of e^{-s^2} sin(2 pi t) is its t-derivative sup 2 pi
    Field f = sample_field(g, 1, [](double s, double t, int) { return cplx(std::exp(-s * s) * std::sin(2 * kPi * t)); });
    Window all{0, g.n_s - 1};
    CHECK(cm_norm(f, 0, all) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cm_norm(f, 1, all) == doctest::Approx(2 * kPi).epsilon(1e-6));

    // pair norm is the l2 sum of the slot norms on the windows
    Windows w = full_windows(g, 2);
    PairField p = {f, 2.0 * f};
    double one = weighted_norm(f, 1, 0.2);
    CHECK(pair_norm(p, 1, 0.2, w) == doctest::Approx(std::sqrt(5.0) * one).epsilon(1e-12));
    WeightSequence ws{{0.1, 0.2, 0.3}, 0.5};
    CHECK(E_norm(p, 1, ws, w) == doctest::Approx(pair_norm(p, 2, 0.2, w)));
    CHECK(F_norm(p, 1, ws, w) == doctest::Approx(pair_norm(p, 1, 0.2, w)));

    // random pairs live strictly inside their windows
    Windows narrow = {Window{20, 300}, Window{100, g.n_s - 1}};
    std::mt19937_64 rng(4);
    PairField r = random_pair(g, 1, narrow, rng);
    CHECK(max_abs(r) > 0.0);
    for (int a = 0; a < 2; ++a)
        for (int i = 0; i < g.n_s; ++i)
            if (i <= narrow[a].lo || i >= narrow[a].hi)
                for (int j = 0; j < g.n_t; ++j) CHECK(r[a](i, j) == cplx(0.0));
    // the same seed gives the same pair
    std::mt19937_64 again(4);
    CHECK(max_abs(diff(random_pair(g, 1, narrow, again), r)) == 0.0);

    // synthetic configurations decay at kappa
    Field d = decaying_configuration(g, 0.8, 1.0, 0.0);
    CHECK(decay_rate(d) == doctest::Approx(0.8).epsilon(0.02));
    std::vector<double> sx, sy;
    for (int i = g.center(); i < g.n_s; i += 20) sx.push_back(g.s(i)), sy.push_back(std::abs(d(i, 0)));
    CHECK(fit_rate(sx, sy) == doctest::Approx(0.8).epsilon(0.02));

    // rates of a two-sided exponential pair on windows
    PairField k = {sample_field(g, 1, [](double s, double, int) { return cplx(std::exp(-0.6 * std::abs(s))); }),
                   sample_field(g, 1, [](double s, double, int) { return cplx(std::exp(-0.9 * std::abs(s))); })};
    CHECK(kernel_decay_rate(k, w) == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(kernel_decay_rate(zeros(g), w) == kInfiniteRate);
}

TEST_CASE("continuity of the linearization in e") {
    auto g = grid_from_spacing(60, 0.5, 8);
    ContinuityOptions opt;
    opt.r_list = {0.0, neck_to_r(45)};
    opt.n_probes = 3;

    LinearModel lin(1.0);
    auto L = verify_iia(lin, zeros(g), 1, opt);
    REQUIRE(L.rows.size() == 6);
    for (const auto& row : L.rows) CHECK(row.ratio == 0.0);
    CHECK(L.bounded);

    // e = e'
    ContinuityOptions same = opt;
    same.sizes = {0.0};
    PerturbedModel pm(1.0, 0.05);
    for (const auto& row : verify_iia(pm, zeros(g), 1, same).rows) CHECK(row.ratio == 0.0);

    // linear in |e - e'|: the ratio does not move over a decade
    auto P = verify_iia(pm, zeros(g), 1, opt);
    CHECK(P.bounded);
    CHECK(P.fitted_constant > 0.0);
    for (std::size_t r = 0; r < 2; ++r) {
        double lo = 1e300, hi = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const auto& row = P.rows[3 * r + k];
            CHECK(std::isfinite(row.ratio));
            lo = std::min(lo, row.ratio), hi = std::max(hi, row.ratio);
        }
        CHECK(hi / lo < 1.3);
    }
    CHECK(P.rows[1].diff_norm == doctest::Approx(3e-3).epsilon(1e-9));
    CHECK(P.enriched_constant == doctest::Approx(P.fitted_constant).epsilon(0.2));
    CHECK_THROWS_AS(verify_iia(pm, zeros(g), 0, opt), std::invalid_argument);
}

TEST_CASE("convergence as the neck grows") {
    // wide enough that slot 1 holds the far copy gamma_2(s + 2R)
    auto g = grid_from_spacing(104, 0.5, 8);
    PerturbedModel pm(1.0, 0.05);
    PairField gamma = {decaying_configuration(g, 1.0, 0.8, 0.0), decaying_configuration(g, 1.0, 0.6, 1.0)};
    ConvergenceOptions opt;
    opt.necks = {43, 45, 47, 49};
    opt.n_probes = 4;
    auto T = verify_iib(pm, gamma, 1, opt);
    REQUIRE(T.rows.size() == 4);
    CHECK(T.far_copy_visible);
    CHECK(T.expected_rate == doctest::Approx(0.3));
    for (const auto& row : T.rows) {
        CHECK(row.s_inner == 0.0);
        CHECK(row.q_cutoff_norm == doctest::Approx(T.rows[0].q_cutoff_norm).epsilon(0.05));
        // the far copy keeps the literal norms at the size of gamma
        CHECK(row.gamma_minus_cm > 0.1);
        CHECK(row.q_coef_sup > 1e-2);
    }
    CHECK(std::abs(T.rate_gamma) < 0.05);
    CHECK(std::abs(T.rate_q_sup) < 0.05);
    // the converging pieces decay at the rate of the configuration
    CHECK(T.rate_gamma_seam == doctest::Approx(1.0).epsilon(0.05));
    CHECK(T.rate_block == doctest::Approx(1.0).epsilon(0.05));
    CHECK(T.rate_block_sup == doctest::Approx(1.0).epsilon(0.05));
    CHECK(T.rate_cutoff_fixed == doctest::Approx(0.8).epsilon(0.05));
    // m + 1 must have a weight
    CHECK_THROWS_AS(verify_iib(pm, gamma, 3, opt), std::invalid_argument);
}

TEST_CASE("index sweep and negative control") {
    LinearModel lin(1.0);
    auto g = grid_from_spacing(60, 0.5, 8);
    IndexSweepOptions opt;
    opt.necks = {45};
    auto S = index_vs_r(lin, zeros(g), opt);
    REQUIRE(S.rows.size() == 4);
    CHECK(S.stable);
    CHECK(S.trustworthy);
    CHECK(S.constituent_index == 0);
    for (const auto& row : S.rows) {
        CHECK(row.report.index == 0);
        CHECK(row.report.sv_gap > 10);
        CHECK(row.kernel_rates.empty());
    }

    // past the first eigenvalue the index drops by one complex crossing per slot
    auto gc = grid_from_spacing(50, 0.3, 8);
    IndexSweepOptions neg;
    neg.necks = {45};
    neg.levels = {0};
    neg.weights = WeightSequence{{1.5}, 2.0};
    auto N = index_vs_r(lin, zeros(gc), neg);
    REQUIRE(N.rows.size() == 2);
    CHECK(N.constituent_index == -4);
    CHECK(N.stable);
    for (const auto& row : N.rows) {
        CHECK(row.report.index == -4);
        CHECK(row.report.dim_ker == 0);
    }
}

TEST_CASE("germ normal form, contraction and Picard gluing") {
    auto g = grid_from_spacing(60, 0.5, 8);
    GermOptions opt;
    opt.n_probes = 3;

    LinearModel lin(1.0);
    auto G = build_germ_normal_form(lin, zeros(g), opt);
    CHECK(G.kernel_dim == 0);
    CHECK(G.cokernel_dim == 0);
    CHECK(G.G_check < 1e-8);
    CHECK(G.stability_constant > 0.0);
    CHECK(std::isfinite(G.stability_constant));
    REQUIRE(G.shape_fd.size() == 3);
    for (double q : G.shape_fd) CHECK(q < 1e-10);
    std::vector<double> v0(G.directions.size(), 0.0);
    // (A, w - B) at the origin is 0
    CHECK(max_abs(G.B(v0, zeros(g))) == 0.0);
    std::mt19937_64 rng(9);
    PairField w = random_pair(g, 1, G.windows, rng);
    std::vector<double> v{2e-3, -1e-3};
    CHECK(max_abs(diff(G.second_slot(v, w), diff(w, G.B(v, w)))) < 1e-14);

    auto C = estimate_contraction(G, {0.1, 0.05}, 4, 1);
    for (const auto& row : C.rows) CHECK(row.theta <= kThetaFloor);
    CHECK(C.below_one);
    CHECK(C.nonincreasing);

    auto P0 = picard_glue(G, v0);
    CHECK(P0.converged);
    CHECK(max_abs(P0.w) == 0.0);
    CHECK(P0.residual == 0.0);
    auto P = picard_glue(G, {1e-3, -5e-4});
    CHECK(P.converged);
    CHECK(P.residual < 1e-8);
    CHECK(P.iterations <= 3);

    PerturbedModel pm(1.0, 0.05);
    opt.level = 2;
    auto H = build_germ_normal_form(pm, zeros(g), opt);
    CHECK(H.shape_fd[1] / H.shape_fd[2] == doctest::Approx(10.0).epsilon(0.05));
    auto T = estimate_contraction(H, {0.1, 0.05, 0.025}, 4, 2);
    CHECK(T.below_one);
    CHECK(T.nonincreasing);
    CHECK(T.fit_error < 0.2);
    CHECK(T.rows[0].theta > 0.0);
    for (const auto& row : T.rows) CHECK(row.theta == std::max(row.theta_scan, row.theta_random));
    auto Q = picard_glue(H, {1e-3, -5e-4});
    CHECK(Q.converged);
    CHECK(Q.residual < 1e-8);
    REQUIRE(!Q.ratios.empty());
    // contraction estimate at the radius of the iterates
    auto at = estimate_contraction(H, {2e-3}, 4, 2);
    for (double q : Q.ratios) CHECK(q <= at.rows[0].theta);

    // a strong nonlinearity beyond the contraction radius aborts
    PerturbedModel strong(1.0, 3.0);
    opt.level = 1;
    auto S = build_germ_normal_form(strong, zeros(g), opt);
    auto A = picard_glue(S, {1.0, 0.5});
    CHECK(A.aborted);
    CHECK_FALSE(A.converged);
    CHECK(A.diagnostic.find("non-contraction") != std::string::npos);

    opt.level = 0;
    CHECK_THROWS_AS(build_germ_normal_form(lin, zeros(g), opt), std::invalid_argument);
}
