#include "doctest.h"

#include <cmath>

#include "cyl/gluing.hpp"
#include "cyl/index.hpp"

using namespace cyl;

namespace {

PairField zero_pair(const CylinderGrid& g) { return {Field(g, 1), Field(g, 1)}; }

}  // namespace

TEST_CASE("1D crossing has index +1 per complex dimension") {
    auto g = grid_from_spacing(20.0, 0.25, 4);
    FieldOperator L = kink_operator(g);
    IndexOptions opt;
    opt.delta = 0.2;
    opt.want_kernel = true;
    auto res = box_index(L, full_windows(g, 1), opt);
    CHECK(res.path == "fourier");
    CHECK(res.report.index == 2);
    CHECK(res.report.dim_ker == 2);
    CHECK(res.report.dim_coker == 0);
    CHECK(res.report.trustworthy);
    REQUIRE(res.kernel.size() == 2);
    // kernel is exp(-log cosh s): decays at rate 1
    double rate = decay_rate(res.kernel[0][0]);
    CHECK(rate == doctest::Approx(1.0).epsilon(0.05));
    auto sf = operator_spectral_flow(L, 0, Window{0, g.n_s - 1}, 0.2);
    CHECK(sf.flow == 2);
    // reversed path
    auto rev = spectral_flow([&](double s) { return asymptotic_operator(L, 0, g.n_s - 1 - int(std::lround((s + g.s_max) / g.h_s())), 0.2); },
                             [&] {
                                 std::vector<double> s;
                                 for (int i = 0; i < g.n_s; ++i) s.push_back(g.s(i));
                                 return s;
                             }());
    CHECK(rev.flow == -2);
}

TEST_CASE("linear model index at r = 0 and r > 0") {
    auto g = grid_from_spacing(60.0, 0.5, 8);
    LinearModel M(1.0);
    for (int level : {0, 1}) {
        IndexOptions opt;
        opt.delta = level == 0 ? 0.1 : 0.2;
        opt.level = level;
        auto p0 = make_profile(g, 0.0);
        auto D0 = assemble_DPhi(M, zero_pair(g), p0, zero_pair(g));
        auto r0 = box_index(D0, glue_windows(g, p0), opt);
        CHECK(r0.report.index == 0);
        CHECK(r0.report.dim_ker == 0);
        CHECK(r0.report.trustworthy);
        auto p = profile_for_neck(g, 45.0);
        auto D = assemble_DPhi(M, zero_pair(g), p, zero_pair(g));
        auto r1 = box_index(D, glue_windows(g, p), opt);
        INFO(r1.report.diagnostic);
        CHECK(r1.report.index == 0);
        CHECK(r1.report.trustworthy);
        CHECK(spectral_flow_index(M, Field(g, 1), opt.delta) == 0);
    }
    // weight past the first eigenvalue
    IndexOptions bad;
    bad.delta = 1.5;
    auto p0 = make_profile(g, 0.0);
    auto D0 = assemble_DPhi(M, zero_pair(g), p0, zero_pair(g));
    auto r0 = box_index(D0, glue_windows(g, p0), bad);
    CHECK(r0.report.index == -4);
    CHECK(2 * spectral_flow_index(M, Field(g, 1), 1.5) == -4);
    auto p = profile_for_neck(g, 45.0);
    auto D = assemble_DPhi(M, zero_pair(g), p, zero_pair(g));
    CHECK(box_index(D, glue_windows(g, p), bad).report.index == -4);
}

TEST_CASE("general path agrees with the Fourier path") {
    auto g = grid_from_spacing(12.0, 0.5, 4);
    FieldOperator L = kink_operator(g);
    // a tiny t-dependent perturbation forces the dense path
    auto& C = L.term(0, 0, Deriv::Id, 0).coef;
    for (int i = 0; i < g.n_s; ++i) C[L.pidx(i, 1) + 1] += 1e-3 * std::exp(-g.s(i) * g.s(i));
    IndexOptions opt;
    opt.delta = 0.2;
    auto res = box_index(L, full_windows(g, 1), opt);
    CHECK(res.path == "dense");
    CHECK(res.report.index == 2);
    CHECK(res.report.trustworthy);
}
