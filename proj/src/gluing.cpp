#include "cyl/gluing.hpp"

#include <cmath>
#include <sstream>

namespace cyl {

namespace {

double r_limit() { return 1.0 / std::log(kMinNeck); }

std::string num(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

void require_glued(const GluingProfile& p, const char* what) {
    if (!p.glued()) throw std::invalid_argument(std::string(what) + " needs r > 0");
}

template <class C, class D>
MultTerm make_term(const CylinderGrid& g, const GluingProfile& p, int out, int in, int sign, C&& c, D&& dc) {
    MultTerm t;
    t.out_slot = out;
    t.in_slot = in;
    t.shift = sign * p.steps;
    t.shift_len = sign * p.R;
    t.c.resize(std::size_t(g.n_s));
    t.dc.resize(std::size_t(g.n_s));
    for (int i = 0; i < g.n_s; ++i) {
        t.c[i] = c(g.s(i));
        t.dc[i] = dc(g.s(i));
    }
    return t;
}

Multiplier base_multiplier(const CylinderGrid& g, const GluingProfile& p, int n_out, int n_in) {
    require_glued(p, "gluing map");
    Multiplier M;
    M.grid = g;
    M.n_out = n_out;
    M.n_in = n_in;
    M.snapped = p.snapped;
    return M;
}

double denom(double b) { return b * b + (1.0 - b) * (1.0 - b); }

// beta / D and (1 - beta) / D with their derivatives
double inv_p(double s) { return cutoff_beta(s) / denom(cutoff_beta(s)); }
double inv_q(double s) { return (1.0 - cutoff_beta(s)) / denom(cutoff_beta(s)); }
double inv_p_ds(double s) {
    double b = cutoff_beta(s), db = cutoff_beta_ds(s), D = denom(b), dD = 2.0 * db * (2.0 * b - 1.0);
    return (db * D - b * dD) / (D * D);
}
double inv_q_ds(double s) {
    double b = cutoff_beta(s), db = cutoff_beta_ds(s), D = denom(b), dD = 2.0 * db * (2.0 * b - 1.0);
    return (-db * D - (1.0 - b) * dD) / (D * D);
}

}  // namespace

double neck_to_r(double R) {
    if (!(R > kMinNeck)) throw GridError("neck length R = " + num(R) + " must exceed 42");
    return 1.0 / std::log(R);
}

GluingProfile make_profile(const CylinderGrid& g, double r, bool snap) {
    GluingProfile p;
    if (r == 0.0) return p;
    if (!(r > 0.0 && r < r_limit()))
        throw GridError("gluing parameter r = " + num(r) + " outside [0, 1/ln 42) = [0, " + num(r_limit()) + ")");
    p.r = r;
    p.R_exact = std::exp(1.0 / r);
    p.snapped = snap;
    const double h = g.h_s();
    if (snap) {
        p.steps = int(std::lround(p.R_exact / h));
        p.R = p.steps * h;
        if (!(p.R > kMinNeck))
            throw GridError("snapped neck length " + num(p.R) + " is not above 42; refine the s-grid");
    } else {
        p.R = p.R_exact;
        p.steps = int(std::ceil(p.R / h - 1e-9));
    }
    return p;
}

GluingProfile profile_for_neck(const CylinderGrid& g, double R, bool snap) { return make_profile(g, neck_to_r(R), snap); }

double required_s_max(double R, double extra) { return R + 1.0 + extra; }

void check_margin(const CylinderGrid& g, const GluingProfile& p, double extra) {
    if (!p.glued()) return;
    double need = required_s_max(p.R, extra);
    if (g.s_max < need - 1e-12)
        throw GridError("truncation margin violated: s_max = " + num(g.s_max) + " but R = " + num(p.R) +
                        " needs s_max >= " + num(need));
}

Windows glue_windows(const CylinderGrid& g, const GluingProfile& p) {
    if (!p.glued()) return full_windows(g, 2);
    if (p.steps >= g.n_s - 8) throw GridError("neck longer than the grid");
    return {Window{0, g.n_s - 1 - p.steps}, Window{p.steps, g.n_s - 1}};
}

Multiplier preglue_multiplier(const CylinderGrid& g, const GluingProfile& p) {
    Multiplier M = base_multiplier(g, p, 1, 2);
    M.terms.push_back(make_term(g, p, 0, 0, -1, cutoff_beta, cutoff_beta_ds));
    M.terms.push_back(make_term(
        g, p, 0, 1, +1, [](double s) { return 1.0 - cutoff_beta(s); }, [](double s) { return -cutoff_beta_ds(s); }));
    return M;
}

Multiplier antiglue_multiplier(const CylinderGrid& g, const GluingProfile& p) {
    Multiplier M = base_multiplier(g, p, 1, 2);
    M.terms.push_back(make_term(
        g, p, 0, 0, -1, [](double s) { return 1.0 - cutoff_beta(s); }, [](double s) { return -cutoff_beta_ds(s); }));
    M.terms.push_back(make_term(
        g, p, 0, 1, +1, [](double s) { return -cutoff_beta(s); }, [](double s) { return -cutoff_beta_ds(s); }));
    return M;
}

Multiplier inverse_multiplier(const CylinderGrid& g, const GluingProfile& p) {
    Multiplier M = base_multiplier(g, p, 2, 2);
    const double R = p.R;
    M.terms.push_back(make_term(
        g, p, 0, 0, +1, [R](double s) { return inv_p(s + R); }, [R](double s) { return inv_p_ds(s + R); }));
    M.terms.push_back(make_term(
        g, p, 0, 1, +1, [R](double s) { return inv_q(s + R); }, [R](double s) { return inv_q_ds(s + R); }));
    M.terms.push_back(make_term(
        g, p, 1, 0, -1, [R](double s) { return inv_q(s - R); }, [R](double s) { return inv_q_ds(s - R); }));
    M.terms.push_back(make_term(
        g, p, 1, 1, -1, [R](double s) { return -inv_p(s - R); }, [R](double s) { return -inv_p_ds(s - R); }));
    return M;
}

namespace {

void check_pair(const PairField& xi) {
    if (xi.size() != 2 || !same_shape(xi[0], xi[1])) throw std::invalid_argument("pair fields must share grid and dim");
}

}  // namespace

Field preglue(const GluingProfile& p, const PairField& xi) {
    check_pair(xi);
    return apply_multiplier(preglue_multiplier(xi[0].grid, p), xi)[0];
}

Field antiglue(const GluingProfile& p, const PairField& xi) {
    check_pair(xi);
    if (!p.glued()) return Field(xi[0].grid, xi[0].dim);
    return apply_multiplier(antiglue_multiplier(xi[0].grid, p), xi)[0];
}

GluedField preglue_with_ds(const GluingProfile& p, const PairField& xi) {
    check_pair(xi);
    Multiplier M = preglue_multiplier(xi[0].grid, p);
    return {apply_multiplier(M, xi)[0], apply_multiplier_ds(M, xi, {diff_s(xi[0]), diff_s(xi[1])})[0]};
}

GluedField antiglue_with_ds(const GluingProfile& p, const PairField& xi) {
    check_pair(xi);
    if (!p.glued()) return {Field(xi[0].grid, xi[0].dim), Field(xi[0].grid, xi[0].dim)};
    Multiplier M = antiglue_multiplier(xi[0].grid, p);
    return {apply_multiplier(M, xi)[0], apply_multiplier_ds(M, xi, {diff_s(xi[0]), diff_s(xi[1])})[0]};
}

PairField glue_inverse(const GluingProfile& p, const Field& zp, const Field& zm) {
    if (!same_shape(zp, zm)) throw std::invalid_argument("glue_inverse: shape mismatch");
    const auto& g = zp.grid;
    return mask_to_windows(apply_multiplier(inverse_multiplier(g, p), {zp, zm}), glue_windows(g, p));
}

PairField splicing_projection(const GluingProfile& p, const PairField& xi) {
    check_pair(xi);
    if (!p.glued()) return xi;
    return glue_inverse(p, preglue(p, xi), Field(xi[0].grid, xi[0].dim));
}

double splicing_membership(const GluingProfile& p, const PairField& xi) {
    if (!p.glued()) return 0.0;
    return max_abs(antiglue(p, xi));
}

GluingIdentityReport gluing_identities(const GluingProfile& p, const PairField& xi, const PairField& zeta) {
    require_glued(p, "gluing identities");
    check_pair(xi);
    check_pair(zeta);
    GluingIdentityReport rep;
    const auto& g = xi[0].grid;
    Windows w = glue_windows(g, p);
    PairField back = glue_inverse(p, preglue(p, xi), antiglue(p, xi));
    PairField xi_w = mask_to_windows(xi, w);
    rep.forward_error = std::max(max_abs_diff(back[0], xi_w[0]), max_abs_diff(back[1], xi_w[1]));
    // the glued pair is only represented on |s| <= s_max - R: beyond that
    // the anti-glued field reads a slot outside the truncated cylinder
    PairField inv = glue_inverse(p, zeta[0], zeta[1]);
    Window mid{g.n_s - 1 - w[0].hi, w[0].hi};
    PairField fwd = mask_to_windows({preglue(p, inv), antiglue(p, inv)}, {mid, mid});
    PairField zeta_w = mask_to_windows(zeta, {mid, mid});
    rep.backward_error = std::max(max_abs_diff(fwd[0], zeta_w[0]), max_abs_diff(fwd[1], zeta_w[1]));
    return rep;
}

PairField glued_constituents(const GluingProfile& p, const PairField& gamma) {
    check_pair(gamma);
    if (!p.glued()) return gamma;
    Field u = preglue(p, gamma);
    if (p.snapped) return {shift_steps(u, p.steps), shift_steps(u, -p.steps)};
    return {shift_field(u, p.R), shift_field(u, -p.R)};
}

namespace {

Field linear_at_zero(const HamiltonianModel& M, const Field& v, const Field& v_s) {
    const int n = v.dim;
    Vec zero = Vec::Zero(2 * n);
    Mat J0 = M.J(zero), Z0 = zero_order_coef(M, zero, zero, LinVariant::Full);
    Field vt = diff_t(v);
    Field out(v.grid, n);
    for (std::size_t o = 0; o < v.size(); o += std::size_t(n)) {
        Vec x = realify(&v.data[o], n), xs = realify(&v_s.data[o], n), xt = realify(&vt.data[o], n);
        Vec r = xs + J0 * xt + Z0 * x;
        complexify(r, &out.data[o]);
    }
    return out;
}

}  // namespace

PairField filled_section(const HamiltonianModel& M, const PairField& gamma, const GluingProfile& p,
                         const PairField& xi) {
    check_pair(gamma);
    check_pair(xi);
    PairField ge = {gamma[0] + xi[0], gamma[1] + xi[1]};
    if (!p.glued()) return {floer_residual(M, ge[0]), floer_residual(M, ge[1])};
    GluedField u = preglue_with_ds(p, ge);
    GluedField v = antiglue_with_ds(p, xi);
    Field zp = floer_residual(M, u.value, u.ds);
    Field zm = linear_at_zero(M, v.value, v.ds);
    return glue_inverse(p, zp, zm);
}

FieldOperator assemble_DPhi(const HamiltonianModel& M, const PairField& gamma, const GluingProfile& p,
                            const PairField& e, LinVariant v) {
    check_pair(gamma);
    check_pair(e);
    PairField ge = {gamma[0] + e[0], gamma[1] + e[1]};
    if (!p.glued()) return block_diag(linearize_cr(M, ge[0], v), linearize_cr(M, ge[1], v));
    const auto& g = gamma[0].grid;
    Field u = preglue(p, ge);
    FieldOperator inner = block_diag(linearize_cr(M, u, v), linearize_cr(M, Field(g, u.dim), v));
    Multiplier PA = stack(preglue_multiplier(g, p), antiglue_multiplier(g, p));
    return compose(inverse_multiplier(g, p), compose(inner, PA));
}

ErrorDecomposition decompose_errors(const HamiltonianModel& M, const PairField& gamma, const GluingProfile& p) {
    require_glued(p, "decompose_errors");
    if (!p.snapped) throw std::invalid_argument("decompose_errors needs a snapped neck length");
    check_pair(gamma);
    const auto& g = gamma[0].grid;
    const int n = gamma[0].dim, nn = 2 * n;
    ErrorDecomposition d;
    d.windows = glue_windows(g, p);
    PairField gr = glued_constituents(p, gamma);
    d.diag = block_diag(linearize_cr(M, gr[0]), linearize_cr(M, gr[1]));
    d.Q_cutoff = empty_operator(g, n, 2, 2);
    d.Q_coef = empty_operator(g, n, 2, 2);
    d.S = empty_operator(g, n, 2, 2);
    const double R = p.R;
    d.seam1_lo = -R - 1.0;
    d.seam1_hi = -R + 1.0;
    d.seam2_lo = R - 1.0;
    d.seam2_hi = R + 1.0;

    Vec zero = Vec::Zero(nn);
    const Mat J0 = M.J(zero), Z0 = zero_order_coef(M, zero, zero, LinVariant::Full);
    const Mat I = Mat::Identity(nn, nn);

    for (int slot = 0; slot < 2; ++slot) {
        const int other = 1 - slot;
        const int sshift = slot == 0 ? 2 * p.steps : -2 * p.steps;
        // create all terms before taking references
        d.Q_cutoff.term(slot, slot, Deriv::Id, 0);
        d.Q_coef.term(slot, slot, Deriv::Id, 0);
        d.Q_coef.term(slot, slot, Deriv::Dt, 0);
        d.S.term(slot, other, Deriv::Id, sshift);
        d.S.term(slot, other, Deriv::Dt, sshift);
    }
    const Field gt0 = diff_t(gr[0]), gt1 = diff_t(gr[1]);
    for (int slot = 0; slot < 2; ++slot) {
        const int other = 1 - slot;
        const int sshift = slot == 0 ? 2 * p.steps : -2 * p.steps;
        auto& Qc = d.Q_cutoff.term(slot, slot, Deriv::Id, 0).coef;
        auto& Qi = d.Q_coef.term(slot, slot, Deriv::Id, 0).coef;
        auto& Qt = d.Q_coef.term(slot, slot, Deriv::Dt, 0).coef;
        auto& Si = d.S.term(slot, other, Deriv::Id, sshift).coef;
        auto& St = d.S.term(slot, other, Deriv::Dt, sshift).coef;
        const Field& base = gr[slot];
        const Field& bt = slot == 0 ? gt0 : gt1;
        const Window w = d.windows[slot];
        for (int i = w.lo; i <= w.hi; ++i) {
            const double s = g.s(i);
            // slot 1 sees b = beta(s + R), slot 2 sees c = beta(s - R)
            const double x = slot == 0 ? s + R : s - R;
            const double b = cutoff_beta(x), db = cutoff_beta_ds(x), D = denom(b);
            const double cut = (2.0 * b - 1.0) * db / D;
            const double wdiag = slot == 0 ? (1.0 - b) * (1.0 - b) / D : b * b / D;
            const double wmix = b * (1.0 - b) / D;
            const double sderiv = slot == 0 ? db / D : -db / D;
            for (int j = 0; j < g.n_t; ++j) {
                const std::size_t o = base.idx(i, j), q = d.Q_coef.pidx(i, j);
                Vec z = realify(&base.data[o], n), zt = realify(&bt.data[o], n);
                Mat Jg = M.J(z), Zg = zero_order_coef(M, z, zt, LinVariant::Full);
                Mat qi = wdiag * (Z0 - Zg), qt = wdiag * (J0 - Jg);
                Mat si = sderiv * I - wmix * (Zg - Z0), st = -wmix * (Jg - J0);
                for (int r = 0; r < nn; ++r)
                    for (int c = 0; c < nn; ++c) {
                        const std::size_t k = q + std::size_t(r * nn + c);
                        Qc[k] = r == c ? cut : 0.0;
                        Qi[k] = qi(r, c);
                        Qt[k] = qt(r, c);
                        Si[k] = si(r, c);
                        St[k] = st(r, c);
                    }
            }
        }
    }
    d.Q = sum(d.Q_cutoff, d.Q_coef);
    return d;
}

FieldOperator reassemble(const ErrorDecomposition& d) { return sum(sum(d.diag, d.Q), d.S, -1.0); }

ReassemblyReport reassembly_check(const HamiltonianModel& M, const PairField& gamma, const GluingProfile& p) {
    ErrorDecomposition d = decompose_errors(M, gamma, p);
    const auto& g = gamma[0].grid;
    PairField zero = {Field(g, gamma[0].dim), Field(g, gamma[0].dim)};
    FieldOperator A = assemble_DPhi(M, gamma, p, zero);
    CoefDiff cd = coefficient_discrepancy(A, reassemble(d), d.windows);
    ReassemblyReport rep;
    rep.max_discrepancy = cd.max_diff;
    rep.where = cd.where;
    rep.s1_outside = max_coef_outside(d.S, 0, 1, d.seam1_lo, d.seam1_hi);
    rep.s2_outside = max_coef_outside(d.S, 1, 0, d.seam2_lo, d.seam2_hi);
    return rep;
}

}  // namespace cyl
