#include "cyl/fredholm_verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace cyl {

namespace {

constexpr double kPi = std::numbers::pi;

SMask window_mask(const CylinderGrid& g, const Window& w) {
    const double lo = g.s(w.lo) - 0.5 * g.h_s(), hi = g.s(w.hi) + 0.5 * g.h_s();
    return [lo, hi](double s) { return s > lo && s < hi; };
}

void require_level(int m, const WeightSequence& ws, int extra, const char* what) {
    if (m < 1) throw std::invalid_argument(std::string(what) + ": level m must be at least 1 (m = 0 is excluded)");
    if (m + extra >= ws.levels())
        throw std::invalid_argument(std::string(what) + ": weight sequence too short for level " + std::to_string(m));
}

PairField zero_pair(const CylinderGrid& g, int dim) { return {Field(g, dim), Field(g, dim)}; }

PairField add(const PairField& a, const PairField& b, double sb = 1.0) {
    PairField out = a;
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t q = 0; q < a[k].size(); ++q) out[k].data[q] += sb * b[k].data[q];
    return out;
}

PairField scaled(const PairField& a, double c) {
    PairField out = a;
    for (auto& f : out) f *= c;
    return out;
}

GluingProfile profile_for_r(const CylinderGrid& g, double r) {
    return r > 0.0 ? make_profile(g, r) : make_profile(g, 0.0);
}

Windows windows_for(const CylinderGrid& g, const GluingProfile& p) {
    return p.glued() ? glue_windows(g, p) : full_windows(g, 2);
}

// pair whose slot a carries a Gaussian bump centered at c (slot coordinates)
PairField bump_pair(const CylinderGrid& g, int dim, int slot, double c, double width, int mode) {
    PairField out = zero_pair(g, dim);
    out[slot] = sample_field(g, dim, [=](double s, double t, int k) {
        double x = (s - c) / width;
        return std::exp(-x * x) * std::polar(1.0, 2 * kPi * mode * t + 0.7 * k);
    });
    return out;
}

// compactly supported bump, zero for |s - c| >= half
Field compact_bump(const CylinderGrid& g, int dim, double c, double half) {
    return sample_field(g, dim, [=](double s, double t, int) {
        double x = (s - c) / half;
        if (std::abs(x) >= 1.0) return cplx(0.0);
        return std::exp(1.0 - 1.0 / (1.0 - x * x)) * cplx(1.0 + 0.5 * std::cos(2 * kPi * t), 0.3);
    });
}

double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

// ---- norms and probes ------------------------------------------------------

double pair_norm(const PairField& f, int k, double delta, const Windows& w) {
    if (f.size() != w.size()) throw std::invalid_argument("pair_norm: slot count mismatch");
    double sq = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a) {
        double n = weighted_norm(f[a], k, delta, window_mask(f[a].grid, w[a]));
        sq += n * n;
    }
    return std::sqrt(sq);
}

double E_norm(const PairField& f, int m, const WeightSequence& ws, const Windows& w) {
    return pair_norm(f, m + 1, ws[m], w);
}

double F_norm(const PairField& f, int m, const WeightSequence& ws, const Windows& w) {
    return pair_norm(f, m, ws[m], w);
}

double cm_norm(const Field& f, int m, const Window& w) {
    double best = 0.0;
    for (int a = 0; a <= m; ++a) {
        Field ds = diff_s(f, a);
        for (int b = 0; a + b <= m; ++b) {
            Field d = b == 0 ? ds : diff_t(ds, b);
            for (int i = w.lo; i <= w.hi; ++i)
                for (std::size_t q = 0; q < d.slice(); ++q)
                    best = std::max(best, std::abs(d.data[std::size_t(i) * d.slice() + q]));
        }
    }
    return best;
}

Field decaying_configuration(const CylinderGrid& g, double kappa, double amp, double phase, int dim) {
    return sample_field(g, dim, [=](double s, double t, int c) {
        double e = std::exp(-kappa * std::sqrt(1.0 + s * s));
        return amp * e * (cplx(1.0, 0.4) + 0.3 * std::polar(1.0, 2 * kPi * t + phase + c));
    });
}

PairField random_pair(const CylinderGrid& g, int dim, const Windows& w, std::mt19937_64& rng, double span,
                      double pad) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> uw(1.0, 3.0);
    PairField out = zero_pair(g, dim);
    for (std::size_t a = 0; a < w.size(); ++a) {
        double lo = std::max(g.s(w[a].lo) + pad, -span), hi = std::min(g.s(w[a].hi) - pad, span);
        if (hi < lo) lo = hi = 0.5 * (g.s(w[a].lo) + g.s(w[a].hi));
        std::uniform_real_distribution<double> uc(lo, hi);
        for (int bump = 0; bump < 2; ++bump) {
            const double c = uc(rng), width = uw(rng);
            const int mode = std::array<int, 4>{0, 0, 1, 2}[rng() % 4];
            cplx amp[2] = {cplx(nd(rng), nd(rng)), cplx(nd(rng), nd(rng))};
            for (int i = w[a].lo + 1; i < w[a].hi; ++i) {
                double x = (g.s(i) - c) / width, env = std::exp(-x * x);
                if (env < 1e-300) continue;
                for (int j = 0; j < g.n_t; ++j)
                    for (int k = 0; k < dim; ++k)
                        out[a](i, j, k) += env * amp[k % 2] * std::polar(1.0, 2 * kPi * mode * g.t(j));
            }
        }
    }
    return out;
}

double fit_rate(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> xs, ls;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
        if (y[i] > 0.0 && std::isfinite(y[i])) xs.push_back(x[i]), ls.push_back(std::log(y[i]));
    if (xs.size() < 2) return kInfiniteRate;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ls[i];
    mx /= double(xs.size());
    my /= double(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ls[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
    return sxx > 0 ? -sxy / sxx : kInfiniteRate;
}

// ---- continuity in e ------------------------------------------------------

namespace {

struct IiaCell {
    std::vector<ContinuityRow> rows;
};

IiaCell continuity_cell(const HamiltonianModel& M, const PairField& gamma, int m, const ContinuityOptions& opt,
                        int n_probes, std::uint64_t seed) {
    const auto& g = gamma[0].grid;
    const int n = gamma[0].dim;
    std::mt19937_64 rng(seed);
    IiaCell cell;
    for (double r : opt.r_list) {
        GluingProfile p = profile_for_r(g, r);
        Windows w = windows_for(g, p);
        // base point and direction near the slot centers, where the pieces of
        // the configuration interact with the probes
        PairField e = random_pair(g, n, w, rng, 8.0);
        e = scaled(e, opt.base_size / E_norm(e, m, opt.weights, w));
        PairField d = random_pair(g, n, w, rng, 8.0);
        d = scaled(d, 1.0 / E_norm(d, m, opt.weights, w));
        std::vector<PairField> probes;
        for (int k = 0; k < n_probes; ++k) {
            PairField xi = random_pair(g, n, w, rng, 10.0);
            probes.push_back(scaled(xi, 1.0 / E_norm(xi, m, opt.weights, w)));
        }
        FieldOperator De = assemble_DPhi(M, gamma, p, e);
        for (double size : opt.sizes) {
            PairField e2 = add(e, d, size);
            FieldOperator Diff = sum(De, assemble_DPhi(M, gamma, p, e2), -1.0);
            const double dn = E_norm(add(e, e2, -1.0), m, opt.weights, w);
            double sup = 0.0;
            for (const auto& xi : probes)
                sup = std::max(sup, ratio_or_zero(F_norm(Diff.apply(xi), m, opt.weights, w), dn));
            cell.rows.push_back({m, r, p.R, dn, sup});
        }
    }
    return cell;
}

void summarize(const std::vector<ContinuityRow>& rows, double& mean, double& spread) {
    double lo = 1e300, hi = 0.0, s = 0.0;
    int cnt = 0;
    for (const auto& row : rows)
        if (row.ratio > 0.0) lo = std::min(lo, row.ratio), hi = std::max(hi, row.ratio), s += row.ratio, ++cnt;
    mean = cnt ? s / cnt : 0.0;
    spread = cnt ? hi / lo : 1.0;
}

}  // namespace

ContinuityTable verify_iia(const HamiltonianModel& M, const PairField& gamma, int m, const ContinuityOptions& opt) {
    require_level(m, opt.weights, 0, "verify_iia");
    ContinuityTable T;
    T.rows = continuity_cell(M, gamma, m, opt, opt.n_probes, opt.seed).rows;
    summarize(T.rows, T.fitted_constant, T.spread);
    auto rich = continuity_cell(M, gamma, m, opt, 2 * opt.n_probes, opt.seed).rows;
    double sp = 0.0;
    summarize(rich, T.enriched_constant, sp);
    for (const auto& row : T.rows) T.bounded = T.bounded && std::isfinite(row.ratio);
    return T;
}

// ---- convergence in R ----------------------------------------------------

namespace {

// C^m norm of shift_steps(u, steps) - f over s in [s_lo, s_hi] within the
// window, derivatives taken before shifting so the truncated end of the
// shifted field does not enter
double shifted_cm_diff(const Field& u, int steps, const Field& f, int m, const Window& w, double s_lo = -1e300,
                       double s_hi = 1e300) {
    const auto& g = f.grid;
    double best = 0.0;
    for (int a = 0; a <= m; ++a) {
        Field us = diff_s(u, a), fs = diff_s(f, a);
        for (int b = 0; a + b <= m; ++b) {
            Field du = shift_steps(b == 0 ? us : diff_t(us, b), steps);
            Field df = b == 0 ? fs : diff_t(fs, b);
            for (int i = w.lo; i <= w.hi; ++i) {
                if (g.s(i) < s_lo || g.s(i) > s_hi) continue;
                for (std::size_t q = 0; q < du.slice(); ++q) {
                    std::size_t o = std::size_t(i) * du.slice() + q;
                    best = std::max(best, std::abs(du.data[o] - df.data[o]));
                }
            }
        }
    }
    return best;
}

bool in_window(const CylinderGrid& g, const Window& w, double s, double pad) {
    return s - pad >= g.s(w.lo) && s + pad <= g.s(w.hi);
}

// probes where the Q terms live: at the seams (slot 1 near s = -R, slot 2
// near s = R) and, every third probe, at the far copies s = -+2R
std::vector<PairField> seam_probes(const CylinderGrid& g, int dim, double R, int count, std::mt19937_64& rng,
                                   const WeightSequence& ws, int m, const Windows& w) {
    std::uniform_real_distribution<double> uc(-2.0, 2.0), uw(1.0, 2.5);
    std::uniform_int_distribution<int> um(0, 2);
    std::vector<PairField> out;
    for (int k = 0; k < count; ++k) {
        double c1 = -R + uc(rng), c2 = R + uc(rng);
        if (k % 3 == 2) {
            if (in_window(g, w[0], -2 * R, 6.0)) c1 = -2 * R + uc(rng);
            if (in_window(g, w[1], 2 * R, 6.0)) c2 = 2 * R + uc(rng);
        }
        PairField a = bump_pair(g, dim, 0, c1, uw(rng), um(rng));
        PairField b = bump_pair(g, dim, 1, c2, uw(rng), um(rng));
        PairField xi = mask_to_windows(add(a, b, k % 3 == 0 ? 0.0 : 1.0), w);
        out.push_back(scaled(xi, 1.0 / E_norm(xi, m, ws, w)));
    }
    return out;
}

// coefficient sup of the terms of T on output rows inside the windows
double coef_sup(const FieldOperator& T, const Windows& w) {
    double best = 0.0;
    for (const auto& term : T.terms) {
        const Window& ww = w[std::size_t(term.out_slot)];
        for (int i = ww.lo; i <= ww.hi; ++i)
            for (int j = 0; j < T.grid.n_t; ++j) {
                std::size_t q = T.pidx(i, j);
                for (int k = 0; k < T.nn() * T.nn(); ++k) best = std::max(best, std::abs(term.coef[q + std::size_t(k)]));
            }
    }
    return best;
}

// rows near the window ends see the one-sided derivative closures of the
// shifted fields; keep the Id/Dt coefficients only, Ds terms cancel exactly
FieldOperator zero_and_dt_part(const FieldOperator& T) {
    FieldOperator out = empty_operator(T.grid, T.dim, T.n_out, T.n_in);
    for (const auto& term : T.terms)
        if (term.deriv != Deriv::Ds) out.add(term);
    return out;
}

}  // namespace

ConvergenceTable verify_iib(const HamiltonianModel& M, const PairField& gamma, int m, const ConvergenceOptions& opt) {
    require_level(m, opt.weights, 1, "verify_iib");
    const auto& g = gamma[0].grid;
    const int n = gamma[0].dim;
    ConvergenceTable T;
    T.m = m;
    T.expected_rate = opt.weights[m + 1];
    FieldOperator D00 = assemble_DPhi(M, gamma, make_profile(g, 0.0), zero_pair(g, n));
    std::vector<double> Rs, gam, seam, qn, qs, dd, qf, bn, bs;
    for (double Rreq : opt.necks) {
        GluingProfile p = profile_for_neck(g, Rreq);
        check_margin(g, p, 1.0);
        Windows w = glue_windows(g, p);
        ErrorDecomposition d = decompose_errors(M, gamma, p);
        ConvergenceRow row;
        row.R = p.R;
        row.far_copy_visible = in_window(g, w[0], -2 * p.R, 3.0) && in_window(g, w[1], 2 * p.R, 3.0);
        T.far_copy_visible = T.far_copy_visible && row.far_copy_visible;
        Field u = preglue(p, gamma);
        row.gamma_minus_cm = shifted_cm_diff(u, p.steps, gamma[0], m, w[0]);
        row.gamma_plus_cm = shifted_cm_diff(u, -p.steps, gamma[1], m, w[1]);
        row.gamma_minus_seam = shifted_cm_diff(u, p.steps, gamma[0], m, w[0], -p.R - 1.0, -p.R + 1.0);
        row.gamma_plus_seam = shifted_cm_diff(u, -p.steps, gamma[1], m, w[1], p.R - 1.0, p.R + 1.0);
        row.q_coef_sup = coef_sup(d.Q_coef, w);

        std::mt19937_64 rng(opt.seed);
        auto probes = seam_probes(g, n, p.R, opt.n_probes, rng, opt.weights, m, w);
        FieldOperator diag_diff = sum(d.diag, D00, -1.0);
        FieldOperator block = sum(diag_diff, d.Q_coef);
        row.block_diff_sup = coef_sup(zero_and_dt_part(block), w);
        for (const auto& xi : probes) {
            row.q_coef_norm = std::max(row.q_coef_norm, F_norm(d.Q_coef.apply(xi), m, opt.weights, w));
            row.q_cutoff_norm = std::max(row.q_cutoff_norm, F_norm(d.Q_cutoff.apply(xi), m, opt.weights, w));
            row.diag_diff_norm = std::max(row.diag_diff_norm, F_norm(diag_diff.apply(xi), m, opt.weights, w));
            row.block_diff_norm = std::max(row.block_diff_norm, F_norm(block.apply(xi), m, opt.weights, w));
        }
        // one fixed probe decaying faster than the weight
        PairField fixed = mask_to_windows({decaying_configuration(g, 1.0, 1.0, 0.0, n),
                                           decaying_configuration(g, 1.0, 1.0, 0.5, n)}, w);
        row.q_cutoff_fixed = F_norm(d.Q_cutoff.apply(fixed), m, opt.weights, w);
        // support disjointness of the S blocks
        PairField inner = {compact_bump(g, n, 0.0, p.R - 2.0), compact_bump(g, n, 0.0, p.R - 2.0)};
        PairField Si = d.S.apply(mask_to_windows(inner, w));
        row.s_inner = std::max(max_abs(Si[0]), max_abs(Si[1]));

        Rs.push_back(row.R);
        gam.push_back(std::max(row.gamma_minus_cm, row.gamma_plus_cm));
        seam.push_back(std::max(row.gamma_minus_seam, row.gamma_plus_seam));
        qn.push_back(row.q_coef_norm);
        qs.push_back(row.q_coef_sup);
        dd.push_back(row.diag_diff_norm);
        qf.push_back(row.q_cutoff_fixed);
        bn.push_back(row.block_diff_norm);
        bs.push_back(row.block_diff_sup);
        T.rows.push_back(row);
    }
    T.rate_gamma = fit_rate(Rs, gam);
    T.rate_gamma_seam = fit_rate(Rs, seam);
    T.rate_q_coef = fit_rate(Rs, qn);
    T.rate_q_sup = fit_rate(Rs, qs);
    T.rate_diag = fit_rate(Rs, dd);
    T.rate_cutoff_fixed = fit_rate(Rs, qf);
    T.rate_block = fit_rate(Rs, bn);
    T.rate_block_sup = fit_rate(Rs, bs);
    return T;
}

// ---- (iii) ----------------------------------------------------------------

double kernel_decay_rate(const PairField& k, const Windows& w) {
    double best = kInfiniteRate;
    for (std::size_t a = 0; a < k.size(); ++a) {
        const Field& f = k[a];
        const auto& g = f.grid;
        const int quarter = std::max(2, w[a].size() / 4);
        std::vector<double> env(std::size_t(g.n_s), 0.0);
        double peak = 0.0;
        for (int i = w[a].lo; i <= w[a].hi; ++i) {
            for (std::size_t q = 0; q < f.slice(); ++q)
                env[std::size_t(i)] = std::max(env[std::size_t(i)], std::abs(f.data[std::size_t(i) * f.slice() + q]));
            peak = std::max(peak, env[std::size_t(i)]);
        }
        if (peak == 0.0) continue;
        // left tail grows with s, right tail decays; skip the two boundary points
        std::vector<double> xs, ys;
        for (int i = w[a].lo + 2; i < w[a].lo + quarter; ++i) xs.push_back(-g.s(i)), ys.push_back(env[std::size_t(i)]);
        double left = fit_rate(xs, ys);
        xs.clear(), ys.clear();
        for (int i = w[a].hi - quarter + 1; i <= w[a].hi - 2; ++i) xs.push_back(g.s(i)), ys.push_back(env[std::size_t(i)]);
        double right = fit_rate(xs, ys);
        best = std::min({best, left, right});
    }
    return best;
}

IndexSweep index_vs_r(const HamiltonianModel& M, const PairField& gamma, const IndexSweepOptions& opt) {
    const auto& g = gamma[0].grid;
    const int n = gamma[0].dim;
    IndexSweep S;
    std::vector<double> necks{std::numeric_limits<double>::infinity()};
    necks.insert(necks.end(), opt.necks.begin(), opt.necks.end());
    int flow_index = 0;
    for (int level : opt.levels) {
        const double delta = opt.weights[level];
        const int constituent = spectral_flow_index(M, gamma[0], delta) + spectral_flow_index(M, gamma[1], delta);
        if (level == opt.levels.front()) flow_index = constituent;
        int index0 = 0;
        for (double Rreq : necks) {
            GluingProfile p = std::isinf(Rreq) ? make_profile(g, 0.0) : profile_for_neck(g, Rreq);
            if (p.glued()) check_margin(g, p, 1.0);
            Windows w = windows_for(g, p);
            FieldOperator L = assemble_DPhi(M, gamma, p, zero_pair(g, n));
            IndexOptions io;
            io.delta = delta;
            io.level = level;
            io.want_kernel = opt.want_kernel;
            IndexResult res = box_index(L, w, io);
            IndexRow row;
            row.r = p.r;
            row.R = p.R;
            row.level = level;
            row.report = res.report;
            for (const auto& k : res.kernel) {
                double rate = kernel_decay_rate(k, w);
                row.kernel_rates.push_back(rate);
                row.min_kernel_rate = std::min(row.min_kernel_rate, rate);
            }
            if (!p.glued()) index0 = row.report.index;
            S.stable = S.stable && row.report.index == index0 && row.report.index == constituent;
            S.trustworthy = S.trustworthy && row.report.trustworthy;
            S.rows.push_back(std::move(row));
        }
    }
    S.constituent_index = flow_index;
    return S;
}

// ---- germ -----------------------------------------------------------------

std::vector<PairField> default_directions(const CylinderGrid& g, int dim, const Windows& w, int level,
                                          const WeightSequence& ws, int count) {
    std::vector<PairField> out;
    for (int j = 0; j < count; ++j) {
        PairField p = mask_to_windows(bump_pair(g, dim, j % 2, 0.0, 1.5 + 0.5 * (j / 2), (j / 2) % 3), w);
        out.push_back(scaled(p, 1.0 / E_norm(p, level, ws, w)));
    }
    return out;
}

PairField GermNormalForm::k_of(const std::vector<double>& v) const {
    if (v.size() != directions.size()) throw std::invalid_argument("germ: parameter vector has the wrong length");
    PairField k = zero_pair(gamma[0].grid, gamma[0].dim);
    for (std::size_t j = 0; j < v.size(); ++j)
        if (v[j] != 0.0) k = add(k, directions[j], v[j]);
    return k;
}

PairField GermNormalForm::second_slot(const std::vector<double>& v, const PairField& w) const {
    PairField e = add(k_of(v), w);
    PairField phi = filled_section(*model, gamma, profile, e);
    Eigen::VectorXd rhs = pack(layout, add(phi, phi00, -1.0));
    Eigen::VectorXd x = D_inv->solve(rhs);
    return unpack(layout, x);
}

PairField GermNormalForm::B(const std::vector<double>& v, const PairField& w) const {
    return add(w, second_slot(v, w), -1.0);
}

double GermNormalForm::W_norm(const PairField& w) const { return E_norm(w, level, weights, windows); }

GermNormalForm build_germ_normal_form(const HamiltonianModel& M, const PairField& gamma, const GermOptions& opt) {
    require_level(opt.level, opt.weights, 0, "build_germ_normal_form");
    const auto& g = gamma[0].grid;
    const int n = gamma[0].dim;
    GermNormalForm G;
    G.model = &M;
    G.gamma = gamma;
    G.level = opt.level;
    G.weights = opt.weights;
    G.profile = profile_for_neck(g, opt.R);
    check_margin(g, G.profile, 1.0);
    G.r = G.profile.r;
    G.R = G.profile.R;
    G.windows = glue_windows(g, G.profile);
    G.layout = make_layout(g, n, G.windows, true);
    PairField zero = zero_pair(g, n);

    FieldOperator D = assemble_DPhi(M, gamma, G.profile, zero);
    IndexOptions io;
    io.delta = opt.delta_index;
    IndexResult cert = box_index(D, G.windows, io);
    G.kernel_dim = cert.report.dim_ker;
    G.cokernel_dim = cert.report.dim_coker;
    if (G.cokernel_dim != 0)
        throw std::runtime_error("build_germ_normal_form: cokernel of dimension " + std::to_string(G.cokernel_dim) +
                                 " (only C = 0 is supported)");

    auto factor = [](const Eigen::SparseMatrix<double>& A, const char* what) {
        auto lu = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
        lu->analyzePattern(A);
        lu->factorize(A);
        if (lu->info() != Eigen::Success)
            throw std::runtime_error(std::string("build_germ_normal_form: singular ") + what + ": " +
                                     lu->lastErrorMessage());
        return lu;
    };
    Eigen::SparseMatrix<double> Ds = assemble_sparse(D, G.layout, G.layout);
    G.D_inv = factor(Ds, "restriction D(r, 0)");
    G.phi00 = filled_section(M, gamma, make_profile(g, 0.0), zero);
    G.directions = default_directions(g, n, G.windows, opt.level, opt.weights, opt.n_directions);

    std::mt19937_64 rng(opt.seed);
    // stability constant of the r-dependent inverse
    for (int k = 0; k < opt.n_probes; ++k) {
        PairField w = random_pair(g, n, G.windows, rng);
        PairField Dw = D.apply(w);
        G.stability_constant = std::max(G.stability_constant,
                                        ratio_or_zero(G.W_norm(w), F_norm(Dw, opt.level, opt.weights, G.windows)));
    }

    // bundle map at r = 0 inverts D(0) on the complement
    GluingProfile p0 = make_profile(g, 0.0);
    Windows w0 = full_windows(g, 2);
    Layout L0 = make_layout(g, n, w0, true);
    FieldOperator D0 = assemble_DPhi(M, gamma, p0, zero);
    Eigen::SparseMatrix<double> D0s = assemble_sparse(D0, L0, L0);
    auto lu0 = factor(D0s, "D(0, 0)");
    for (int k = 0; k < opt.n_probes; ++k) {
        Eigen::VectorXd w = pack(L0, random_pair(g, n, w0, rng));
        Eigen::VectorXd back = lu0->solve(D0s * w);
        G.G_check = std::max(G.G_check, (back - w).lpNorm<Eigen::Infinity>() / std::max(1.0, w.lpNorm<Eigen::Infinity>()));
    }

    // B(0, .) has vanishing derivative at 0
    PairField dir = random_pair(g, n, G.windows, rng, 10.0);
    dir = scaled(dir, 1.0 / G.W_norm(dir));
    std::vector<double> v0(G.directions.size(), 0.0);
    for (double h : {1e-2, 1e-3, 1e-4}) G.shape_fd.push_back(G.W_norm(G.B(v0, scaled(dir, h))) / h);
    return G;
}

namespace {

// w1 = w, w2 = w + tau d: by the mean value theorem the sup of the secant
// ratio over the ball is the sup of |D_w B| and is approached by short secants
PairField placed_bump(const CylinderGrid& g, int dim, const Windows& w, int slot, double c, double width, int mode,
                      double phase) {
    PairField p = bump_pair(g, dim, slot, c, width, mode);
    for (auto& z : p[slot].data) z *= std::polar(1.0, phase);
    PairField out = mask_to_windows(p, w);
    for (std::size_t a = 0; a < w.size(); ++a)
        for (int i : {w[a].lo, w[a].hi})
            for (std::size_t q = 0; q < out[a].slice(); ++q) out[a].data[std::size_t(i) * out[a].slice() + q] = 0.0;
    return out;
}

// one Gaussian bump in a random slot, one t-mode from {0, 0, 1, 2}
PairField single_bump(const CylinderGrid& g, int dim, const Windows& w, std::mt19937_64& rng, double span) {
    std::uniform_real_distribution<double> uc(-span, span), uw(1.0, 3.0);
    const int slot = int(rng() % 2);
    const int mode = std::array<int, 4>{0, 0, 1, 2}[rng() % 4];
    const double c = uc(rng), width = uw(rng), phase = 2 * kPi * std::uniform_real_distribution<double>(0, 1)(rng);
    return placed_bump(g, dim, w, slot, c, width, mode, phase);
}

struct Sample {
    std::vector<double> v;
    PairField w, d;
    double theta = 0.0;
};

constexpr std::size_t kClimbStarts = 3;  // from the scan and from the random pool each
constexpr int kClimbSteps = 60;
constexpr double kSecant = 0.05;

}  // namespace

ContractionTable estimate_contraction(const GermNormalForm& g, const std::vector<double>& radii, int n_samples,
                                      std::uint64_t seed) {
    if (radii.empty()) throw std::invalid_argument("estimate_contraction: no radii");
    const auto& grid = g.gamma[0].grid;
    const int n = g.gamma[0].dim;
    ContractionTable T;
    std::vector<double> th;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        const double eps = radii[ri];
        // the same directions at every radius (common random numbers)
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> nd;
        ContractionRow row;
        row.m = g.level;
        row.radius = eps;
        auto normalize_v = [&](std::vector<double>& v) {
            double vn = 0.0;
            for (double x : v) vn += x * x;
            vn = std::sqrt(vn);
            if (vn > 0)
                for (auto& x : v) x *= 0.5 * eps / vn;
        };
        auto to_sphere = [&](const PairField& w, double rad) { return scaled(w, rad * eps / g.W_norm(w)); };
        auto ratio = [&](const Sample& x) {
            PairField w2 = add(x.w, x.d);
            const double den = g.W_norm(x.d);
            if (!(den > 0.0)) return -1.0;
            ++row.n_pairs;
            return g.W_norm(add(g.B(x.v, x.w), g.B(x.v, w2), -1.0)) / den;
        };
        // |k| = eps / 2, |w1| = (1/2 - tau) eps, |w2 - w1| = tau eps near the
        // slot centers, so k + w stays in the eps-ball
        auto draw = [&](std::mt19937_64& r) {
            Sample x;
            x.v.resize(g.directions.size());
            for (auto& c : x.v) c = nd(r);
            normalize_v(x.v);
            x.w = to_sphere(single_bump(grid, n, g.windows, r, 4.0), 0.5 - kSecant);
            x.d = to_sphere(single_bump(grid, n, g.windows, r, 4.0), kSecant);
            return x;
        };
        // deterministic scan: w and d the same bump up to phase, k along one
        // direction; it does not depend on the seed or on n_samples
        std::vector<Sample> scan;
        for (int slot = 0; slot < 2; ++slot)
            for (double c = -3.0; c <= 3.0; c += 1.5)
                for (double width : {1.0, 2.0})
                    for (int mode : {0, 1})
                        for (double psi : {0.0, 0.5 * kPi})
                            for (double phi : {0.0, 0.5 * kPi})
                                for (std::size_t j = 0; j < g.directions.size(); ++j)
                                    for (double sign : {1.0, -1.0}) {
                                        Sample x;
                                        x.v.assign(g.directions.size(), 0.0);
                                        x.v[j] = sign;
                                        normalize_v(x.v);
                                        PairField b = placed_bump(grid, n, g.windows, slot, c, width, mode, psi);
                                        if (!(g.W_norm(b) > 0.0)) continue;
                                        x.w = to_sphere(b, 0.5 - kSecant);
                                        x.d = to_sphere(placed_bump(grid, n, g.windows, slot, c, width, mode, psi + phi),
                                                        kSecant);
                                        x.theta = ratio(x);
                                        if (x.theta >= 0.0) scan.push_back(std::move(x));
                                    }
        std::vector<Sample> pool;
        for (int q = 0; q < n_samples; ++q) {
            Sample x = draw(rng);
            x.theta = ratio(x);
            if (x.theta >= 0.0) pool.push_back(std::move(x));
        }
        if (pool.empty()) throw std::runtime_error("estimate_contraction: no valid sample pairs");
        auto by_theta = [](const Sample& a, const Sample& b) { return a.theta > b.theta; };
        std::sort(scan.begin(), scan.end(), by_theta);
        std::sort(pool.begin(), pool.end(), by_theta);
        // random-search ascent from the best few of each; the scan starts
        // come first so their climbs do not depend on n_samples
        std::mt19937_64 climb(seed ^ 0x9e3779b97f4a7c15ULL);
        auto ascend = [&](Sample& cur) {
            double sigma = 0.5;
            for (int it = 0; it < kClimbSteps; ++it) {
                Sample step = draw(climb);
                Sample y = cur;
                for (std::size_t j = 0; j < y.v.size(); ++j) y.v[j] += sigma * step.v[j];
                normalize_v(y.v);
                y.w = to_sphere(add(y.w, step.w, sigma), 0.5 - kSecant);
                y.d = to_sphere(add(y.d, step.d, sigma), kSecant);
                y.theta = ratio(y);
                if (y.theta > cur.theta) {
                    cur = std::move(y);
                    sigma = std::min(1.0, sigma * 1.3);
                } else {
                    sigma *= 0.7;
                }
            }
        };
        for (std::size_t b = 0; b < std::min(kClimbStarts, scan.size()); ++b) ascend(scan[b]);
        for (std::size_t b = 0; b < std::min(kClimbStarts, pool.size()); ++b) ascend(pool[b]);
        for (const auto& x : scan) row.theta_scan = std::max(row.theta_scan, x.theta);
        for (const auto& x : pool) row.theta_random = std::max(row.theta_random, x.theta);
        row.theta = std::max(row.theta_scan, row.theta_random);
        if (row.n_pairs == 0) throw std::runtime_error("estimate_contraction: no valid sample pairs");
        th.push_back(row.theta);
        T.rows.push_back(row);
    }
    // smallest radius
    std::size_t smallest = 0;
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (radii[i] < radii[smallest]) smallest = i;
    T.below_one = th[smallest] < 1.0;
    // values below the round-off floor count as zero
    for (std::size_t i = 1; i < th.size(); ++i)
        if (th[i] > kThetaFloor && th[i] > th[i - 1] * 1.05) T.nonincreasing = false;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < th.size(); ++i) sxy += radii[i] * th[i], sxx += radii[i] * radii[i];
    T.slope = sxy / sxx;
    for (std::size_t i = 0; i < th.size(); ++i) {
        const double line = T.slope * radii[i];
        T.fit_error = std::max(T.fit_error, line > 0 ? std::abs(th[i] - line) / line : 0.0);
    }
    return T;
}

PicardResult picard_glue(const GermNormalForm& g, const std::vector<double>& v, double tol, int max_iter) {
    const auto& grid = g.gamma[0].grid;
    const int n = g.gamma[0].dim;
    PicardResult res;
    res.w = zero_pair(grid, n);
    for (int it = 0; it < max_iter; ++it) {
        PairField next = g.B(v, res.w);
        const double step = g.W_norm(add(next, res.w, -1.0));
        res.w = std::move(next);
        res.iterations = it + 1;
        res.steps.push_back(step);
        if (!std::isfinite(step)) {
            res.aborted = true;
            res.diagnostic = "non-finite iterate at step " + std::to_string(it + 1);
            break;
        }
        if (res.steps.size() >= 2 && res.steps[res.steps.size() - 2] > 0.0) {
            const double ratio = step / res.steps[res.steps.size() - 2];
            res.ratios.push_back(ratio);
            if (ratio >= 1.0 && step > tol) {
                std::ostringstream os;
                os << "non-contraction at step " << it + 1 << ": ratio " << ratio << ", steps";
                for (double s : res.steps) os << ' ' << s;
                res.aborted = true;
                res.diagnostic = os.str();
                break;
            }
        }
        if (step <= tol) {
            res.converged = true;
            break;
        }
    }
    if (!res.converged && !res.aborted) res.diagnostic = "no convergence in " + std::to_string(max_iter) + " steps";
    PairField xi = add(g.gamma, add(g.k_of(v), res.w));
    GluedField u = preglue_with_ds(g.profile, xi);
    res.glued = u.value;
    res.residual = weighted_norm(floer_residual(*g.model, u.value, u.ds), 0, g.weights[0]);
    return res;
}

}  // namespace cyl
