#include "cyl/sc_linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cyl/linalg.hpp"

namespace cyl {

namespace {

struct Weighted {
    double sigma;
    int mult;
};

// threshold and gap from a merged spectrum
std::pair<double, double> threshold_and_gap(std::vector<Weighted> all) {
    std::sort(all.begin(), all.end(), [](const Weighted& a, const Weighted& b) { return a.sigma > b.sigma; });
    if (all.empty() || all.front().sigma == 0.0) return {0.0, std::numeric_limits<double>::infinity()};
    const double smax = all.front().sigma;
    double thr = 1e-10 * smax;
    double best_gap = 0.0, best_thr = 0.0;
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
        double lo = all[i + 1].sigma;
        if (!(lo < 1e-4 * smax)) continue;
        double gap = all[i].sigma / std::max(lo, 1e-300);
        if (gap > best_gap) {
            best_gap = gap;
            best_thr = std::sqrt(all[i].sigma * std::max(lo, 1e-300));
        }
    }
    thr = std::max(thr, best_thr);
    double retained_min = std::numeric_limits<double>::infinity();
    double discarded_max = 0.0;
    for (const auto& w : all) {
        if (w.sigma > thr)
            retained_min = std::min(retained_min, w.sigma);
        else
            discarded_max = std::max(discarded_max, w.sigma);
    }
    if (discarded_max == 0.0) discarded_max = thr;
    return {thr, retained_min / discarded_max};
}

}  // namespace

FredholmReport classify_blocks(const std::vector<SpectrumBlock>& blocks, int level) {
    std::vector<Weighted> all;
    for (const auto& b : blocks)
        for (double s : b.sigma) all.push_back({s, b.mult});
    auto [thr, gap] = threshold_and_gap(all);
    FredholmReport r;
    r.level = level;
    r.sv_threshold = thr;
    r.sv_gap = gap;
    for (const auto& b : blocks) {
        long rank = 0;
        for (double s : b.sigma)
            if (s > thr) ++rank;
        r.dim_ker += int(b.mult * (b.cols - rank));
        r.dim_coker += int(b.mult * (b.rows - rank));
        for (double s : b.sigma) {
            r.sv_max = std::max(r.sv_max, s);
            for (int q = 0; q < b.mult; ++q) r.singular_values.push_back(s);
        }
    }
    std::sort(r.singular_values.begin(), r.singular_values.end(), std::greater<>());
    r.index = r.dim_ker - r.dim_coker;
    r.trustworthy = gap > kTrustGap;
    if (!r.trustworthy) {
        std::ostringstream os;
        os.precision(3);
        os << "untrustworthy: sv_gap " << gap << " <= " << kTrustGap << " near threshold " << thr;
        r.diagnostic = os.str();
    }
    return r;
}

FredholmReport classify_spectrum(std::vector<double> sigma, long rows, long cols, int level, int mult) {
    return classify_blocks({SpectrumBlock{std::move(sigma), rows, cols, mult}}, level);
}

const ScLevel& ScOperator::level(int m) const {
    for (const auto& l : levels)
        if (l.m == m) return l;
    throw std::out_of_range("ScOperator: level " + std::to_string(m) + " not assembled");
}

namespace {

int ddt_K(int n_t) { return (n_t % 2 == 0) ? n_t / 2 - 1 : (n_t - 1) / 2; }

Eigen::MatrixXd normalized(const ScLevel& L) {
    Eigen::MatrixXd NtM = L.target_norm * L.matrix;
    // NtM * Nd^{-1}
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(L.domain_norm.transpose());
    return lu.solve(NtM.transpose()).transpose();
}

Eigen::MatrixXd orth_complement(const Eigen::MatrixXd& A, Eigen::Index n) {
    if (A.cols() == 0) return Eigen::MatrixXd::Identity(n, n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    return Q.rightCols(n - A.cols());
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& A) {
    if (A.cols() == 0) return A;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    return qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
}

}  // namespace

Eigen::MatrixXd ddt_synthesis(int n_t) {
    int K = ddt_K(n_t);
    Eigen::MatrixXd S(n_t, 2 * K + 1);
    const double tau = 2.0 * std::numbers::pi;
    for (int j = 0; j < n_t; ++j) {
        double t = double(j) / n_t;
        S(j, 0) = 1.0;
        for (int k = 1; k <= K; ++k) {
            S(j, 2 * k - 1) = std::sqrt(2.0) * std::cos(tau * k * t);
            S(j, 2 * k) = std::sqrt(2.0) * std::sin(tau * k * t);
        }
    }
    return S;
}

Eigen::VectorXd ddt_coefficients(int n_t, const std::function<double(double)>& f) {
    Eigen::MatrixXd S = ddt_synthesis(n_t);
    Eigen::VectorXd v(n_t);
    for (int j = 0; j < n_t; ++j) v(j) = f(double(j) / n_t);
    // orthonormal basis under the discrete mean inner product
    return S.transpose() * v / double(n_t);
}

ScOperator assemble_ddt(int n_t, const std::vector<int>& levels) {
    if (n_t < 4) throw std::invalid_argument("assemble_ddt: n_t must be at least 4");
    int K = ddt_K(n_t);
    int nb = 2 * K + 1;
    const double tau = 2.0 * std::numbers::pi;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nb, nb);
    for (int k = 1; k <= K; ++k) {
        M(2 * k, 2 * k - 1) = -tau * k;  // cos -> -2 pi k sin
        M(2 * k - 1, 2 * k) = tau * k;   // sin ->  2 pi k cos
    }
    ScOperator T;
    T.order = 1;
    for (int m : levels) {
        ScLevel L;
        L.m = m;
        L.matrix = M;
        L.domain_norm = Eigen::MatrixXd::Zero(nb, nb);
        L.target_norm = Eigen::MatrixXd::Zero(nb, nb);
        for (int b = 0; b < nb; ++b) {
            int k = (b + 1) / 2;
            L.domain_norm(b, b) = std::pow(1.0 + k, m + 1);
            L.target_norm(b, b) = std::pow(1.0 + k, m);
        }
        T.levels.push_back(L);
        T.domain_spec.push_back({m, 1, 0.0, 2});
        T.target_spec.push_back({m, 0, 0.0, 2});
    }
    int Ks = std::max(1, K / 2);
    T.smooth_target_basis = Eigen::MatrixXd::Identity(nb, 2 * Ks + 1);
    return T;
}

namespace {

ScOperator constant_operator(const Eigen::MatrixXd& M, const std::vector<int>& levels) {
    ScOperator T;
    for (int m : levels) {
        ScLevel L{m, M, Eigen::MatrixXd::Identity(M.cols(), M.cols()), Eigen::MatrixXd::Identity(M.rows(), M.rows())};
        T.levels.push_back(L);
        T.domain_spec.push_back({m, 0, 0.0, 2});
        T.target_spec.push_back({m, 0, 0.0, 2});
    }
    T.smooth_target_basis = Eigen::MatrixXd::Identity(M.rows(), M.rows());
    return T;
}

}  // namespace

ScOperator identity_operator(int n, const std::vector<int>& levels) {
    return constant_operator(Eigen::MatrixXd::Identity(n, n), levels);
}
ScOperator zero_operator(int n, const std::vector<int>& levels) {
    return constant_operator(Eigen::MatrixXd::Zero(n, n), levels);
}

FredholmReport fredholm_report(const ScOperator& T, int m) {
    const ScLevel& L = T.level(m);
    Eigen::MatrixXd K = normalized(L);
    auto s = svd(K, false);
    std::vector<double> sig(s.sigma.data(), s.sigma.data() + s.sigma.size());
    return classify_spectrum(sig, K.rows(), K.cols(), m);
}

IndexAcrossScales index_all_scales(const ScOperator& T) {
    if (T.levels.size() < 2) throw std::invalid_argument("index_all_scales: need at least two levels");
    IndexAcrossScales out;
    for (const auto& L : T.levels) out.reports.push_back(fredholm_report(T, L.m));
    std::ostringstream os;
    const auto& r0 = out.reports.front();
    for (std::size_t q = 1; q < out.reports.size(); ++q) {
        const auto& r = out.reports[q];
        if (r.index != r0.index || r.dim_ker != r0.dim_ker) {
            out.consistent = false;
            os << "level " << r.level << ": index " << r.index << " dim_ker " << r.dim_ker << " vs level " << r0.level
               << ": index " << r0.index << " dim_ker " << r0.dim_ker << "; smallest singular values";
            for (std::size_t k = r.singular_values.size() >= 3 ? r.singular_values.size() - 3 : 0;
                 k < r.singular_values.size(); ++k)
                os << ' ' << r.singular_values[k];
            os << "; ";
        }
    }
    // the operator itself must agree on shared coefficients across levels
    for (std::size_t q = 1; q < T.levels.size(); ++q) {
        const auto& a = T.levels[0].matrix;
        const auto& b = T.levels[q].matrix;
        Eigen::Index r = std::min(a.rows(), b.rows()), c = std::min(a.cols(), b.cols());
        double d = (a.topLeftCorner(r, c) - b.topLeftCorner(r, c)).cwiseAbs().maxCoeff();
        double sc = std::max(1.0, a.cwiseAbs().maxCoeff());
        if (d > 1e-12 * sc || a.rows() != b.rows() || a.cols() != b.cols()) {
            out.consistent = false;
            os << "level " << T.levels[q].m << ": matrix differs from level " << T.levels[0].m
               << " (max entry difference " << d << "); ";
        }
    }
    out.diagnostic = os.str();
    return out;
}

RegularizingResult regularizing_check(const ScOperator& T, const Eigen::VectorXd& f, int m) {
    RegularizingResult res;
    const ScLevel& L0 = T.level(T.levels.front().m);
    Eigen::MatrixXd K0 = normalized(L0);
    auto s0 = svd(K0, true);
    std::vector<double> sig(s0.sigma.data(), s0.sigma.data() + s0.sigma.size());
    FredholmReport r0 = classify_spectrum(sig, K0.rows(), K0.cols(), L0.m);
    Eigen::VectorXd y = L0.target_norm * f;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(K0.cols());
    for (Eigen::Index k = 0; k < s0.sigma.size(); ++k)
        if (s0.sigma(k) > r0.sv_threshold) z += s0.V.col(k) * (s0.U.col(k).dot(y) / s0.sigma(k));
    Eigen::VectorXd e = L0.domain_norm.partialPivLu().solve(z);
    double fn = y.norm();
    res.residual = fn > 0.0 ? (L0.target_norm * (L0.matrix * e - f)).norm() / fn : 0.0;
    res.solution = e;
    if (res.residual > 1e-8) {
        res.status = RegularityStatus::NoPreimage;
        return res;
    }
    const ScLevel& Lm = T.level(m);
    Eigen::MatrixXd Km = normalized(Lm);
    auto sm = svd(Km, true);
    std::vector<double> sigm(sm.sigma.data(), sm.sigma.data() + sm.sigma.size());
    FredholmReport rm = classify_spectrum(sigm, Km.rows(), Km.cols(), m);
    double smin = std::numeric_limits<double>::infinity();
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < sm.sigma.size(); ++k)
        if (sm.sigma(k) > rm.sv_threshold) smin = std::min(smin, sm.sigma(k)), ++rank;
    res.bound = 1.0 / smin;
    // drop the level-m kernel component before measuring
    Eigen::VectorXd ze = Lm.domain_norm * e;
    Eigen::MatrixXd Vr = sm.V.leftCols(rank);
    Eigen::VectorXd zx = Vr * (Vr.transpose() * ze);
    double fm = (Lm.target_norm * f).norm();
    res.ratio = fm > 0.0 ? zx.norm() / fm : 0.0;
    res.status = res.ratio <= res.bound * (1.0 + 1e-8) ? RegularityStatus::Regular : RegularityStatus::Irregular;
    return res;
}

double principal_angle_sin(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.cols() == 0 && B.cols() == 0) return 0.0;
    if (A.cols() != B.cols()) return 1.0;
    Eigen::MatrixXd Qa = orthonormalize(A), Qb = orthonormalize(B);
    Eigen::MatrixXd R = Qb - Qa * (Qa.transpose() * Qb);
    auto s = svd(R, false);
    return s.sigma.size() ? s.sigma(0) : 0.0;
}

Splitting build_splittings(const ScOperator& T, int m) {
    const ScLevel& L = T.level(m);
    Eigen::MatrixXd K = normalized(L);
    auto s = svd(K, true);
    std::vector<double> sig(s.sigma.data(), s.sigma.data() + s.sigma.size());
    FredholmReport rep = classify_spectrum(sig, K.rows(), K.cols(), m);
    if (!rep.trustworthy) throw std::runtime_error("build_splittings: " + rep.diagnostic);
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < s.sigma.size(); ++k)
        if (s.sigma(k) > rep.sv_threshold) ++rank;
    const Eigen::Index rows = K.rows(), cols = K.cols();
    Eigen::MatrixXd Vr = s.V.leftCols(rank), Ur = s.U.leftCols(rank);
    Eigen::MatrixXd Vn = orth_complement(Vr, cols);
    Eigen::MatrixXd Un = orth_complement(Ur, rows);

    Splitting sp;
    sp.level = m;
    auto Nd = L.domain_norm.partialPivLu();
    auto Nt = L.target_norm.partialPivLu();
    sp.kernel_basis = Nd.solve(Vn);
    Eigen::MatrixXd G = L.domain_norm.transpose() * L.domain_norm;
    if (sp.kernel_basis.cols() > 0) {
        Eigen::MatrixXd Kb = sp.kernel_basis;
        Eigen::MatrixXd gram = Kb.transpose() * G * Kb;
        sp.X_projector = Eigen::MatrixXd::Identity(cols, cols) - Kb * gram.ldlt().solve(Kb.transpose() * G);
    } else {
        sp.X_projector = Eigen::MatrixXd::Identity(cols, cols);
    }

    Eigen::MatrixXd Craw = Nt.solve(Un);
    if (Craw.cols() > 0) {
        const Eigen::MatrixXd& S = T.smooth_target_basis;
        Eigen::MatrixXd Cs = S.rows() == rows ? Eigen::MatrixXd(S * (S.transpose() * S).ldlt().solve(S.transpose() * Craw))
                                              : Craw;
        sp.smoothing_angle = principal_angle_sin(Craw, Cs);
        sp.smoothing_ok = sp.smoothing_angle <= 1e-6;
        sp.C_basis = orthonormalize(sp.smoothing_ok ? Cs : Craw);
        Eigen::MatrixXd W = Un.transpose() * L.target_norm;  // annihilates the range
        Eigen::MatrixXd core = W * sp.C_basis;
        sp.Pi_C = sp.C_basis * core.partialPivLu().solve(W);
    } else {
        sp.C_basis = Eigen::MatrixXd(rows, 0);
        sp.Pi_C = Eigen::MatrixXd::Zero(rows, rows);
    }
    sp.Pi_C_perp = Eigen::MatrixXd::Identity(rows, rows) - sp.Pi_C;
    Eigen::MatrixXd inv_s = Eigen::MatrixXd::Zero(rank, rank);
    for (Eigen::Index k = 0; k < rank; ++k) inv_s(k, k) = 1.0 / s.sigma(k);
    sp.pseudo_inverse = Nd.solve(Vr * inv_s * Ur.transpose() * L.target_norm);
    return sp;
}

}  // namespace cyl
