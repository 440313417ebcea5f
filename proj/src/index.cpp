#include "cyl/index.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <cmath>
#include <numbers>
#include <sstream>

#include <omp.h>

#include "cyl/linalg.hpp"

namespace cyl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCoefTol = 1e-12;

Eigen::SparseMatrix<double> sdiff(int n, double h) {
    std::vector<Eigen::Triplet<double>> tr;
    for (int i = 0; i < n; ++i) {
        Stencil st = ds_stencil(n, i, h);
        for (int q = 0; q < st.len; ++q) tr.emplace_back(i, st.first + q, st.w[q]);
    }
    Eigen::SparseMatrix<double> D(n, n);
    D.setFromTriplets(tr.begin(), tr.end());
    return D;
}

Eigen::VectorXd trap(int n, double h) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
    w[0] = w[n - 1] = 0.5 * h;
    return w;
}

// Terms sum_a (D^a)^T W D^a, a = 0..K, as separate matrices.
std::vector<Eigen::MatrixXd> s_grams(int n, double h, int K) {
    Eigen::SparseMatrix<double> D = sdiff(n, h), P(n, n);
    P.setIdentity();
    Eigen::VectorXd w = trap(n, h);
    std::vector<Eigen::MatrixXd> out;
    for (int a = 0; a <= K; ++a) {
        Eigen::SparseMatrix<double> G = P.transpose() * w.asDiagonal() * P;
        out.emplace_back(G);
        P = D * P;
    }
    return out;
}

Eigen::MatrixXd upper_factor(const Eigen::MatrixXd& G) {
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success) throw std::runtime_error("norm Gram matrix is not positive definite");
    return llt.matrixU();
}

// Upper factor of sum_a G_a * (sum_{b <= K - a} f^b).
Eigen::MatrixXd mode_norm(const std::vector<Eigen::MatrixXd>& G, int K, double f) {
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(G[0].rows(), G[0].cols());
    for (int a = 0; a <= K; ++a) {
        double tw = 0.0, fb = 1.0;
        for (int b = 0; b <= K - a; ++b, fb *= f) tw += fb;
        S += tw * G[a];
    }
    return upper_factor(S);
}

bool nyquist(int j, int n_t) { return n_t % 2 == 0 && j == n_t / 2; }
int signed_freq(int j, int n_t) { return j <= n_t / 2 ? j : j - n_t; }

cplx ccoef(const double* C, int nn, int r, int c) { return {C[(2 * r) * nn + 2 * c], C[(2 * r + 1) * nn + 2 * c]}; }

struct SlotGeom {
    int lo, hi, nw;
};

std::vector<SlotGeom> geometry(const FieldOperator& L, const Windows& w) {
    if (int(w.size()) != L.n_out || L.n_out != L.n_in) throw std::invalid_argument("box_index: windows/slots mismatch");
    std::vector<SlotGeom> g;
    for (const auto& x : w) {
        if (x.size() < 9) throw std::invalid_argument("box_index: window too small");
        g.push_back({x.lo, x.hi, x.size()});
    }
    return g;
}

void check_ds_terms(const FieldOperator& L, const Windows& w) {
    const int nn = L.nn();
    for (const auto& t : L.terms) {
        if (t.deriv != Deriv::Ds) continue;
        const Window& x = w[t.out_slot];
        bool unit = t.shift == 0 && t.in_slot == t.out_slot;
        for (int i = x.lo; i <= x.hi; ++i)
            for (int j = 0; j < L.grid.n_t; ++j) {
                const double* C = t.coef.data() + L.pidx(i, j);
                for (int r = 0; r < nn; ++r)
                    for (int c = 0; c < nn; ++c) {
                        double want = (unit && r == c) ? 1.0 : 0.0;
                        if (std::abs(C[r * nn + c] - want) > 1e-10)
                            throw std::invalid_argument("box_index needs the s-derivative with unit coefficient");
                    }
            }
    }
}

// coupling terms must vanish at the window ends
void check_end_coupling(const FieldOperator& L, int slot, int i) {
    const int nn2 = L.nn() * L.nn();
    for (const auto& t : L.terms) {
        if (t.out_slot != slot || t.deriv == Deriv::Ds) continue;
        if (t.shift == 0 && t.in_slot == slot) continue;
        for (int j = 0; j < L.grid.n_t; ++j)
            for (int q = 0; q < nn2; ++q)
                if (std::abs(t.coef[L.pidx(i, j) + q]) > 1e-10)
                    throw std::invalid_argument("coupling terms reach a window end; widen the grid");
    }
}

template <class Matrix>
Matrix complement_rows(const Matrix& A, bool left, double tol, const std::string& where) {
    using Scalar = typename Matrix::Scalar;
    using CM = Eigen::MatrixXcd;
    CM Ac = A.template cast<cplx>();
    Eigen::ComplexEigenSolver<CM> es(Ac);
    const auto& lam = es.eigenvalues();
    double gap = std::numeric_limits<double>::infinity();
    std::vector<int> keep;
    for (int k = 0; k < lam.size(); ++k) {
        gap = std::min(gap, std::abs(lam[k].real()));
        if (left ? lam[k].real() < 0 : lam[k].real() > 0) keep.push_back(k);
    }
    if (gap < tol) throw DegenerateEnd("asymptotic operator at " + where + " has an eigenvalue on the imaginary axis");
    const Eigen::Index N = A.rows();
    if constexpr (std::is_same_v<Scalar, double>) {
        // real basis of the invariant subspace from real and imaginary parts
        Eigen::MatrixXd V(N, 2 * Eigen::Index(keep.size()));
        for (std::size_t q = 0; q < keep.size(); ++q) {
            V.col(2 * q) = es.eigenvectors().col(keep[q]).real();
            V.col(2 * q + 1) = es.eigenvectors().col(keep[q]).imag();
        }
        Eigen::MatrixXd B;
        if (V.cols() > 0) {
            Eigen::JacobiSVD<Eigen::MatrixXd> sv(V, Eigen::ComputeThinU);
            B = sv.matrixU().leftCols(Eigen::Index(keep.size()));
        } else {
            B = Eigen::MatrixXd(N, 0);
        }
        Eigen::MatrixXd F = Eigen::MatrixXd::Identity(N, N);
        if (B.cols() > 0) {
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
            F = qr.householderQ() * Eigen::MatrixXd::Identity(N, N);
        }
        return F.rightCols(N - B.cols()).transpose();
    } else {
        CM V(N, Eigen::Index(keep.size()));
        for (std::size_t q = 0; q < keep.size(); ++q) V.col(q) = es.eigenvectors().col(keep[q]);
        CM F = CM::Identity(N, N);
        if (V.cols() > 0) {
            Eigen::HouseholderQR<CM> qr(V);
            F = qr.householderQ() * CM::Identity(N, N);
        }
        return F.rightCols(N - V.cols()).adjoint();
    }
}

// ---------------- Fourier path ----------------

struct ModeBlock {
    Eigen::MatrixXcd K;  // normalized
    Eigen::MatrixXd Nd;  // domain factor (real, block upper triangular)
    std::vector<long> col_off;
    int freq = 0;
};

Eigen::MatrixXcd end_operator_c(const FieldOperator& L, int slot, int i, double delta, cplx mu) {
    const int n = L.dim, nn = L.nn();
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& t : L.terms) {
        if (t.out_slot != slot || t.in_slot != slot || t.shift != 0 || t.deriv == Deriv::Ds) continue;
        const double* C = t.coef.data() + L.pidx(i, 0);
        cplx f = t.deriv == Deriv::Dt ? mu : cplx(1.0);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) A(r, c) += f * ccoef(C, nn, r, c);
    }
    A -= delta * weight_eta_ds(L.grid.s(i)) * Eigen::MatrixXcd::Identity(n, n);
    return A;
}

ModeBlock fourier_mode(const FieldOperator& L, const std::vector<SlotGeom>& geo, const Windows& w, int freq,
                       const IndexOptions& opt, const std::vector<std::vector<Eigen::MatrixXd>>& gs,
                       const std::vector<std::vector<Eigen::MatrixXd>>& gt) {
    const auto& g = L.grid;
    const int n = L.dim, nn = L.nn();
    const double h = g.h_s(), delta = opt.delta;
    const cplx mu(0.0, kTwoPi * freq);
    const double f2 = (kTwoPi * freq) * (kTwoPi * freq);
    const int S = int(geo.size());

    std::vector<Eigen::MatrixXcd> bc_left(S), bc_right(S);
    for (int a = 0; a < S; ++a) {
        bc_left[a] = complement_rows<Eigen::MatrixXcd>(end_operator_c(L, a, geo[a].lo, delta, mu), true, 1e-8,
                                                       "left end of slot " + std::to_string(a));
        bc_right[a] = complement_rows<Eigen::MatrixXcd>(end_operator_c(L, a, geo[a].hi, delta, mu), false, 1e-8,
                                                        "right end of slot " + std::to_string(a));
    }
    std::vector<long> coff(S), roff(S);
    long cols = 0, rows = 0;
    for (int a = 0; a < S; ++a) {
        coff[a] = cols;
        roff[a] = rows;
        cols += long(geo[a].nw) * n;
        rows += long(geo[a].nw - 1) * n + bc_left[a].rows() + bc_right[a].rows();
    }
    using Trip = Eigen::Triplet<cplx>;
    std::vector<Trip> trip;
    auto col = [&](int a, int i, int c) { return coff[a] + long(i - geo[a].lo) * n + c; };
    for (int a = 0; a < S; ++a) {
        for (int i = geo[a].lo; i < geo[a].hi; ++i) {
            const double em = weight_eta(0.5 * (g.s(i) + g.s(i + 1)));
            const long r0 = roff[a] + long(i - geo[a].lo) * n;
            for (int r = 0; r < n; ++r) {
                trip.emplace_back(r0 + r, col(a, i + 1, r), std::exp(delta * (em - weight_eta(g.s(i + 1)))) / h);
                trip.emplace_back(r0 + r, col(a, i, r), -std::exp(delta * (em - weight_eta(g.s(i)))) / h);
            }
            for (const auto& t : L.terms) {
                if (t.out_slot != a || t.deriv == Deriv::Ds) continue;
                const int b = t.in_slot;
                const cplx f = t.deriv == Deriv::Dt ? mu : cplx(1.0);
                for (int p = i; p <= i + 1; ++p) {
                    const int q = p + t.shift;
                    if (!w[b].contains(q)) continue;
                    const double* C = t.coef.data() + L.pidx(p, 0);
                    const double e = 0.5 * std::exp(delta * (em - weight_eta(g.s(q))));
                    for (int r = 0; r < n; ++r)
                        for (int c = 0; c < n; ++c) {
                            const cplx v = e * f * ccoef(C, nn, r, c);
                            if (v != cplx(0.0)) trip.emplace_back(r0 + r, col(b, q, c), v);
                        }
                }
            }
        }
        long rb = roff[a] + long(geo[a].nw - 1) * n;
        for (Eigen::Index k = 0; k < bc_left[a].rows(); ++k, ++rb)
            for (int c = 0; c < n; ++c) trip.emplace_back(rb, col(a, geo[a].lo, c), bc_left[a](k, c));
        for (Eigen::Index k = 0; k < bc_right[a].rows(); ++k, ++rb)
            for (int c = 0; c < n; ++c) trip.emplace_back(rb, col(a, geo[a].hi, c), bc_right[a](k, c));
    }
    Eigen::SparseMatrix<cplx> M(rows, cols);
    M.setFromTriplets(trip.begin(), trip.end());

    // norms: block diagonal upper factors, tensored with the identity on C^n.
    // The factors of the banded Gram matrices are banded, so Nt is kept sparse.
    Eigen::MatrixXd Nd = Eigen::MatrixXd::Zero(cols, cols);
    std::vector<Eigen::Triplet<double>> nt;
    for (int a = 0; a < S; ++a) {
        Eigen::MatrixXd Ud = mode_norm(gs[a], opt.level + 1, f2);
        Eigen::MatrixXd Ut = mode_norm(gt[a], opt.level, f2);
        for (int i = 0; i < Ud.rows(); ++i)
            for (int k = i; k < Ud.cols(); ++k)
                for (int c = 0; c < n; ++c) Nd(coff[a] + long(i) * n + c, coff[a] + long(k) * n + c) = Ud(i, k);
        for (int i = 0; i < Ut.rows(); ++i)
            for (int k = i; k < Ut.cols(); ++k) {
                if (Ut(i, k) == 0.0) continue;
                for (int c = 0; c < n; ++c) nt.emplace_back(roff[a] + long(i) * n + c, roff[a] + long(k) * n + c, Ut(i, k));
            }
        long rb = roff[a] + long(geo[a].nw - 1) * n;
        for (Eigen::Index k = 0; k < bc_left[a].rows() + bc_right[a].rows(); ++k) nt.emplace_back(rb + k, rb + k, 1.0);
    }
    Eigen::SparseMatrix<double> Nt(rows, rows);
    Nt.setFromTriplets(nt.begin(), nt.end());
    Eigen::SparseMatrix<cplx> NtMs = Nt.cast<cplx>() * M;
    Eigen::MatrixXcd NtM(NtMs);
    // real triangular solves on the real and imaginary parts
    Eigen::MatrixXd Kr = NtM.real(), Ki = NtM.imag();
    Nd.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(Kr);
    Nd.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(Ki);
    ModeBlock B;
    B.K.resize(rows, cols);
    B.K.real() = Kr;
    B.K.imag() = Ki;
    B.Nd = std::move(Nd);
    B.col_off = coff;
    B.freq = freq;
    return B;
}


// ---------------- general real path ----------------

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::MatrixXd K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

// (Q x I)^T B_t(i) (Q x I) for one term at s-index i.
Eigen::MatrixXd reduced_block(const FieldOperator& L, const OpTerm& t, int i, const Eigen::MatrixXd& QI) {
    const int n_t = L.grid.n_t, nn = L.nn();
    const auto& Dt = spectral_diff_matrix(n_t, 1);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n_t * nn, n_t * nn);
    for (int j = 0; j < n_t; ++j) {
        const double* C = t.coef.data() + L.pidx(i, j);
        for (int r = 0; r < nn; ++r)
            for (int c = 0; c < nn; ++c) {
                const double a = C[r * nn + c];
                if (a == 0.0) continue;
                if (t.deriv == Deriv::Id) {
                    B(j * nn + r, j * nn + c) += a;
                } else {
                    for (int jj = 0; jj < n_t; ++jj) B(j * nn + r, jj * nn + c) += a * Dt[std::size_t(j) * n_t + jj];
                }
            }
    }
    return QI.transpose() * B * QI;
}

struct DenseSystem {
    Eigen::MatrixXd K, Nd, QI;
    std::vector<long> col_off;
    long N = 0;  // reduced state size per s-point
};

DenseSystem dense_system(const FieldOperator& L, const std::vector<SlotGeom>& geo, const Windows& w,
                         const IndexOptions& opt) {
    const auto& g = L.grid;
    const int nn = L.nn();
    const double h = g.h_s(), delta = opt.delta;
    const int S = int(geo.size());
    DenseSystem D;
    Eigen::MatrixXd Q = reduced_t_basis(g.n_t);
    D.QI = kron(Q, Eigen::MatrixXd::Identity(nn, nn));
    const long N = D.QI.cols();
    D.N = N;

    std::vector<Eigen::MatrixXd> bc_left(S), bc_right(S);
    for (int a = 0; a < S; ++a) {
        bc_left[a] = complement_rows<Eigen::MatrixXd>(asymptotic_operator(L, a, geo[a].lo, delta), true, 1e-8,
                                                      "left end of slot " + std::to_string(a));
        bc_right[a] = complement_rows<Eigen::MatrixXd>(asymptotic_operator(L, a, geo[a].hi, delta), false, 1e-8,
                                                       "right end of slot " + std::to_string(a));
    }
    std::vector<long> coff(S), roff(S);
    long cols = 0, rows = 0;
    for (int a = 0; a < S; ++a) {
        coff[a] = cols;
        roff[a] = rows;
        cols += long(geo[a].nw) * N;
        rows += long(geo[a].nw - 1) * N + bc_left[a].rows() + bc_right[a].rows();
    }
    if (cols > opt.dense_limit)
        throw std::invalid_argument("operator too large for the general index path (" + std::to_string(cols) +
                                    " unknowns, limit " + std::to_string(opt.dense_limit) + ")");
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(rows, cols);
    auto col = [&](int a, int i) { return coff[a] + long(i - geo[a].lo) * N; };
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
    for (int a = 0; a < S; ++a) {
        for (int i = geo[a].lo; i < geo[a].hi; ++i) {
            const double em = weight_eta(0.5 * (g.s(i) + g.s(i + 1)));
            const long r0 = roff[a] + long(i - geo[a].lo) * N;
            M.block(r0, col(a, i + 1), N, N) += std::exp(delta * (em - weight_eta(g.s(i + 1)))) / h * I;
            M.block(r0, col(a, i), N, N) -= std::exp(delta * (em - weight_eta(g.s(i)))) / h * I;
            for (const auto& t : L.terms) {
                if (t.out_slot != a || t.deriv == Deriv::Ds) continue;
                const int b = t.in_slot;
                for (int p = i; p <= i + 1; ++p) {
                    const int q = p + t.shift;
                    if (!w[b].contains(q)) continue;
                    const double e = 0.5 * std::exp(delta * (em - weight_eta(g.s(q))));
                    M.block(r0, col(b, q), N, N) += e * reduced_block(L, t, p, D.QI);
                }
            }
        }
        long rb = roff[a] + long(geo[a].nw - 1) * N;
        M.block(rb, col(a, geo[a].lo), bc_left[a].rows(), N) = bc_left[a];
        rb += bc_left[a].rows();
        M.block(rb, col(a, geo[a].hi), bc_right[a].rows(), N) = bc_right[a];
    }

    // t-Gram pieces on the reduced space: h_t sum_b (Dr^b)^T Dr^b
    const auto& Dtv = spectral_diff_matrix(g.n_t, 1);
    Eigen::MatrixXd Dt(g.n_t, g.n_t);
    for (int j = 0; j < g.n_t; ++j)
        for (int k = 0; k < g.n_t; ++k) Dt(j, k) = Dtv[std::size_t(j) * g.n_t + k];
    Eigen::MatrixXd Dr = kron(Q.transpose() * Dt * Q, Eigen::MatrixXd::Identity(nn, nn));
    auto t_weight = [&](int K) {
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(N, N), P = Eigen::MatrixXd::Identity(N, N);
        for (int b = 0; b <= K; ++b) {
            T += g.h_t() * P.transpose() * P;
            P = Dr * P;
        }
        return T;
    };
    Eigen::MatrixXd Nd = Eigen::MatrixXd::Zero(cols, cols), Nt = Eigen::MatrixXd::Zero(rows, rows);
    for (int a = 0; a < S; ++a) {
        auto gs = s_grams(geo[a].nw, h, opt.level + 1);
        auto gt = s_grams(geo[a].nw - 1, h, opt.level);
        Eigen::MatrixXd Gd = Eigen::MatrixXd::Zero(long(geo[a].nw) * N, long(geo[a].nw) * N);
        for (int k = 0; k <= opt.level + 1; ++k) Gd += kron(gs[k], t_weight(opt.level + 1 - k));
        Eigen::MatrixXd Gt = Eigen::MatrixXd::Zero(long(geo[a].nw - 1) * N, long(geo[a].nw - 1) * N);
        for (int k = 0; k <= opt.level; ++k) Gt += kron(gt[k], t_weight(opt.level - k));
        Nd.block(coff[a], coff[a], Gd.rows(), Gd.cols()) = upper_factor(Gd);
        Nt.block(roff[a], roff[a], Gt.rows(), Gt.cols()) = upper_factor(Gt);
        long rb = roff[a] + Gt.rows();
        for (Eigen::Index k = 0; k < bc_left[a].rows() + bc_right[a].rows(); ++k) Nt(rb + k, rb + k) = 1.0;
    }
    Eigen::MatrixXd NtM = Nt * M;
    D.K = Nd.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(NtM);
    D.Nd = std::move(Nd);
    D.col_off = coff;
    return D;
}

}  // namespace

Eigen::MatrixXd reduced_t_basis(int n_t) {
    if (n_t % 2 == 1) return Eigen::MatrixXd::Identity(n_t, n_t);
    Eigen::VectorXd v(n_t);
    for (int j = 0; j < n_t; ++j) v[j] = (j % 2 == 0 ? 1.0 : -1.0) / std::sqrt(double(n_t));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
    Eigen::MatrixXd F = qr.householderQ() * Eigen::MatrixXd::Identity(n_t, n_t);
    return F.rightCols(n_t - 1);
}

Eigen::MatrixXd asymptotic_operator(const FieldOperator& L, int slot, int i, double delta) {
    const int nn = L.nn();
    Eigen::MatrixXd QI = kron(reduced_t_basis(L.grid.n_t), Eigen::MatrixXd::Identity(nn, nn));
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(QI.cols(), QI.cols());
    for (const auto& t : L.terms) {
        if (t.out_slot != slot || t.in_slot != slot || t.shift != 0 || t.deriv == Deriv::Ds) continue;
        A += reduced_block(L, t, i, QI);
    }
    A -= delta * weight_eta_ds(L.grid.s(i)) * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    return A;
}

bool fourier_separable(const FieldOperator& L, const Windows& w) {
    const int n = L.dim, nn = L.nn();
    for (const auto& t : L.terms) {
        if (t.deriv == Deriv::Ds) continue;
        const Window& x = w.at(std::size_t(t.out_slot));
        for (int i = x.lo; i <= x.hi; ++i) {
            const double* C0 = t.coef.data() + L.pidx(i, 0);
            double scale = 1.0;
            for (int q = 0; q < nn * nn; ++q) scale = std::max(scale, std::abs(C0[q]));
            const double tol = kCoefTol * scale;
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    if (std::abs(C0[(2 * r + 1) * nn + 2 * c + 1] - C0[(2 * r) * nn + 2 * c]) > tol) return false;
                    if (std::abs(C0[(2 * r) * nn + 2 * c + 1] + C0[(2 * r + 1) * nn + 2 * c]) > tol) return false;
                }
            for (int j = 1; j < L.grid.n_t; ++j) {
                const double* C = t.coef.data() + L.pidx(i, j);
                for (int q = 0; q < nn * nn; ++q)
                    if (std::abs(C[q] - C0[q]) > tol) return false;
            }
        }
    }
    return true;
}

namespace {

bool slots_coupled(const FieldOperator& L, const Windows& w) {
    for (const auto& t : L.terms) {
        if (t.in_slot == t.out_slot) continue;
        const Window& x = w[t.out_slot];
        for (int i = x.lo; i <= x.hi; ++i)
            for (int j = 0; j < L.grid.n_t; ++j)
                for (int q = 0; q < L.nn() * L.nn(); ++q)
                    if (t.coef[L.pidx(i, j) + q] != 0.0) return true;
    }
    return false;
}

FieldOperator slot_operator(const FieldOperator& L, int a) {
    FieldOperator T = empty_operator(L.grid, L.dim, 1, 1);
    for (auto t : L.terms) {
        if (t.out_slot != a || t.in_slot != a) continue;
        t.out_slot = t.in_slot = 0;
        T.terms.push_back(std::move(t));
    }
    return T;
}

// Index of one coupled component; kernel fields are on the component's slots.
IndexResult component_index(const FieldOperator& L, const Windows& w, const IndexOptions& opt,
                            std::vector<SpectrumBlock>& blocks) {
    auto geo = geometry(L, w);
    const auto& g = L.grid;
    const int n = L.dim;
    IndexResult res;
    if (fourier_separable(L, w)) {
        res.path = "fourier";
        std::vector<int> freqs;
        for (int j = 0; j < g.n_t; ++j)
            if (!nyquist(j, g.n_t)) freqs.push_back(signed_freq(j, g.n_t));
        std::vector<std::vector<Eigen::MatrixXd>> gs, gt;
        for (const auto& x : geo) {
            gs.push_back(s_grams(x.nw, g.h_s(), opt.level + 1));
            gt.push_back(s_grams(x.nw - 1, g.h_s(), opt.level));
        }
        std::vector<SpectrumBlock> mine(freqs.size());
        std::vector<ModeBlock> modes(freqs.size());
        std::string err;
#pragma omp parallel for schedule(dynamic)
        for (int q = 0; q < int(freqs.size()); ++q) {
            try {
                ModeBlock B = fourier_mode(L, geo, w, freqs[q], opt, gs, gt);
                SvdResultC sv = svd(B.K, false);
                mine[q] = SpectrumBlock{std::vector<double>(sv.sigma.data(), sv.sigma.data() + sv.sigma.size()),
                                        long(B.K.rows()), long(B.K.cols()), 2};
                if (opt.want_kernel) modes[q] = std::move(B);
            } catch (const std::exception& e) {
#pragma omp critical
                err = e.what();
            }
        }
        if (!err.empty()) throw DegenerateEnd(err);
        blocks.insert(blocks.end(), mine.begin(), mine.end());
        if (!opt.want_kernel) return res;
        // threshold from this component alone; the caller re-filters
        const double thr = classify_blocks(mine, opt.level).sv_threshold;
        for (std::size_t q = 0; q < modes.size(); ++q) {
            const ModeBlock& B = modes[q];
            bool any = false;
            for (std::size_t k = 0; k < mine[q].sigma.size(); ++k) any = any || mine[q].sigma[k] <= thr;
            if (!any && B.K.cols() <= B.K.rows()) continue;
            Eigen::BDCSVD<Eigen::MatrixXcd> sv(B.K, Eigen::ComputeFullV);
            const auto& sig = sv.singularValues();
            Eigen::MatrixXcd Ndc = B.Nd.cast<cplx>();
            for (Eigen::Index c = 0; c < B.K.cols(); ++c) {
                bool null = c >= sig.size() || sig[c] <= thr;
                if (!null) continue;
                Eigen::VectorXcd z = sv.matrixV().col(c);
                Eigen::VectorXcd zeta = Ndc.triangularView<Eigen::Upper>().solve(z);
                for (int part = 0; part < 2; ++part) {
                    const cplx unit = part == 0 ? cplx(1.0) : cplx(0.0, 1.0);
                    PairField f(geo.size(), Field(g, n));
                    for (std::size_t a = 0; a < geo.size(); ++a)
                        for (int i = geo[a].lo; i <= geo[a].hi; ++i) {
                            const double damp = std::exp(-opt.delta * weight_eta(g.s(i)));
                            for (int j = 0; j < g.n_t; ++j) {
                                const cplx ph = std::polar(1.0, kTwoPi * B.freq * g.t(j)) * unit;
                                for (int cc = 0; cc < n; ++cc)
                                    f[a](i, j, cc) = damp * ph * zeta[B.col_off[a] + long(i - geo[a].lo) * n + cc];
                            }
                        }
                    res.kernel.push_back(std::move(f));
                }
            }
        }
        return res;
    }

    res.path = "dense";
    DenseSystem D = dense_system(L, geo, w, opt);
    SvdResult sv = svd(D.K, false);
    SpectrumBlock blk{std::vector<double>(sv.sigma.data(), sv.sigma.data() + sv.sigma.size()), long(D.K.rows()),
                      long(D.K.cols()), 1};
    blocks.push_back(blk);
    if (opt.want_kernel) {
        const double thr = classify_blocks({blk}, opt.level).sv_threshold;
        Eigen::BDCSVD<Eigen::MatrixXd> full(D.K, Eigen::ComputeFullV);
        const auto& sig = full.singularValues();
        for (Eigen::Index c = 0; c < D.K.cols(); ++c) {
            if (c < sig.size() && sig[c] > thr) continue;
            Eigen::VectorXd zeta = D.Nd.triangularView<Eigen::Upper>().solve(Eigen::VectorXd(full.matrixV().col(c)));
            PairField f(geo.size(), Field(g, n));
            for (std::size_t a = 0; a < geo.size(); ++a)
                for (int i = geo[a].lo; i <= geo[a].hi; ++i) {
                    const double damp = std::exp(-opt.delta * weight_eta(g.s(i)));
                    Eigen::VectorXd u = D.QI * zeta.segment(D.col_off[a] + long(i - geo[a].lo) * D.N, D.N);
                    for (int j = 0; j < g.n_t; ++j)
                        for (int cc = 0; cc < n; ++cc)
                            f[a](i, j, cc) = damp * cplx(u[j * 2 * n + 2 * cc], u[j * 2 * n + 2 * cc + 1]);
                }
            res.kernel.push_back(std::move(f));
        }
    }
    return res;
}

}  // namespace

IndexResult box_index(const FieldOperator& L, const Windows& w, const IndexOptions& opt) {
    auto geo = geometry(L, w);
    check_ds_terms(L, w);
    for (int a = 0; a < int(geo.size()); ++a) {
        check_end_coupling(L, a, geo[a].lo);
        check_end_coupling(L, a, geo[a].hi);
    }
    std::vector<SpectrumBlock> blocks;
    IndexResult res;
    if (L.n_out == 1 || slots_coupled(L, w)) {
        res = component_index(L, w, opt, blocks);
    } else {
        // uncoupled slots (the unglued branch): one smaller problem per slot
        for (int a = 0; a < L.n_out; ++a) {
            IndexResult part = component_index(slot_operator(L, a), Windows{w[a]}, opt, blocks);
            res.path = part.path;
            for (auto& k : part.kernel) {
                PairField f(std::size_t(L.n_out), Field(L.grid, L.dim));
                f[a] = std::move(k[0]);
                res.kernel.push_back(std::move(f));
            }
        }
    }
    res.report = classify_blocks(blocks, opt.level);
    if (opt.want_kernel) {
        // keep the kernel count consistent with the joint threshold
        const long want = res.report.dim_ker;
        if (long(res.kernel.size()) > want) res.kernel.resize(std::size_t(want));
    }
    return res;
}

namespace {

SpectralFlow flow_from(const std::vector<Eigen::MatrixXd>& A, const std::vector<double>& s, double tol) {
    if (A.size() < 2) throw std::invalid_argument("spectral flow needs at least two samples");
    SpectralFlow F;
    std::vector<int> np(A.size());
    std::vector<double> gap(A.size());
#pragma omp parallel for schedule(static)
    for (int k = 0; k < int(A.size()); ++k) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(A[k], false);
        int cnt = 0;
        double gmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index q = 0; q < es.eigenvalues().size(); ++q) {
            double re = es.eigenvalues()[q].real();
            if (re > 0) ++cnt;
            gmin = std::min(gmin, std::abs(re));
        }
        np[k] = cnt;
        gap[k] = gmin;
    }
    F.gap_start = gap.front();
    F.gap_end = gap.back();
    if (F.gap_start < tol || F.gap_end < tol)
        throw DegenerateEnd("degenerate: an end operator has an eigenvalue with |Re| below tolerance");
    F.n_plus_start = np.front();
    F.n_plus_end = np.back();
    for (std::size_t k = 1; k < np.size(); ++k) {
        int d = np[k] - np[k - 1];
        for (int q = 0; q < std::abs(d); ++q) {
            F.crossing_s.push_back(0.5 * (s[k - 1] + s[k]));
            F.crossing_sign.push_back(d > 0 ? 1 : -1);
        }
        F.flow += d;
    }
    return F;
}

}  // namespace

SpectralFlow spectral_flow(const std::function<Eigen::MatrixXd(double)>& A, const std::vector<double>& s, double tol) {
    std::vector<Eigen::MatrixXd> mats;
    mats.reserve(s.size());
    for (double x : s) mats.push_back(A(x));
    return flow_from(mats, s, tol);
}

SpectralFlow operator_spectral_flow(const FieldOperator& L, int slot, const Window& w, double delta, double tol) {
    std::vector<Eigen::MatrixXd> mats(std::size_t(w.size()));
    std::vector<double> s(std::size_t(w.size()));
    for (int i = w.lo; i <= w.hi; ++i) {
        mats[std::size_t(i - w.lo)] = asymptotic_operator(L, slot, i, delta);
        s[std::size_t(i - w.lo)] = L.grid.s(i);
    }
    return flow_from(mats, s, tol);
}

int spectral_flow_index(const HamiltonianModel& M, const Field& gamma, double delta) {
    FieldOperator L = linearize_cr(M, gamma, LinVariant::Full);
    return operator_spectral_flow(L, 0, Window{0, gamma.grid.n_s - 1}, delta).flow;
}

FieldOperator kink_operator(const CylinderGrid& g) {
    LinearModel M(1.0);
    FieldOperator L = linearize_cr(M, Field(g, 1));
    auto& C = L.term(0, 0, Deriv::Id, 0).coef;
    for (int i = 0; i < g.n_s; ++i) {
        double a = std::tanh(g.s(i));
        for (int j = 0; j < g.n_t; ++j) {
            std::size_t p = L.pidx(i, j);
            C[p + 0] = a, C[p + 1] = 0.0, C[p + 2] = 0.0, C[p + 3] = a;
        }
    }
    return L;
}

}  // namespace cyl
