#include "cyl/field_operator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <omp.h>

namespace cyl {

namespace {

bool same_key(const OpTerm& t, int o, int i, Deriv d, int sh) {
    return t.out_slot == o && t.in_slot == i && t.deriv == d && t.shift == sh;
}

Field derivative_of(const Field& f, Deriv d, bool serial) {
    switch (d) {
        case Deriv::Id: return f;
        case Deriv::Ds: return serial ? diff_s_serial(f, 1) : diff_s(f, 1);
        case Deriv::Dt: return serial ? diff_t_serial(f, 1) : diff_t(f, 1);
    }
    return f;
}

void check_input(const FieldOperator& T, const PairField& in) {
    if (int(in.size()) != T.n_in) throw std::invalid_argument("operator input arity mismatch");
    for (const auto& f : in)
        if (!(f.grid == T.grid) || f.dim != T.dim) throw std::invalid_argument("operator input shape mismatch");
}

template <bool Parallel>
PairField apply_impl(const FieldOperator& T, const PairField& in) {
    check_input(T, in);
    const auto& g = T.grid;
    const int n = T.dim, nn = T.nn();
    PairField out(std::size_t(T.n_out), Field(g, n));
    // cache derivatives per (slot, deriv)
    std::vector<std::vector<Field>> dcache(in.size(), std::vector<Field>(3));
    std::vector<std::vector<bool>> have(in.size(), std::vector<bool>(3, false));
    for (const auto& t : T.terms) {
        int d = int(t.deriv);
        if (!have[t.in_slot][d]) {
            dcache[t.in_slot][d] = derivative_of(in[t.in_slot], t.deriv, !Parallel);
            have[t.in_slot][d] = true;
        }
    }
    for (const auto& t : T.terms) {
        const Field& src = dcache[t.in_slot][int(t.deriv)];
        Field& dst = out[t.out_slot];
        const int lo = std::max(0, -t.shift), hi = std::min(g.n_s, g.n_s - t.shift);
#pragma omp parallel for schedule(static) if (Parallel)
        for (int i = lo; i < hi; ++i) {
            for (int j = 0; j < g.n_t; ++j) {
                const double* C = t.coef.data() + T.pidx(i, j);
                double x[8], y[8];
                for (int c = 0; c < n; ++c) {
                    cplx v = src(i + t.shift, j, c);
                    x[2 * c] = v.real();
                    x[2 * c + 1] = v.imag();
                }
                for (int r = 0; r < nn; ++r) {
                    double acc = 0.0;
                    for (int c = 0; c < nn; ++c) acc += C[r * nn + c] * x[c];
                    y[r] = acc;
                }
                for (int c = 0; c < n; ++c) dst(i, j, c) += cplx(y[2 * c], y[2 * c + 1]);
            }
        }
    }
    return out;
}

}  // namespace

OpTerm& FieldOperator::term(int o, int i, Deriv d, int sh) {
    for (auto& t : terms)
        if (same_key(t, o, i, d, sh)) return t;
    if (dim > 4) throw std::invalid_argument("target dimension above 4 is not supported");
    OpTerm t;
    t.out_slot = o;
    t.in_slot = i;
    t.deriv = d;
    t.shift = sh;
    t.coef.assign(coef_size(), 0.0);
    terms.push_back(std::move(t));
    return terms.back();
}

const OpTerm* FieldOperator::find(int o, int i, Deriv d, int sh) const {
    for (const auto& t : terms)
        if (same_key(t, o, i, d, sh)) return &t;
    return nullptr;
}

void FieldOperator::add(const OpTerm& t) {
    OpTerm& dst = term(t.out_slot, t.in_slot, t.deriv, t.shift);
    for (std::size_t k = 0; k < dst.coef.size(); ++k) dst.coef[k] += t.coef[k];
}

PairField FieldOperator::apply(const PairField& in) const { return apply_impl<true>(*this, in); }
PairField FieldOperator::apply_serial(const PairField& in) const { return apply_impl<false>(*this, in); }

FieldOperator empty_operator(const CylinderGrid& g, int dim, int n_out, int n_in) {
    FieldOperator T;
    T.grid = g;
    T.dim = dim;
    T.n_out = n_out;
    T.n_in = n_in;
    return T;
}

FieldOperator block_diag(const FieldOperator& a, const FieldOperator& b) {
    if (!(a.grid == b.grid) || a.dim != b.dim) throw std::invalid_argument("block_diag: shape mismatch");
    FieldOperator T = empty_operator(a.grid, a.dim, a.n_out + b.n_out, a.n_in + b.n_in);
    T.terms = a.terms;
    for (auto t : b.terms) {
        t.out_slot += a.n_out;
        t.in_slot += a.n_in;
        T.terms.push_back(std::move(t));
    }
    return T;
}

FieldOperator sum(const FieldOperator& a, const FieldOperator& b, double sb) {
    if (!(a.grid == b.grid) || a.dim != b.dim || a.n_out != b.n_out || a.n_in != b.n_in)
        throw std::invalid_argument("sum: shape mismatch");
    FieldOperator T = a;
    for (auto t : b.terms) {
        for (auto& v : t.coef) v *= sb;
        T.add(t);
    }
    return T;
}

Multiplier stack(const Multiplier& top, const Multiplier& bottom) {
    if (top.n_in != bottom.n_in || !(top.grid == bottom.grid)) throw std::invalid_argument("stack: shape mismatch");
    Multiplier M = top;
    M.n_out = top.n_out + bottom.n_out;
    M.snapped = top.snapped && bottom.snapped;
    for (auto t : bottom.terms) {
        t.out_slot += top.n_out;
        M.terms.push_back(std::move(t));
    }
    return M;
}

namespace {

Field shifted(const Multiplier& M, const MultTerm& t, const Field& f) {
    if (M.snapped) return shift_steps(f, t.shift);
    return shift_field(f, t.shift_len);
}

}  // namespace

PairField apply_multiplier(const Multiplier& M, const PairField& in) {
    if (int(in.size()) != M.n_in) throw std::invalid_argument("multiplier input arity mismatch");
    const auto& g = M.grid;
    const int dim = in.at(0).dim;
    PairField out(std::size_t(M.n_out), Field(g, dim));
    for (const auto& t : M.terms) {
        Field sh = shifted(M, t, in[t.in_slot]);
        Field& dst = out[t.out_slot];
        for (int i = 0; i < g.n_s; ++i) {
            double c = t.c[i];
            if (c == 0.0) continue;
            for (std::size_t k = 0; k < dst.slice(); ++k) dst.data[i * dst.slice() + k] += c * sh.data[i * dst.slice() + k];
        }
    }
    return out;
}

PairField apply_multiplier_ds(const Multiplier& M, const PairField& in, const PairField& in_ds) {
    if (int(in.size()) != M.n_in || in_ds.size() != in.size())
        throw std::invalid_argument("multiplier input arity mismatch");
    const auto& g = M.grid;
    const int dim = in.at(0).dim;
    PairField out(std::size_t(M.n_out), Field(g, dim));
    for (const auto& t : M.terms) {
        Field v = shifted(M, t, in[t.in_slot]);
        Field dv = shifted(M, t, in_ds[t.in_slot]);
        Field& dst = out[t.out_slot];
        const std::size_t sl = dst.slice();
        for (int i = 0; i < g.n_s; ++i)
            for (std::size_t k = 0; k < sl; ++k)
                dst.data[i * sl + k] += t.dc[i] * v.data[i * sl + k] + t.c[i] * dv.data[i * sl + k];
    }
    return out;
}

FieldOperator compose(const FieldOperator& T, const Multiplier& M) {
    if (!M.snapped) throw std::invalid_argument("operator composition needs grid-multiple shifts");
    if (T.n_in != M.n_out || !(T.grid == M.grid)) throw std::invalid_argument("compose: shape mismatch");
    const auto& g = T.grid;
    const int nn = T.nn(), nn2 = nn * nn;
    FieldOperator out = empty_operator(g, T.dim, T.n_out, M.n_in);
    for (const auto& t : T.terms) {
        for (const auto& m : M.terms) {
            if (m.out_slot != t.in_slot) continue;
            // the product rule sends Ds into an extra Id term; create it first
            // because term() may reallocate
            if (t.deriv == Deriv::Ds) out.term(t.out_slot, m.in_slot, Deriv::Id, t.shift + m.shift);
            OpTerm& dst = out.term(t.out_slot, m.in_slot, t.deriv, t.shift + m.shift);
            OpTerm* lower = t.deriv == Deriv::Ds ? &out.term(t.out_slot, m.in_slot, Deriv::Id, t.shift + m.shift)
                                                 : nullptr;
            for (int i = 0; i < g.n_s; ++i) {
                int k = i + t.shift;
                if (k < 0 || k >= g.n_s) continue;
                const double c = m.c[k], dc = m.dc[k];
                for (int j = 0; j < g.n_t; ++j) {
                    const std::size_t p = out.pidx(i, j);
                    const double* C = t.coef.data() + p;
                    for (int q = 0; q < nn2; ++q) {
                        dst.coef[p + q] += C[q] * c;
                        if (lower) lower->coef[p + q] += C[q] * dc;
                    }
                }
            }
        }
    }
    return out;
}

FieldOperator compose(const Multiplier& M, const FieldOperator& T) {
    if (!M.snapped) throw std::invalid_argument("operator composition needs grid-multiple shifts");
    if (M.n_in != T.n_out || !(T.grid == M.grid)) throw std::invalid_argument("compose: shape mismatch");
    const auto& g = T.grid;
    const int nn2 = T.nn() * T.nn();
    FieldOperator out = empty_operator(g, T.dim, M.n_out, T.n_in);
    for (const auto& m : M.terms) {
        for (const auto& t : T.terms) {
            if (t.out_slot != m.in_slot) continue;
            OpTerm& dst = out.term(m.out_slot, t.in_slot, t.deriv, m.shift + t.shift);
            for (int i = 0; i < g.n_s; ++i) {
                int k = i + m.shift;
                if (k < 0 || k >= g.n_s) continue;
                const double c = m.c[i];
                if (c == 0.0) continue;
                for (int j = 0; j < g.n_t; ++j) {
                    const double* C = t.coef.data() + out.pidx(k, j);
                    double* D = dst.coef.data() + out.pidx(i, j);
                    for (int q = 0; q < nn2; ++q) D[q] += c * C[q];
                }
            }
        }
    }
    return out;
}

Windows full_windows(const CylinderGrid& g, int n_slots) {
    return Windows(std::size_t(n_slots), Window{0, g.n_s - 1});
}

PairField mask_to_windows(const PairField& f, const Windows& w) {
    PairField out = f;
    for (std::size_t a = 0; a < out.size(); ++a) {
        auto& u = out[a];
        for (int i = 0; i < u.grid.n_s; ++i) {
            if (w[a].contains(i)) continue;
            std::fill(u.data.begin() + i * u.slice(), u.data.begin() + (i + 1) * u.slice(), cplx(0.0));
        }
    }
    return out;
}

Layout make_layout(const CylinderGrid& g, int dim, const Windows& w, bool interior) {
    Layout L;
    L.grid = g;
    L.dim = dim;
    L.windows = w;
    L.interior = interior;
    long off = 0;
    for (std::size_t a = 0; a < w.size(); ++a) {
        L.offset.push_back(off);
        long pts = L.last(int(a)) - L.first(int(a)) + 1;
        if (pts <= 0) throw std::invalid_argument("window too small");
        off += pts * g.n_t * 2 * dim;
    }
    L.size = off;
    return L;
}

Eigen::VectorXd pack(const Layout& L, const PairField& f) {
    Eigen::VectorXd v(L.size);
    for (std::size_t a = 0; a < L.windows.size(); ++a)
        for (int i = L.first(int(a)); i <= L.last(int(a)); ++i)
            for (int j = 0; j < L.grid.n_t; ++j)
                for (int c = 0; c < L.dim; ++c) {
                    cplx z = f[a](i, j, c);
                    v[L.index(int(a), i, j, 2 * c)] = z.real();
                    v[L.index(int(a), i, j, 2 * c + 1)] = z.imag();
                }
    return v;
}

PairField unpack(const Layout& L, const Eigen::VectorXd& v) {
    PairField f(L.windows.size(), Field(L.grid, L.dim));
    for (std::size_t a = 0; a < L.windows.size(); ++a)
        for (int i = L.first(int(a)); i <= L.last(int(a)); ++i)
            for (int j = 0; j < L.grid.n_t; ++j)
                for (int c = 0; c < L.dim; ++c)
                    f[a](i, j, c) = cplx(v[L.index(int(a), i, j, 2 * c)], v[L.index(int(a), i, j, 2 * c + 1)]);
    return f;
}

Eigen::SparseMatrix<double> assemble_sparse(const FieldOperator& T, const Layout& rows, const Layout& cols) {
    const auto& g = T.grid;
    const int nn = T.nn();
    const double h = g.h_s();
    const auto& Dt = spectral_diff_matrix(g.n_t, 1);
    using Trip = Eigen::Triplet<double>;
    const int nthreads = omp_get_max_threads();
    std::vector<std::vector<Trip>> parts(static_cast<std::size_t>(nthreads));
    for (const auto& t : T.terms) {
        const int o = t.out_slot, in = t.in_slot;
#pragma omp parallel for schedule(static)
        for (int i = rows.first(o); i <= rows.last(o); ++i) {
            auto& trip = parts[std::size_t(omp_get_thread_num())];
            const int k = i + t.shift;
            if (k < 0 || k >= g.n_s) continue;
            for (int j = 0; j < g.n_t; ++j) {
                const double* C = t.coef.data() + T.pidx(i, j);
                for (int r = 0; r < nn; ++r) {
                    const long row = rows.index(o, i, j, r);
                    for (int c = 0; c < nn; ++c) {
                        const double a = C[r * nn + c];
                        if (a == 0.0) continue;
                        if (t.deriv == Deriv::Id) {
                            if (cols.has(in, k)) trip.emplace_back(row, cols.index(in, k, j, c), a);
                        } else if (t.deriv == Deriv::Ds) {
                            Stencil st = ds_stencil(g.n_s, k, h);
                            for (int q = 0; q < st.len; ++q) {
                                int kk = st.first + q;
                                if (cols.has(in, kk)) trip.emplace_back(row, cols.index(in, kk, j, c), a * st.w[q]);
                            }
                        } else if (cols.has(in, k)) {
                            for (int jj = 0; jj < g.n_t; ++jj) {
                                double d = Dt[std::size_t(j) * g.n_t + jj];
                                if (d != 0.0) trip.emplace_back(row, cols.index(in, k, jj, c), a * d);
                            }
                        }
                    }
                }
            }
        }
    }
    std::vector<Trip> all;
    std::size_t total = 0;
    for (auto& p : parts) total += p.size();
    all.reserve(total);
    for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    Eigen::SparseMatrix<double> A(rows.size, cols.size);
    A.setFromTriplets(all.begin(), all.end());
    A.makeCompressed();
    return A;
}

namespace {

const char* deriv_name(Deriv d) { return d == Deriv::Id ? "id" : d == Deriv::Ds ? "ds" : "dt"; }

}  // namespace

CoefDiff coefficient_discrepancy(const FieldOperator& a, const FieldOperator& b, const Windows& out_windows) {
    if (!(a.grid == b.grid) || a.dim != b.dim) throw std::invalid_argument("discrepancy: shape mismatch");
    CoefDiff res;
    const auto& g = a.grid;
    const int nn2 = a.nn() * a.nn();
    auto scan = [&](const OpTerm& t, const OpTerm* other, double sign) {
        const Window& w = out_windows.at(std::size_t(t.out_slot));
        for (int i = w.lo; i <= w.hi; ++i)
            for (int j = 0; j < g.n_t; ++j) {
                std::size_t p = a.pidx(i, j);
                for (int q = 0; q < nn2; ++q) {
                    double d = t.coef[p + q] - (other ? other->coef[p + q] : 0.0);
                    d = std::abs(d * sign);
                    if (d > res.max_diff) {
                        res.max_diff = d;
                        std::ostringstream os;
                        os << "out=" << t.out_slot << " in=" << t.in_slot << " " << deriv_name(t.deriv)
                           << " shift=" << t.shift << " s=" << g.s(i);
                        res.where = os.str();
                    }
                }
            }
    };
    for (const auto& t : a.terms) scan(t, b.find(t.out_slot, t.in_slot, t.deriv, t.shift), 1.0);
    for (const auto& t : b.terms)
        if (!a.find(t.out_slot, t.in_slot, t.deriv, t.shift)) scan(t, nullptr, 1.0);
    return res;
}

double max_coef_outside(const FieldOperator& T, int o, int in, double s_lo, double s_hi) {
    double m = 0.0;
    const auto& g = T.grid;
    const int nn2 = T.nn() * T.nn();
    for (const auto& t : T.terms) {
        if (t.out_slot != o || t.in_slot != in) continue;
        for (int i = 0; i < g.n_s; ++i) {
            double s = g.s(i);
            if (s >= s_lo && s <= s_hi) continue;
            for (int j = 0; j < g.n_t; ++j)
                for (int q = 0; q < nn2; ++q) m = std::max(m, std::abs(t.coef[T.pidx(i, j) + q]));
        }
    }
    return m;
}

double max_coef(const FieldOperator& T, int o, int in) {
    double m = 0.0;
    for (const auto& t : T.terms)
        if (t.out_slot == o && t.in_slot == in)
            for (double v : t.coef) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace cyl
