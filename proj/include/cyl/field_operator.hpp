#pragma once

#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "cyl/grid.hpp"

namespace cyl {

using PairField = std::vector<Field>;

enum class Deriv { Id = 0, Ds = 1, Dt = 2 };

// out(i, j) += C(i, j) * (D xi_in)(i + shift, j); derivatives are taken on the
// native grid of xi_in, values off the grid are zero. C is a real (2n x 2n)
// matrix acting on (re, im) pairs, stored row-major per grid point.
struct OpTerm {
    int out_slot = 0, in_slot = 0;
    Deriv deriv = Deriv::Id;
    int shift = 0;
    std::vector<double> coef;
};

// Linear first-order operator on tuples of fields over one grid.
struct FieldOperator {
    CylinderGrid grid;
    int dim = 1;
    int n_out = 1, n_in = 1;
    std::vector<OpTerm> terms;

    int nn() const { return 2 * dim; }
    std::size_t coef_size() const { return std::size_t(grid.n_s) * grid.n_t * nn() * nn(); }
    std::size_t pidx(int i, int j) const { return (std::size_t(i) * grid.n_t + j) * nn() * nn(); }

    OpTerm& term(int out_slot, int in_slot, Deriv d, int shift);  // find or create (zero coefficient)
    const OpTerm* find(int out_slot, int in_slot, Deriv d, int shift) const;
    void add(const OpTerm& t);  // merge by key

    PairField apply(const PairField& in) const;
    PairField apply_serial(const PairField& in) const;
};

FieldOperator empty_operator(const CylinderGrid& g, int dim, int n_out, int n_in);
FieldOperator block_diag(const FieldOperator& a, const FieldOperator& b);
FieldOperator sum(const FieldOperator& a, const FieldOperator& b, double sb = 1.0);

// Scalar profile multiplier with shift: out_a(s) = sum c(s) xi_b(s + shift h).
// dc is the analytic s-derivative of c, used by the product rule.
struct MultTerm {
    int out_slot = 0, in_slot = 0;
    int shift = 0;
    double shift_len = 0.0;  // exact length; equals shift * h_s when snapped
    std::vector<double> c, dc;
};

struct Multiplier {
    CylinderGrid grid;
    int n_out = 1, n_in = 1;
    bool snapped = true;
    std::vector<MultTerm> terms;
};

Multiplier stack(const Multiplier& top, const Multiplier& bottom);

PairField apply_multiplier(const Multiplier& M, const PairField& in);
// s-derivative of M(in) by the product rule from the inputs' derivatives.
PairField apply_multiplier_ds(const Multiplier& M, const PairField& in, const PairField& in_ds);

FieldOperator compose(const FieldOperator& T, const Multiplier& M);  // T o M
FieldOperator compose(const Multiplier& M, const FieldOperator& T);  // M o T

// Inclusive index windows per slot.
struct Window {
    int lo = 0, hi = 0;
    int size() const { return hi - lo + 1; }
    bool contains(int i) const { return i >= lo && i <= hi; }
};
using Windows = std::vector<Window>;

Windows full_windows(const CylinderGrid& g, int n_slots);
PairField mask_to_windows(const PairField& f, const Windows& w);

// Packing of real coefficients for points strictly inside the windows
// (Dirichlet pinning at the window ends) or for all window points.
struct Layout {
    CylinderGrid grid;
    int dim = 1;
    Windows windows;
    bool interior = true;
    std::vector<long> offset;  // per slot
    long size = 0;

    int first(int slot) const { return windows[slot].lo + (interior ? 1 : 0); }
    int last(int slot) const { return windows[slot].hi - (interior ? 1 : 0); }
    long index(int slot, int i, int j, int r) const {
        return offset[slot] + ((long(i - first(slot)) * grid.n_t + j) * 2 * dim + r);
    }
    bool has(int slot, int i) const { return i >= first(slot) && i <= last(slot); }
};

Layout make_layout(const CylinderGrid& g, int dim, const Windows& w, bool interior);
Eigen::VectorXd pack(const Layout& L, const PairField& f);
PairField unpack(const Layout& L, const Eigen::VectorXd& v);

Eigen::SparseMatrix<double> assemble_sparse(const FieldOperator& T, const Layout& rows, const Layout& cols);

// Max coefficient discrepancy over output rows inside the windows.
struct CoefDiff {
    double max_diff = 0.0;
    std::string where;
};
CoefDiff coefficient_discrepancy(const FieldOperator& a, const FieldOperator& b, const Windows& out_windows);

// Largest |coef| of terms matching (out, in) at rows outside [lo, hi] in s.
double max_coef_outside(const FieldOperator& T, int out_slot, int in_slot, double s_lo, double s_hi);
double max_coef(const FieldOperator& T, int out_slot, int in_slot);

}  // namespace cyl
