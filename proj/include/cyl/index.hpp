#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "cyl/field_operator.hpp"
#include "cyl/floer.hpp"
#include "cyl/sc_linear.hpp"

namespace cyl {

// Fredholm report of a first-order operator ds + K on slot windows, between
// the weighted spaces H^{m+1,delta} and H^{m,delta}. The conjugated operator is
// discretized by a box scheme (rows at cell midpoints) and closed by
// asymptotic boundary rows: at a left end zeta lies in the stable subspace
// E_{<0}(A_-), at a right end in E_{>0}(A_+), A = K - delta eta' at the end.
// The t-direction works on trigonometric polynomials without the grid
// Nyquist mode.
struct IndexOptions {
    double delta = 0.1;
    int level = 0;
    bool want_kernel = false;
    long dense_limit = 3000;  // max unknowns for the general (t-dependent) path
};

struct IndexResult {
    FredholmReport report;
    std::vector<PairField> kernel;  // unweighted kernel elements, one per real dimension
    std::string path;               // "fourier" or "dense"
};

IndexResult box_index(const FieldOperator& L, const Windows& w, const IndexOptions& opt);

// True when all coefficients are t-independent and complex linear.
bool fourier_separable(const FieldOperator& L, const Windows& w);

// Real asymptotic operator K(s_i) - delta eta'(s_i) of one slot on the reduced
// t-space (n_t or n_t - 1 real Fourier directions times 2n).
Eigen::MatrixXd asymptotic_operator(const FieldOperator& L, int slot, int i, double delta);
// Orthonormal basis of the real t-space without the Nyquist mode (n_t x n_t').
Eigen::MatrixXd reduced_t_basis(int n_t);

struct SpectralFlow {
    int flow = 0;
    int n_plus_start = 0, n_plus_end = 0;
    double gap_start = 0.0, gap_end = 0.0;  // min |Re lambda| at the ends
    std::vector<double> crossing_s;
    std::vector<int> crossing_sign;
};

class DegenerateEnd : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Signed count of eigenvalues crossing from Re < 0 to Re > 0 along s for the
// family ds + A(s); equals n_+(A(end)) - n_+(A(start)). Throws DegenerateEnd
// when an end operator has an eigenvalue within tol of the imaginary axis.
SpectralFlow spectral_flow(const std::function<Eigen::MatrixXd(double)>& A, const std::vector<double>& s, double tol = 1e-8);

SpectralFlow operator_spectral_flow(const FieldOperator& L, int slot, const Window& w, double delta, double tol = 1e-8);

// Flow of s -> J(gamma) dt + Z(gamma) - delta eta' along the whole grid.
int spectral_flow_index(const HamiltonianModel& M, const Field& gamma, double delta);

// d_s + i d_t + tanh(s) on C: one crossing per real direction, so index 2 and a
// kernel e^{-log cosh s} decaying at rate 1 for small weights.
FieldOperator kink_operator(const CylinderGrid& g);

}  // namespace cyl
