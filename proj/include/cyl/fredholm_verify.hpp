#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cyl/gluing.hpp"
#include "cyl/index.hpp"
#include "cyl/scales.hpp"

namespace cyl {

// ---- norms and probes ------------------------------------------------------

// Levels: E_m = H^{m+1, delta_m}, F_m = H^{m, delta_m}; the norms of pairs are
// l2 sums over slots, each restricted to its window.
double pair_norm(const PairField& f, int k, double delta, const Windows& w);
double E_norm(const PairField& f, int m, const WeightSequence& ws, const Windows& w);
double F_norm(const PairField& f, int m, const WeightSequence& ws, const Windows& w);
// max over a + b <= m of sup |d_s^a d_t^b f| on the window
double cm_norm(const Field& f, int m, const Window& w);

// Synthetic exponentially decaying configuration
// amp e^{-kappa sqrt(1 + s^2)} ((1 + 0.4i) + 0.3 e^{i(2 pi t + phase)}).
Field decaying_configuration(const CylinderGrid& g, double kappa, double amp, double phase, int dim = 1);

// Smooth random pair: per slot two Gaussian bumps (widths in [1, 3]) with
// random centers in [-span, span] and at least `pad` from the window ends,
// each carrying one t-mode from {0, 0, 1, 2} with a random complex amplitude. Zero outside the windows and at their
// end points.
PairField random_pair(const CylinderGrid& g, int dim, const Windows& w, std::mt19937_64& rng, double span = 1e300,
                      double pad = 6.0);

// Least-squares slope of log y against x, negated (zero or non-finite y skipped).
double fit_rate(const std::vector<double>& x, const std::vector<double>& y);

// ---- continuity of D_E Phi in e ---------------------------------------------

struct ContinuityRow {
    int m = 0;
    double r = 0.0, R = 0.0;
    double diff_norm = 0.0;  // ||e - e'||_{E_m}
    double ratio = 0.0;      // sup over probes
};

struct ContinuityTable {
    std::vector<ContinuityRow> rows;
    double fitted_constant = 0.0;  // mean of the nonzero ratios
    double spread = 0.0;           // max/min of the nonzero ratios
    double enriched_constant = 0.0;  // same with twice the probes
    bool bounded = true;
};

struct ContinuityOptions {
    std::vector<double> r_list{0.0};
    std::vector<double> sizes{1e-2, 3e-3, 1e-3};  // ||e - e'|| sweep over a decade
    double base_size = 0.05;                      // ||e||_{E_m}
    int n_probes = 6;
    std::uint64_t seed = 1;
    WeightSequence weights{{0.1, 0.2, 0.3, 0.4}, 0.5};
};

ContinuityTable verify_iia(const HamiltonianModel& M, const PairField& gamma, int m, const ContinuityOptions& opt);

// ---- convergence as R grows -------------------------------------------------

// Literal quantities are measured over the whole slot windows. On a grid wide
// enough to hold the far copy gamma_2(s + 2R) inside slot 1 (and gamma_1 in
// slot 2) they do not decay: 1 - beta(s + R) is a step, not a bump. The seam
// and combined quantities are the pieces that do converge.
struct ConvergenceRow {
    double R = 0.0;
    double gamma_minus_cm = 0.0, gamma_plus_cm = 0.0;      // ||gamma_r^-+ - gamma_{1,2}||_{C^m} on the windows
    double gamma_minus_seam = 0.0, gamma_plus_seam = 0.0;  // same on [-R-1, -R+1] resp. [R-1, R+1]
    bool far_copy_visible = false;  // the window reaches s = -+2R
    double q_coef_norm = 0.0;    // probe sup of ||Q_coef xi||_{F_m} / ||xi||_{E_m}
    double q_coef_sup = 0.0;     // sup of the Q_coef coefficients
    double q_cutoff_norm = 0.0;  // probe sup for the cutoff part (R independent)
    double q_cutoff_fixed = 0.0;  // ||Q_cutoff xi_0||_{F_m} for one fixed decaying probe
    double diag_diff_norm = 0.0;  // probe sup of diag(L_{gamma_r^-}, L_{gamma_r^+}) - D_E Phi(0, 0)
    double block_diff_norm = 0.0;  // probe sup of diag + Q_coef - D_E Phi(0, 0)
    double block_diff_sup = 0.0;   // its coefficient sup
    double s_inner = 0.0;          // max |S xi| for xi supported in |s| <= R - 2
};

struct ConvergenceTable {
    int m = 0;
    std::vector<ConvergenceRow> rows;
    double rate_gamma = 0.0, rate_q_coef = 0.0, rate_q_sup = 0.0, rate_diag = 0.0, rate_cutoff_fixed = 0.0;
    double rate_gamma_seam = 0.0, rate_block = 0.0, rate_block_sup = 0.0;
    double expected_rate = 0.0;  // delta_{m+1}
    bool far_copy_visible = true;  // every row sees the far copy
};

struct ConvergenceOptions {
    std::vector<double> necks{45, 50, 55, 60, 65, 70, 75};
    int n_probes = 6;
    std::uint64_t seed = 2;
    WeightSequence weights{{0.1, 0.2, 0.3, 0.4}, 0.5};
};

ConvergenceTable verify_iib(const HamiltonianModel& M, const PairField& gamma, int m, const ConvergenceOptions& opt);

// ---- index stability --------------------------------------------------------

struct IndexRow {
    double r = 0.0, R = 0.0;
    int level = 0;
    FredholmReport report;
    std::vector<double> kernel_rates;  // fitted decay rate per kernel element
    double min_kernel_rate = kInfiniteRate;
};

struct IndexSweep {
    std::vector<IndexRow> rows;
    int constituent_index = 0;  // index(D_gamma1) + index(D_gamma2) from spectral flow at delta_m
    bool stable = true;         // every index equals the r = 0 index and the constituent sum
    bool trustworthy = true;
};

struct IndexSweepOptions {
    std::vector<double> necks{45, 60, 100};  // r = 0 is always included
    std::vector<int> levels{0, 1};
    WeightSequence weights{{0.1, 0.2, 0.3, 0.4}, 0.5};
    bool want_kernel = true;
};

IndexSweep index_vs_r(const HamiltonianModel& M, const PairField& gamma, const IndexSweepOptions& opt);

// Rate of a kernel element: minimum over slots of the two-sided tail fit on
// the slot window, in the unweighted field.
double kernel_decay_rate(const PairField& k, const Windows& w);

// ---- germ normal form, contraction, Picard ----------------------------------

struct GermNormalForm {
    const HamiltonianModel* model = nullptr;
    PairField gamma;
    GluingProfile profile;
    Windows windows;
    Layout layout;
    int level = 1;
    WeightSequence weights{{0.1, 0.2, 0.3, 0.4}, 0.5};
    int kernel_dim = 0, cokernel_dim = 0;
    std::vector<PairField> directions;  // parameter directions p_j, k(v) = sum v_j p_j
    PairField phi00;                    // Phi(0, 0)
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> D_inv;  // (Pi_C^perp D_E' Phi(r, 0))^{-1}, C = 0
    double stability_constant = 0.0;  // C_m: sup ||w||_{E_m} / ||D w||_{F_m}
    double G_check = 0.0;             // max |D(0)^{-1} D(0) w - w| over probes
    double r = 0.0, R = 0.0;
    // ||B(0, h w)||_W / (h ||w||_W) for h = 1e-2, 1e-3, 1e-4: O(h) when B(0, .) has zero derivative
    std::vector<double> shape_fd;

    PairField k_of(const std::vector<double>& v) const;
    // w - B(v, w) = D^{-1} (Phi(r, k + w) - Phi(0, 0))
    PairField second_slot(const std::vector<double>& v, const PairField& w) const;
    PairField B(const std::vector<double>& v, const PairField& w) const;
    double W_norm(const PairField& w) const;
};

struct GermOptions {
    double R = 45.0;
    int level = 1;
    int n_probes = 6;
    std::uint64_t seed = 3;
    WeightSequence weights{{0.1, 0.2, 0.3, 0.4}, 0.5};
    int n_directions = 2;
    double delta_index = 0.1;  // weight of the certifying Fredholm report
};

// Default parameter directions: smooth bumps in each slot, normalized in E_m.
std::vector<PairField> default_directions(const CylinderGrid& g, int dim, const Windows& w, int level,
                                          const WeightSequence& ws, int count);

GermNormalForm build_germ_normal_form(const HamiltonianModel& M, const PairField& gamma, const GermOptions& opt);

// theta below this is round-off of the sparse solves
constexpr double kThetaFloor = 1e-10;

struct ContractionRow {
    int m = 0;
    double radius = 0.0;
    double theta = 0.0;         // max of the two below
    double theta_scan = 0.0;    // structured starts after ascent
    double theta_random = 0.0;  // random pool after ascent
    int n_pairs = 0;
};

struct ContractionTable {
    std::vector<ContractionRow> rows;
    bool below_one = true;     // theta < 1 at the smallest radius
    bool nonincreasing = true;  // along the list of shrinking radii
    double slope = 0.0;        // least-squares theta ~ slope * radius through the origin
    double fit_error = 0.0;    // max relative deviation from the line
};

ContractionTable estimate_contraction(const GermNormalForm& g, const std::vector<double>& radii, int n_samples,
                                      std::uint64_t seed);

struct PicardResult {
    bool converged = false;
    bool aborted = false;
    std::string diagnostic;
    PairField w;
    Field glued;
    double residual = 0.0;  // ||dbar(glued)||_{0, delta_0}
    std::vector<double> steps;   // ||w_{n+1} - w_n||_{W_m}
    std::vector<double> ratios;  // successive step ratios
    int iterations = 0;
};

PicardResult picard_glue(const GermNormalForm& g, const std::vector<double>& v, double tol = 1e-12, int max_iter = 50);

}  // namespace cyl
