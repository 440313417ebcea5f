#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cyl/scales.hpp"

namespace cyl {

struct FredholmReport {
    int level = 0;
    int dim_ker = 0;
    int dim_coker = 0;
    int index = 0;
    double sv_threshold = 0.0;
    double sv_gap = 0.0;
    double sv_max = 0.0;
    bool trustworthy = false;
    std::vector<double> singular_values;  // descending, possibly truncated for reports
    std::string diagnostic;
};

// Threshold policy: max(1e-10 sigma_max, largest gap below 1e-4 sigma_max).
// sigma must be the full list of singular values of a rows x cols matrix;
// each value counts `mult` times (real dimension of a complex block).
FredholmReport classify_spectrum(std::vector<double> sigma, long rows, long cols, int level, int mult = 1);

// Merge per-block spectra (block-diagonal operators) under one global policy.
struct SpectrumBlock {
    std::vector<double> sigma;
    long rows = 0, cols = 0;
    int mult = 1;
};
FredholmReport classify_blocks(const std::vector<SpectrumBlock>& blocks, int level);

constexpr double kTrustGap = 10.0;

// One level of a level-indexed operator. Norms are given by factors N with
// ||x|| = ||N x||_2.
struct ScLevel {
    int m = 0;
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd domain_norm;
    Eigen::MatrixXd target_norm;
};

struct ScOperator {
    std::vector<ScLevel> levels;
    std::vector<ScaleSpec> domain_spec, target_spec;
    int order = 0;
    // Columns spanning the "smooth" (low-frequency) target subspace used to
    // smooth cokernel complements.
    Eigen::MatrixXd smooth_target_basis;

    const ScLevel& level(int m) const;
};

// d/dt on real band-limited trig polynomials of degree < n_t/2, in the
// orthonormal basis {1, sqrt2 cos 2 pi k t, sqrt2 sin 2 pi k t}; level-m norms
// (sum (1+|k|)^{2m} |u_k|^2)^{1/2} on the target and exponent m+1 on the domain.
ScOperator assemble_ddt(int n_t, const std::vector<int>& levels);
// Coefficients <-> samples at t_j = j/n_t for the basis of assemble_ddt.
Eigen::MatrixXd ddt_synthesis(int n_t);
Eigen::VectorXd ddt_coefficients(int n_t, const std::function<double(double)>& f);

ScOperator identity_operator(int n, const std::vector<int>& levels);
ScOperator zero_operator(int n, const std::vector<int>& levels);

FredholmReport fredholm_report(const ScOperator& T, int m);

struct IndexAcrossScales {
    std::vector<FredholmReport> reports;
    bool consistent = true;
    std::string diagnostic;
};
IndexAcrossScales index_all_scales(const ScOperator& T);

enum class RegularityStatus { Regular, NoPreimage, Irregular };

struct RegularizingResult {
    RegularityStatus status = RegularityStatus::Regular;
    double residual = 0.0;      // relative least-squares residual at level 0
    double ratio = 0.0;         // ||e||_{E_{m}} / ||f||_{F_{m}}
    double bound = 0.0;         // 1 / smallest retained singular value at level m
    Eigen::VectorXd solution;
    bool passed() const { return status == RegularityStatus::Regular; }
};

RegularizingResult regularizing_check(const ScOperator& T, const Eigen::VectorXd& f, int m);

struct Splitting {
    int level = 0;
    Eigen::MatrixXd kernel_basis;  // columns, coefficient vectors
    Eigen::MatrixXd X_projector;   // onto the domain-norm complement of the kernel
    Eigen::MatrixXd C_basis;       // columns spanning the cokernel complement
    Eigen::MatrixXd Pi_C, Pi_C_perp;
    double smoothing_angle = 0.0;  // sin of the largest principal angle raw vs smoothed
    bool smoothing_ok = true;
    Eigen::MatrixXd pseudo_inverse;  // X-valued inverse of T on range(Pi_C_perp)
};

Splitting build_splittings(const ScOperator& T, int m);

double principal_angle_sin(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

}  // namespace cyl
