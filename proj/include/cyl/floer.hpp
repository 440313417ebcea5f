#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cyl/field_operator.hpp"
#include "cyl/grid.hpp"

namespace cyl {

// Real (2n x 2n) matrices and 2n-vectors on C^n with coordinates
// (Re z_0, Im z_0, Re z_1, ...). n <= 2 keeps everything on the stack.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 8, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 8, 8>;

Vec realify(const cplx* z, int n);
void complexify(const Vec& v, cplx* z);
Mat standard_J(int n);  // multiplication by i

class HamiltonianModel {
public:
    virtual ~HamiltonianModel() = default;
    virtual std::string id() const = 0;
    virtual int dim() const = 0;
    virtual Mat J(const Vec& z) const = 0;
    // Matrix M with M xi = (DJ(z) xi) v.
    virtual Mat DJ_times(const Vec& z, const Vec& v) const = 0;
    virtual bool constant_J() const = 0;
    virtual Vec X(const Vec& z) const = 0;
    virtual Mat DX(const Vec& z) const = 0;
    // Decay constant delta of the trajectories the model produces and the
    // distance from 0 to the spectrum of the asymptotic operator at z = 0.
    virtual double delta_decay() const = 0;
    virtual double gap_info() const = 0;
};

// J = i, X(z) = i a z.
class LinearModel : public HamiltonianModel {
public:
    explicit LinearModel(double a, int n = 1);
    std::string id() const override;
    int dim() const override { return n_; }
    Mat J(const Vec&) const override { return standard_J(n_); }
    Mat DJ_times(const Vec&, const Vec&) const override { return Mat::Zero(2 * n_, 2 * n_); }
    bool constant_J() const override { return true; }
    Vec X(const Vec& z) const override;
    Mat DX(const Vec& z) const override;
    double delta_decay() const override;
    double gap_info() const override;
    double a() const { return a_; }

private:
    double a_;
    int n_;
};

// Smooth cutoff chi(rho) = 1 for rho <= 1, 0 for rho >= 4.
double model_chi(double rho);
double model_chi_d(double rho);

// J = i, X(z) = i a z + eps chi(|z|^2) conj(z)^2 componentwise.
class PerturbedModel : public HamiltonianModel {
public:
    PerturbedModel(double a, double eps, int n = 1);
    std::string id() const override;
    int dim() const override { return n_; }
    Mat J(const Vec&) const override { return standard_J(n_); }
    Mat DJ_times(const Vec&, const Vec&) const override { return Mat::Zero(2 * n_, 2 * n_); }
    bool constant_J() const override { return true; }
    Vec X(const Vec& z) const override;
    Mat DX(const Vec& z) const override;
    double delta_decay() const override;
    double gap_info() const override;

private:
    double a_, eps_;
    int n_;
};

// J = P i P^{-1} with the shear P = 1 + theta N, theta = eps chi(|z|^2) Re z_0,
// N e_im = e_re in each component; X(z) = i a z. J is non-constant but
// J(0) = i.
class TwistedModel : public HamiltonianModel {
public:
    TwistedModel(double a, double eps, int n = 1);
    std::string id() const override;
    int dim() const override { return n_; }
    Mat J(const Vec& z) const override;
    Mat DJ_times(const Vec& z, const Vec& v) const override;
    bool constant_J() const override { return eps_ == 0.0; }
    Vec X(const Vec& z) const override;
    Mat DX(const Vec& z) const override;
    double delta_decay() const override;
    double gap_info() const override;

private:
    double theta(const Vec& z) const;
    Vec dtheta(const Vec& z) const;
    double a_, eps_;
    int n_;
};

std::unique_ptr<HamiltonianModel> make_model(const std::string& kind, double a, double eps, int n = 1);

// d_s g + J(g)(d_t g - X(g)); the s-derivative can be supplied explicitly
// (glued fields use the product rule).
Field floer_residual(const HamiltonianModel& M, const Field& g);
Field floer_residual(const HamiltonianModel& M, const Field& g, const Field& g_s);

double energy(const HamiltonianModel& M, const Field& g);

enum class LinVariant { Full, Reduced };

// Ds + J(g) Dt + Z(g) with Z = -J DX - (DJ .) X, plus (DJ .) d_t g for Full.
FieldOperator linearize_cr(const HamiltonianModel& M, const Field& base, LinVariant v = LinVariant::Full);
// Pointwise zero-order coefficient and J at (z, z_t).
Mat zero_order_coef(const HamiltonianModel& M, const Vec& z, const Vec& zt, LinVariant v);

struct Trajectory {
    Field gamma;
    double residual_norm = 0.0;
    double decay_rate = 0.0;
    double energy = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_history;
    std::string diagnostic;
    std::string model_id;
};

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 30;
    double weight = 0.0;  // delta of the weighted residual norm
};

Trajectory solve_trajectory(const HamiltonianModel& M, const Field& guess, const SolveOptions& opt = {});

// Sentinel for a numerically vanishing tail.
constexpr double kInfiniteRate = std::numeric_limits<double>::infinity();
enum class TailSide { Both, Left, Right };
// Least-squares rate of max_t |d_s g| over |s| in [s_max/2, s_max - 1]; with
// Both, the smaller of the two one-sided rates among non-vanishing tails.
double decay_rate(const Field& g, TailSide side = TailSide::Both);

void save_trajectory(const Trajectory& T, const std::string& field_path, const std::string& meta_path);
Trajectory load_trajectory(const std::string& field_path, const std::string& meta_path);

}  // namespace cyl
