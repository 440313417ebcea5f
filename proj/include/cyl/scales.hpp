#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cyl/grid.hpp"

namespace cyl {

struct WeightSequence {
    std::vector<double> deltas;
    double delta_cap = 0.0;

    double operator[](int m) const { return deltas.at(std::size_t(m)); }
    int levels() const { return int(deltas.size()); }
};

// Throws std::invalid_argument naming the offending entry.
void validate(const WeightSequence& w);

struct ScaleSpec {
    int level = 0;
    int base_order = 0;
    double delta = 0.0;
    int p = 2;
    int order() const { return base_order + level; }
};

// Cached eta(s_i) on the grid.
const std::vector<double>& eta_samples(const CylinderGrid& g);

// s-range selector for restricted norms; quadrature weights are trapezoid
// weights of the full grid restricted to the selected points.
using SMask = std::function<bool(double)>;

double weighted_norm(const Field& u, int k, double delta);
double weighted_norm(const Field& u, int k, double delta, const SMask& mask);
double weighted_norm_serial(const Field& u, int k, double delta);
double unweighted_norm(const Field& u, int k);

struct ProbeOptions {
    double center_spacing = 0.25;
    std::vector<double> widths{0.5, 1.0, 2.0};
    std::vector<int> t_modes{0, 1};
    int n_random = 8;
    std::uint64_t seed = 20240601;
    double edge_pad = 4.0;
};

// Hermite-type bumps (Gaussian and first Hermite function) times Fourier modes,
// plus band-limited random fields; each multiplied by exp(-delta_k eta).
std::vector<Field> probe_family(const CylinderGrid& g, double delta_k, const ProbeOptions& opt);

struct TailResult {
    double measured = 0.0;
    double bound = 0.0;
    int argmax = -1;
    int n_probes = 0;
};

TailResult embedding_tail_norm(const CylinderGrid& g, int k, double delta_k, int m, double delta_m, double R,
                               const ProbeOptions& opt = {});
TailResult embedding_tail_norm(const std::vector<Field>& probes, int k, double delta_k, int m, double delta_m,
                               double R);

struct NormScaleRow {
    int k = 0, j = 0;
    double delta_k = 0.0, delta_j = 0.0;
    double measured = 0.0;
    double bound = 0.0;  // documented constant (1 + delta_k - delta_j)^j, or NaN if none
    bool finite = true;
};

std::vector<NormScaleRow> norm_scale_check(const std::vector<ScaleSpec>& levels, const std::vector<Field>& probes);

// One-dimensional band-limited periodic function on S^1, coefficients for
// frequencies -K..K.
struct PeriodicFunction {
    int K = 0;
    std::vector<cplx> coeff;  // size 2K+1, coeff[k+K]
    double operator()(double t) const;
    PeriodicFunction derivative() const;
    static PeriodicFunction from_real_modes(int K, const std::function<cplx(int)>& c);
};

PeriodicFunction sin_mode(int k);
PeriodicFunction constant_function(double c);
// Partial sawtooth sum sum_{k<=n} sin(2 pi k t)/k scaled to unit sup norm.
PeriodicFunction sawtooth_spike(int n);

struct TranslationRow {
    double h = 0.0;
    double remainder_over_h = 0.0;
};

// Remainder ||tau(s0+hS, f0+hF) - tau(s0, f0) - h Dtau||_{C^0} / h with
// tau(s, f)(t) = f(s + t) and Dtau = S f0'(s0 + .) + F(s0 + .).
std::vector<TranslationRow> translation_diff_check(const PeriodicFunction& f0, double s0, double S,
                                                   const PeriodicFunction& F, const std::vector<double>& h_list,
                                                   int n_eval = 4096);

// Sup over the spike family (n = ceil(c/h) for c in a small set) with f0 = 0.
std::vector<TranslationRow> translation_rough_family(const std::vector<double>& h_list, int n_eval = 4096);

}  // namespace cyl
