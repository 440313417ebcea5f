#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyl {

using cplx = std::complex<double>;

class GridError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Truncated cylinder [-s_max, s_max] x S^1, S^1 = R/Z.
struct CylinderGrid {
    double s_max = 0.0;
    int n_s = 0;
    int n_t = 0;

    double h_s() const { return 2.0 * s_max / (n_s - 1); }
    double h_t() const { return 1.0 / n_t; }
    double s(int i) const { return -s_max + i * h_s(); }
    double t(int j) const { return j * h_t(); }
    int center() const { return (n_s - 1) / 2; }
    bool operator==(const CylinderGrid& o) const {
        return s_max == o.s_max && n_s == o.n_s && n_t == o.n_t;
    }
};

CylinderGrid make_grid(double s_max, int n_s, int n_t);
// n_s chosen so that h_s is as close to h as possible with n_s odd.
CylinderGrid grid_from_spacing(double s_max, double h, int n_t);

// Values stored (s-index, t-index, component), complex.
struct Field {
    CylinderGrid grid;
    int dim = 1;
    std::vector<cplx> data;

    Field() = default;
    Field(const CylinderGrid& g, int d) : grid(g), dim(d), data(std::size_t(g.n_s) * g.n_t * d) {}

    std::size_t idx(int i, int j, int c = 0) const {
        return (std::size_t(i) * grid.n_t + j) * dim + c;
    }
    cplx& operator()(int i, int j, int c = 0) { return data[idx(i, j, c)]; }
    const cplx& operator()(int i, int j, int c = 0) const { return data[idx(i, j, c)]; }
    std::size_t size() const { return data.size(); }
    // values in one s-slice: n_t * dim entries
    std::size_t slice() const { return std::size_t(grid.n_t) * dim; }

    Field& operator+=(const Field& o);
    Field& operator-=(const Field& o);
    Field& operator*=(double a);
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double a, Field b);

bool same_shape(const Field& a, const Field& b);
double max_abs(const Field& f);
double max_abs_diff(const Field& a, const Field& b);

template <class F>
Field sample_field(const CylinderGrid& g, int dim, F&& f) {
    Field u(g, dim);
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j)
            for (int c = 0; c < dim; ++c) u(i, j, c) = f(g.s(i), g.t(j), c);
    return u;
}

// (shift_field(xi, R))(s) = xi(s + R), zero outside the grid. Grid multiples
// are exact index shifts; otherwise 4-point Lagrange interpolation in s.
Field shift_field(const Field& xi, double R);
bool is_grid_multiple(const CylinderGrid& g, double R, int* steps = nullptr);
double snap_to_grid(const CylinderGrid& g, double R);
Field shift_steps(const Field& xi, int steps);

// beta(s) = g(s+1) / (g(s+1) + g(1-s)), g(x) = exp(-1/x) for x > 0.
double cutoff_beta(double s);
double cutoff_beta_ds(double s);

// |s| mollified by a symmetric bump of radius 1/2.
double weight_eta(double s);
double weight_eta_ds(double s);

constexpr int kMaxSOrder = 4;
constexpr int kMaxTOrder = 4;

Field diff_s(const Field& u, int order = 1);
Field diff_t(const Field& u, int order = 1);
Field diff_s_serial(const Field& u, int order = 1);
Field diff_t_serial(const Field& u, int order = 1);

// Real n_t x n_t spectral differentiation matrix (row-major), Nyquist mode
// annihilated for odd orders.
const std::vector<double>& spectral_diff_matrix(int n_t, int order);

// First-derivative stencil on an n-point uniform grid with spacing h:
// returns (first column, weights) such that du/ds(i) = sum_k w[k] u[first+k].
struct Stencil {
    int first = 0;
    double w[6] = {0, 0, 0, 0, 0, 0};
    int len = 0;
};
Stencil ds_stencil(int n, int i, double h);
Stencil dss_stencil(int n, int i, double h);

void write_field_csv(const Field& u, const std::string& path);
Field read_field_csv(const std::string& path);

}  // namespace cyl
