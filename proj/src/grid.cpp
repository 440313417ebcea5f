#include "cyl/grid.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace cyl {

CylinderGrid make_grid(double s_max, int n_s, int n_t) {
    if (!(s_max > 0.0) || !std::isfinite(s_max))
        throw GridError("grid: s_max must be positive and finite");
    if (n_s % 2 == 0) throw GridError("grid: n_s must be odd (s = 0 must be a grid point)");
    if (n_s < 3) throw GridError("grid: n_s must be at least 3");
    if (n_t < 4) throw GridError("grid: n_t must be at least 4");
    return CylinderGrid{s_max, n_s, n_t};
}

CylinderGrid grid_from_spacing(double s_max, double h, int n_t) {
    if (!(h > 0.0)) throw GridError("grid: spacing must be positive");
    int half = std::max(3, int(std::lround(s_max / h)));
    return make_grid(s_max, 2 * half + 1, n_t);
}

Field& Field::operator+=(const Field& o) {
    if (!same_shape(*this, o)) throw GridError("field: shape mismatch");
    for (std::size_t k = 0; k < data.size(); ++k) data[k] += o.data[k];
    return *this;
}
Field& Field::operator-=(const Field& o) {
    if (!same_shape(*this, o)) throw GridError("field: shape mismatch");
    for (std::size_t k = 0; k < data.size(); ++k) data[k] -= o.data[k];
    return *this;
}
Field& Field::operator*=(double a) {
    for (auto& v : data) v *= a;
    return *this;
}
Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double a, Field b) { return b *= a; }

bool same_shape(const Field& a, const Field& b) { return a.grid == b.grid && a.dim == b.dim; }

double max_abs(const Field& f) {
    double m = 0.0;
    for (const auto& v : f.data) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Field& a, const Field& b) {
    if (!same_shape(a, b)) throw GridError("field: shape mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k) m = std::max(m, std::abs(a.data[k] - b.data[k]));
    return m;
}

bool is_grid_multiple(const CylinderGrid& g, double R, int* steps) {
    double x = R / g.h_s();
    double n = std::round(x);
    bool ok = std::abs(x - n) < 1e-9;
    if (ok && steps) *steps = int(n);
    return ok;
}

double snap_to_grid(const CylinderGrid& g, double R) { return std::round(R / g.h_s()) * g.h_s(); }

Field shift_steps(const Field& xi, int steps) {
    Field out(xi.grid, xi.dim);
    const int n = xi.grid.n_s;
    const std::size_t sl = xi.slice();
    for (int i = 0; i < n; ++i) {
        int src = i + steps;
        if (src < 0 || src >= n) continue;
        std::copy_n(xi.data.begin() + std::size_t(src) * sl, sl, out.data.begin() + std::size_t(i) * sl);
    }
    return out;
}

Field shift_field(const Field& xi, double R) {
    int steps = 0;
    if (is_grid_multiple(xi.grid, R, &steps)) return shift_steps(xi, steps);
    Field out(xi.grid, xi.dim);
    const int n = xi.grid.n_s;
    const std::size_t sl = xi.slice();
    const double off = R / xi.grid.h_s();
    for (int i = 0; i < n; ++i) {
        double x = i + off;
        int b = int(std::floor(x));
        double f = x - b;
        // Lagrange weights on nodes b-1, b, b+1, b+2
        double w[4] = {-f * (f - 1) * (f - 2) / 6.0, (f + 1) * (f - 1) * (f - 2) / 2.0,
                       -(f + 1) * f * (f - 2) / 2.0, (f + 1) * f * (f - 1) / 6.0};
        for (int k = 0; k < 4; ++k) {
            int src = b - 1 + k;
            if (src < 0 || src >= n) continue;
            for (std::size_t q = 0; q < sl; ++q)
                out.data[std::size_t(i) * sl + q] += w[k] * xi.data[std::size_t(src) * sl + q];
        }
    }
    return out;
}

namespace {

double g_fun(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
double g_der(double x) { return x > 0.0 ? std::exp(-1.0 / x) / (x * x) : 0.0; }

double bump(double y) {
    double q = 1.0 - 4.0 * y * y;
    return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
}

double integrate(double a, double b, auto&& f) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 8, 1e-13);
}

double bump_mass() {
    static const double z = integrate(-0.5, 0.5, bump);
    return z;
}

}  // namespace

double cutoff_beta(double s) {
    double a = g_fun(s + 1.0), b = g_fun(1.0 - s);
    return a / (a + b);
}

double cutoff_beta_ds(double s) {
    double a = g_fun(s + 1.0), b = g_fun(1.0 - s);
    double den = (a + b) * (a + b);
    return (g_der(s + 1.0) * b + a * g_der(1.0 - s)) / den;
}

// The quadratures are expensive and the same grid abscissae recur, so the
// values inside the bump are memoized per thread.
double weight_eta(double s) {
    if (std::abs(s) >= 0.5) return std::abs(s);
    thread_local std::unordered_map<double, double> memo;
    if (auto it = memo.find(s); it != memo.end()) return it->second;
    double left = integrate(-0.5, s, [s](double y) { return bump(y) * (s - y); });
    double right = integrate(s, 0.5, [s](double y) { return bump(y) * (y - s); });
    return memo[s] = (left + right) / bump_mass();
}

double weight_eta_ds(double s) {
    if (s >= 0.5) return 1.0;
    if (s <= -0.5) return -1.0;
    thread_local std::unordered_map<double, double> memo;
    if (auto it = memo.find(s); it != memo.end()) return it->second;
    double F = integrate(-0.5, s, bump) / bump_mass();
    return memo[s] = 2.0 * F - 1.0;
}

Stencil ds_stencil(int n, int i, double h) {
    Stencil st;
    st.len = 5;
    static const double c0[5] = {-25, 48, -36, 16, -3};
    static const double c1[5] = {-3, -10, 18, -6, 1};
    static const double cc[5] = {1, -8, 0, 8, -1};
    const double* c;
    double sign = 1.0;
    if (i == 0) {
        c = c0, st.first = 0;
    } else if (i == 1) {
        c = c1, st.first = 0;
    } else if (i == n - 1) {
        c = c0, st.first = n - 5, sign = -1.0;
    } else if (i == n - 2) {
        c = c1, st.first = n - 5, sign = -1.0;
    } else {
        c = cc, st.first = i - 2;
    }
    for (int k = 0; k < 5; ++k) {
        double v = (sign > 0) ? c[k] : -c[4 - k];
        st.w[k] = v / (12.0 * h);
    }
    return st;
}

Stencil dss_stencil(int n, int i, double h) {
    Stencil st;
    static const double c0[6] = {45, -154, 214, -156, 61, -10};
    static const double c1[6] = {10, -15, -4, 14, -6, 1};
    static const double cc[5] = {-1, 16, -30, 16, -1};
    double sc = 1.0 / (12.0 * h * h);
    if (i <= 1 || i >= n - 2) {
        const double* c = (i == 0 || i == n - 1) ? c0 : c1;
        st.len = 6;
        if (i <= 1) {
            st.first = 0;
            for (int k = 0; k < 6; ++k) st.w[k] = c[k] * sc;
        } else {
            st.first = n - 6;
            for (int k = 0; k < 6; ++k) st.w[k] = c[5 - k] * sc;
        }
    } else {
        st.len = 5;
        st.first = i - 2;
        for (int k = 0; k < 5; ++k) st.w[k] = cc[k] * sc;
    }
    return st;
}

namespace {

Field apply_s_stencil(const Field& u, bool second, bool parallel) {
    if (u.grid.n_s < 7) throw GridError("diff_s: grid too small");
    Field out(u.grid, u.dim);
    const int n = u.grid.n_s;
    const double h = u.grid.h_s();
    const std::size_t sl = u.slice();
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < n; ++i) {
        Stencil st = second ? dss_stencil(n, i, h) : ds_stencil(n, i, h);
        cplx* o = out.data.data() + std::size_t(i) * sl;
        for (int k = 0; k < st.len; ++k) {
            const cplx* src = u.data.data() + std::size_t(st.first + k) * sl;
            for (std::size_t q = 0; q < sl; ++q) o[q] += st.w[k] * src[q];
        }
    }
    return out;
}

Field diff_s_impl(const Field& u, int order, bool parallel) {
    if (order < 0 || order > kMaxSOrder)
        throw GridError("diff_s: order " + std::to_string(order) + " exceeds supported maximum " +
                        std::to_string(kMaxSOrder));
    switch (order) {
        case 0: return u;
        case 1: return apply_s_stencil(u, false, parallel);
        case 2: return apply_s_stencil(u, true, parallel);
        case 3: return apply_s_stencil(apply_s_stencil(u, true, parallel), false, parallel);
        default: return apply_s_stencil(apply_s_stencil(u, true, parallel), true, parallel);
    }
}

Field diff_t_impl(const Field& u, int order, bool parallel) {
    if (order < 0 || order > kMaxTOrder)
        throw GridError("diff_t: order " + std::to_string(order) + " exceeds supported maximum " +
                        std::to_string(kMaxTOrder));
    if (order == 0) return u;
    const auto& D = spectral_diff_matrix(u.grid.n_t, order);
    const int nt = u.grid.n_t, dim = u.dim;
    Field out(u.grid, dim);
#pragma omp parallel for schedule(static) if (parallel)
    for (int i = 0; i < u.grid.n_s; ++i) {
        for (int j = 0; j < nt; ++j)
            for (int jj = 0; jj < nt; ++jj) {
                double d = D[std::size_t(j) * nt + jj];
                for (int c = 0; c < dim; ++c) out(i, j, c) += d * u(i, jj, c);
            }
    }
    return out;
}

}  // namespace

Field diff_s(const Field& u, int order) { return diff_s_impl(u, order, true); }
Field diff_s_serial(const Field& u, int order) { return diff_s_impl(u, order, false); }
Field diff_t(const Field& u, int order) { return diff_t_impl(u, order, true); }
Field diff_t_serial(const Field& u, int order) { return diff_t_impl(u, order, false); }

const std::vector<double>& spectral_diff_matrix(int n_t, int order) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n_t, order);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<double> D(std::size_t(n_t) * n_t, 0.0);
    const double tau = 2.0 * std::numbers::pi;
    int kmin = -(n_t / 2), kmax = (n_t - 1) / 2;
    for (int j = 0; j < n_t; ++j)
        for (int jj = 0; jj < n_t; ++jj) {
            cplx acc = 0.0;
            for (int k = kmin; k <= kmax; ++k) {
                if (n_t % 2 == 0 && k == kmin && order % 2 == 1) continue;
                cplx sym = std::pow(cplx(0.0, tau * k), order);
                acc += sym * std::exp(cplx(0.0, tau * k * (j - jj) / double(n_t)));
            }
            D[std::size_t(j) * n_t + jj] = acc.real() / n_t;
        }
    return cache.emplace(key, std::move(D)).first->second;
}

void write_field_csv(const Field& u, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.precision(17);
    os << "# cylfield v1\n";
    os << "# s_max=" << u.grid.s_max << " n_s=" << u.grid.n_s << " n_t=" << u.grid.n_t
       << " target_dim=" << u.dim << "\n";
    os << "s,t,component,re,im\n";
    for (int i = 0; i < u.grid.n_s; ++i)
        for (int j = 0; j < u.grid.n_t; ++j)
            for (int c = 0; c < u.dim; ++c)
                os << u.grid.s(i) << ',' << u.grid.t(j) << ',' << c << ',' << u(i, j, c).real() << ','
                   << u(i, j, c).imag() << '\n';
}

Field read_field_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(is, line);
    if (line != "# cylfield v1") throw std::runtime_error("field file: unsupported version header");
    std::getline(is, line);
    double s_max = 0;
    int n_s = 0, n_t = 0, dim = 0;
    if (std::sscanf(line.c_str(), "# s_max=%lf n_s=%d n_t=%d target_dim=%d", &s_max, &n_s, &n_t, &dim) != 4)
        throw std::runtime_error("field file: malformed grid header");
    Field u(make_grid(s_max, n_s, n_t), dim);
    std::getline(is, line);
    for (int i = 0; i < n_s; ++i)
        for (int j = 0; j < n_t; ++j)
            for (int c = 0; c < dim; ++c) {
                if (!std::getline(is, line)) throw std::runtime_error("field file: truncated");
                double s, t, re, im;
                int cc;
                if (std::sscanf(line.c_str(), "%lf,%lf,%d,%lf,%lf", &s, &t, &cc, &re, &im) != 5 || cc != c)
                    throw std::runtime_error("field file: malformed row");
                u(i, j, c) = cplx(re, im);
            }
    return u;
}

}  // namespace cyl
