#include "cyl/floer.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cyl/scales.hpp"
#include "json.hpp"

namespace cyl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_a(double a) {
    if (!(a > 0.0 && a < kTwoPi)) throw std::invalid_argument("model parameter a must lie in (0, 2 pi)");
}

void check_n(int n) {
    if (n < 1 || n > 4) throw std::invalid_argument("target dimension must be in 1..4");
}

double spectral_gap(double a) { return std::min(a, kTwoPi - a); }

std::string fmt_param(double x) {
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

}  // namespace

Vec realify(const cplx* z, int n) {
    Vec v(2 * n);
    for (int c = 0; c < n; ++c) {
        v[2 * c] = z[c].real();
        v[2 * c + 1] = z[c].imag();
    }
    return v;
}

void complexify(const Vec& v, cplx* z) {
    for (int c = 0; c < v.size() / 2; ++c) z[c] = cplx(v[2 * c], v[2 * c + 1]);
}

Mat standard_J(int n) {
    Mat J = Mat::Zero(2 * n, 2 * n);
    for (int c = 0; c < n; ++c) {
        J(2 * c, 2 * c + 1) = -1.0;
        J(2 * c + 1, 2 * c) = 1.0;
    }
    return J;
}

LinearModel::LinearModel(double a, int n) : a_(a), n_(n) {
    check_a(a);
    check_n(n);
}
std::string LinearModel::id() const { return "linear(a=" + fmt_param(a_) + ",n=" + std::to_string(n_) + ")"; }
Vec LinearModel::X(const Vec& z) const { return a_ * (standard_J(n_) * z); }
Mat LinearModel::DX(const Vec&) const { return a_ * standard_J(n_); }
double LinearModel::delta_decay() const { return spectral_gap(a_); }
double LinearModel::gap_info() const { return spectral_gap(a_); }

double model_chi(double rho) {
    if (rho <= 1.0) return 1.0;
    if (rho >= 4.0) return 0.0;
    return cutoff_beta((5.0 - 2.0 * rho) / 3.0);
}

double model_chi_d(double rho) {
    if (rho <= 1.0 || rho >= 4.0) return 0.0;
    return cutoff_beta_ds((5.0 - 2.0 * rho) / 3.0) * (-2.0 / 3.0);
}

PerturbedModel::PerturbedModel(double a, double eps, int n) : a_(a), eps_(eps), n_(n) {
    check_a(a);
    check_n(n);
}
std::string PerturbedModel::id() const {
    return "perturbed(a=" + fmt_param(a_) + ",eps=" + fmt_param(eps_) + ",n=" + std::to_string(n_) + ")";
}

Vec PerturbedModel::X(const Vec& z) const {
    cplx zc[4];
    complexify(z, zc);
    const double chi = model_chi(z.squaredNorm());
    cplx out[4];
    for (int c = 0; c < n_; ++c) out[c] = cplx(0.0, a_) * zc[c] + eps_ * chi * std::conj(zc[c]) * std::conj(zc[c]);
    return realify(out, n_);
}

Mat PerturbedModel::DX(const Vec& z) const {
    cplx zc[4];
    complexify(z, zc);
    const double rho = z.squaredNorm();
    const double chi = model_chi(rho), chid = model_chi_d(rho);
    Mat D(2 * n_, 2 * n_);
    for (int col = 0; col < 2 * n_; ++col) {
        Vec e = Vec::Zero(2 * n_);
        e[col] = 1.0;
        cplx xi[4];
        complexify(e, xi);
        const double drho = 2.0 * z.dot(e);
        cplx out[4];
        for (int c = 0; c < n_; ++c) {
            cplx zb = std::conj(zc[c]);
            out[c] = cplx(0.0, a_) * xi[c] + eps_ * (chid * drho * zb * zb + chi * 2.0 * zb * std::conj(xi[c]));
        }
        D.col(col) = realify(out, n_);
    }
    return D;
}
double PerturbedModel::delta_decay() const { return spectral_gap(a_); }
double PerturbedModel::gap_info() const { return spectral_gap(a_); }

TwistedModel::TwistedModel(double a, double eps, int n) : a_(a), eps_(eps), n_(n) {
    check_a(a);
    check_n(n);
}
std::string TwistedModel::id() const {
    return "twisted(a=" + fmt_param(a_) + ",eps=" + fmt_param(eps_) + ",n=" + std::to_string(n_) + ")";
}

double TwistedModel::theta(const Vec& z) const { return eps_ * model_chi(z.squaredNorm()) * z[0]; }

Vec TwistedModel::dtheta(const Vec& z) const {
    const double rho = z.squaredNorm();
    Vec d = eps_ * model_chi_d(rho) * 2.0 * z[0] * z;
    d[0] += eps_ * model_chi(rho);
    return d;
}

namespace {

Mat shear_N(int n) {
    Mat N = Mat::Zero(2 * n, 2 * n);
    for (int c = 0; c < n; ++c) N(2 * c, 2 * c + 1) = 1.0;
    return N;
}

}  // namespace

Mat TwistedModel::J(const Vec& z) const {
    const Mat I = Mat::Identity(2 * n_, 2 * n_), N = shear_N(n_);
    const double th = theta(z);
    return (I + th * N) * standard_J(n_) * (I - th * N);
}

Mat TwistedModel::DJ_times(const Vec& z, const Vec& v) const {
    const Mat I = Mat::Identity(2 * n_, 2 * n_), N = shear_N(n_), J0 = standard_J(n_);
    const double th = theta(z);
    const Mat dJ = N * J0 * (I - th * N) - (I + th * N) * J0 * N;
    const Vec w = dJ * v;
    return w * dtheta(z).transpose();
}

Vec TwistedModel::X(const Vec& z) const { return a_ * (standard_J(n_) * z); }
Mat TwistedModel::DX(const Vec&) const { return a_ * standard_J(n_); }
double TwistedModel::delta_decay() const { return spectral_gap(a_); }
double TwistedModel::gap_info() const { return spectral_gap(a_); }

std::unique_ptr<HamiltonianModel> make_model(const std::string& kind, double a, double eps, int n) {
    if (kind == "linear") return std::make_unique<LinearModel>(a, n);
    if (kind == "perturbed") return std::make_unique<PerturbedModel>(a, eps, n);
    if (kind == "twisted") return std::make_unique<TwistedModel>(a, eps, n);
    throw std::invalid_argument("unknown model '" + kind + "' (expected linear, perturbed or twisted)");
}

Field floer_residual(const HamiltonianModel& M, const Field& g) { return floer_residual(M, g, diff_s(g)); }

Field floer_residual(const HamiltonianModel& M, const Field& g, const Field& g_s) {
    if (g.dim != M.dim()) throw std::invalid_argument("field dimension does not match the model");
    const Field gt = diff_t(g);
    Field out(g.grid, g.dim);
    const int n = g.dim;
    const long pts = long(g.grid.n_s) * g.grid.n_t;
#pragma omp parallel for schedule(static)
    for (long p = 0; p < pts; ++p) {
        const std::size_t o = std::size_t(p) * n;
        Vec z = realify(&g.data[o], n);
        Vec zt = realify(&gt.data[o], n);
        Vec zs = realify(&g_s.data[o], n);
        Vec r = zs + M.J(z) * (zt - M.X(z));
        complexify(r, &out.data[o]);
    }
    return out;
}

double energy(const HamiltonianModel& M, const Field& g) {
    const Field gs = diff_s(g), gt = diff_t(g);
    const auto& G = g.grid;
    const int n = g.dim;
    double total = 0.0;
    for (int i = 0; i < G.n_s; ++i) {
        double w = (i == 0 || i == G.n_s - 1) ? 0.5 * G.h_s() : G.h_s();
        double row = 0.0;
        for (int j = 0; j < G.n_t; ++j) {
            const std::size_t o = g.idx(i, j);
            Vec z = realify(&g.data[o], n);
            Vec a = realify(&gs.data[o], n);
            Vec b = realify(&gt.data[o], n) - M.X(z);
            row += a.squaredNorm() + b.squaredNorm();
        }
        total += w * row * G.h_t();
    }
    return total;
}

Mat zero_order_coef(const HamiltonianModel& M, const Vec& z, const Vec& zt, LinVariant v) {
    Mat Z = -M.J(z) * M.DX(z);
    if (!M.constant_J()) {
        Z -= M.DJ_times(z, M.X(z));
        if (v == LinVariant::Full) Z += M.DJ_times(z, zt);
    }
    return Z;
}

FieldOperator linearize_cr(const HamiltonianModel& M, const Field& base, LinVariant v) {
    if (base.dim != M.dim()) throw std::invalid_argument("field dimension does not match the model");
    const auto& g = base.grid;
    const int n = base.dim, nn = 2 * n;
    FieldOperator L = empty_operator(g, n, 1, 1);
    L.term(0, 0, Deriv::Ds, 0);
    L.term(0, 0, Deriv::Dt, 0);
    L.term(0, 0, Deriv::Id, 0);
    auto& Cs = L.term(0, 0, Deriv::Ds, 0).coef;
    auto& Ct = L.term(0, 0, Deriv::Dt, 0).coef;
    auto& Ci = L.term(0, 0, Deriv::Id, 0).coef;
    const Field gt = diff_t(base);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) {
            const std::size_t o = base.idx(i, j), p = L.pidx(i, j);
            Vec z = realify(&base.data[o], n);
            Vec zt = realify(&gt.data[o], n);
            Mat J = M.J(z);
            Mat Z = zero_order_coef(M, z, zt, v);
            for (int r = 0; r < nn; ++r)
                for (int c = 0; c < nn; ++c) {
                    Cs[p + r * nn + c] = r == c ? 1.0 : 0.0;
                    Ct[p + r * nn + c] = J(r, c);
                    Ci[p + r * nn + c] = Z(r, c);
                }
        }
    return L;
}

namespace {

Field strip_ends(Field f) {
    const std::size_t sl = f.slice();
    std::fill(f.data.begin(), f.data.begin() + sl, cplx(0.0));
    std::fill(f.data.end() - sl, f.data.end(), cplx(0.0));
    return f;
}

bool finite(const Field& f) {
    for (const auto& z : f.data)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

}  // namespace

Trajectory solve_trajectory(const HamiltonianModel& M, const Field& guess, const SolveOptions& opt) {
    Trajectory T;
    T.model_id = M.id();
    T.gamma = guess;
    const auto& g = guess.grid;
    const Layout lay = make_layout(g, guess.dim, full_windows(g, 1), true);
    auto residual_norm = [&](const Field& r) { return weighted_norm(strip_ends(r), 0, opt.weight); };

    Field res = floer_residual(M, T.gamma);
    double rn = residual_norm(res);
    T.residual_history.push_back(rn);
    for (int it = 0; it < opt.max_iter && rn > opt.tol; ++it) {
        FieldOperator L = linearize_cr(M, T.gamma, LinVariant::Full);
        Eigen::SparseMatrix<double> A = assemble_sparse(L, lay, lay);
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.analyzePattern(A);
        lu.factorize(A);
        if (lu.info() != Eigen::Success) {
            T.diagnostic = "Jacobian singular at iteration " + std::to_string(it) + ": " + lu.lastErrorMessage();
            break;
        }
        Eigen::VectorXd step = lu.solve(-pack(lay, {res}));
        T.gamma += unpack(lay, step)[0];
        res = floer_residual(M, T.gamma);
        if (!finite(res)) {
            T.diagnostic = "divergence: non-finite residual at iteration " + std::to_string(it + 1);
            break;
        }
        rn = residual_norm(res);
        T.residual_history.push_back(rn);
        T.iterations = it + 1;
    }
    T.residual_norm = rn;
    T.converged = rn <= opt.tol && T.diagnostic.empty();
    if (!T.converged && T.diagnostic.empty())
        T.diagnostic = "no convergence after " + std::to_string(opt.max_iter) + " iterations, residual " +
                       std::to_string(rn);
    T.decay_rate = decay_rate(T.gamma);
    T.energy = energy(M, T.gamma);
    return T;
}

double decay_rate(const Field& g, TailSide side) {
    const Field gs = diff_s(g);
    const auto& G = g.grid;
    auto fit = [&](int sign) -> double {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (int i = 0; i < G.n_s; ++i) {
            double s = G.s(i);
            if (s * sign <= 0) continue;
            double a = std::abs(s);
            if (a < 0.5 * G.s_max || a > G.s_max - 1.0) continue;
            double m = 0.0;
            for (int j = 0; j < G.n_t; ++j)
                for (int c = 0; c < g.dim; ++c) m = std::max(m, std::abs(gs(i, j, c)));
            if (!(m > 1e-300)) continue;
            double y = std::log(m);
            sx += a;
            sy += y;
            sxx += a * a;
            sxy += a * y;
            ++cnt;
        }
        if (cnt < 3) return kInfiniteRate;
        double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
        return -slope;
    };
    if (side == TailSide::Left) return fit(-1);
    if (side == TailSide::Right) return fit(+1);
    return std::min(fit(-1), fit(+1));
}

void save_trajectory(const Trajectory& T, const std::string& field_path, const std::string& meta_path) {
    write_field_csv(T.gamma, field_path);
    nlohmann::json j;
    j["model_id"] = T.model_id;
    j["residual_norm"] = T.residual_norm;
    j["decay_rate"] = std::isfinite(T.decay_rate) ? nlohmann::json(T.decay_rate) : nlohmann::json("inf");
    j["energy"] = T.energy;
    j["converged"] = T.converged;
    j["iterations"] = T.iterations;
    j["residual_history"] = T.residual_history;
    std::ofstream os(meta_path);
    if (!os) throw std::runtime_error("cannot write " + meta_path);
    os << j.dump(2) << "\n";
}

Trajectory load_trajectory(const std::string& field_path, const std::string& meta_path) {
    Trajectory T;
    T.gamma = read_field_csv(field_path);
    std::ifstream is(meta_path);
    if (!is) throw std::runtime_error("cannot read " + meta_path);
    nlohmann::json j = nlohmann::json::parse(is);
    T.model_id = j.at("model_id").get<std::string>();
    T.residual_norm = j.at("residual_norm").get<double>();
    T.decay_rate = j.at("decay_rate").is_string() ? kInfiniteRate : j.at("decay_rate").get<double>();
    T.energy = j.at("energy").get<double>();
    T.converged = j.at("converged").get<bool>();
    T.iterations = j.value("iterations", 0);
    if (j.contains("residual_history")) T.residual_history = j["residual_history"].get<std::vector<double>>();
    return T;
}

}  // namespace cyl
