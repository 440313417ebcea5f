#include "cyl/scales.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>

namespace cyl {

void validate(const WeightSequence& w) {
    if (w.deltas.empty()) throw std::invalid_argument("weights.deltas: empty weight sequence");
    for (std::size_t m = 0; m < w.deltas.size(); ++m) {
        if (!(w.deltas[m] > 0.0))
            throw std::invalid_argument("weights.deltas[" + std::to_string(m) + "]: must be positive");
        if (m > 0 && !(w.deltas[m] > w.deltas[m - 1]))
            throw std::invalid_argument("weights.deltas[" + std::to_string(m) + "]: must be strictly increasing");
    }
    if (!(w.deltas.back() < w.delta_cap))
        throw std::invalid_argument("weights.delta_cap: must exceed every delta_m");
}

const std::vector<double>& eta_samples(const CylinderGrid& g) {
    static std::mutex mu;
    static std::map<std::pair<double, int>, std::vector<double>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(g.s_max, g.n_s);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<double> e(g.n_s);
    for (int i = 0; i < g.n_s; ++i) e[i] = weight_eta(g.s(i));
    return cache.emplace(key, std::move(e)).first->second;
}

namespace {

double norm_impl(const Field& u, int k, double delta, const SMask* mask, bool parallel) {
    if (k < 0 || k > std::min(kMaxSOrder, kMaxTOrder))
        throw std::invalid_argument("weighted_norm: order " + std::to_string(k) + " not supported");
    if (delta < 0.0) throw std::invalid_argument("weighted_norm: delta must be nonnegative");
    for (const auto& v : u.data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw std::invalid_argument("weighted_norm: non-finite values in field");
    const CylinderGrid& g = u.grid;
    const auto& eta = eta_samples(g);
    Field z = u;
    if (delta != 0.0) {
        const std::size_t sl = u.slice();
        for (int i = 0; i < g.n_s; ++i) {
            double w = std::exp(delta * eta[i]);
            for (std::size_t q = 0; q < sl; ++q) z.data[std::size_t(i) * sl + q] *= w;
        }
    }
    std::vector<double> wq(g.n_s, g.h_s() * g.h_t());
    wq.front() *= 0.5;
    wq.back() *= 0.5;
    if (mask)
        for (int i = 0; i < g.n_s; ++i)
            if (!(*mask)(g.s(i))) wq[i] = 0.0;
    double acc = 0.0;
    for (int a = 0; a <= k; ++a) {
        Field za = parallel ? diff_s(z, a) : diff_s_serial(z, a);
        for (int b = 0; a + b <= k; ++b) {
            Field zab = parallel ? diff_t(za, b) : diff_t_serial(za, b);
            const std::size_t sl = zab.slice();
            for (int i = 0; i < g.n_s; ++i) {
                if (wq[i] == 0.0) continue;
                double row = 0.0;
                for (std::size_t q = 0; q < sl; ++q) row += std::norm(zab.data[std::size_t(i) * sl + q]);
                acc += wq[i] * row;
            }
        }
    }
    return std::sqrt(acc);
}

}  // namespace

double weighted_norm(const Field& u, int k, double delta) { return norm_impl(u, k, delta, nullptr, true); }
double weighted_norm(const Field& u, int k, double delta, const SMask& mask) {
    return norm_impl(u, k, delta, &mask, true);
}
double weighted_norm_serial(const Field& u, int k, double delta) { return norm_impl(u, k, delta, nullptr, false); }
double unweighted_norm(const Field& u, int k) { return norm_impl(u, k, 0.0, nullptr, true); }

std::vector<Field> probe_family(const CylinderGrid& g, double delta_k, const ProbeOptions& opt) {
    std::vector<Field> out;
    const auto& eta = eta_samples(g);
    const double lim = g.s_max - opt.edge_pad;
    const double tau = 2.0 * std::numbers::pi;
    for (double w : opt.widths)
        for (int q : opt.t_modes)
            for (int herm = 0; herm < 2; ++herm) {
                int nc = int(std::floor(lim / opt.center_spacing));
                for (int ic = -nc; ic <= nc; ++ic) {
                    double c = ic * opt.center_spacing;
                    if (std::abs(c) + 3.0 * w > lim) continue;
                    Field u(g, 1);
                    for (int i = 0; i < g.n_s; ++i) {
                        double x = (g.s(i) - c) / w;
                        double env = std::exp(-0.5 * x * x) * (herm ? x : 1.0) * std::exp(-delta_k * eta[i]);
                        for (int j = 0; j < g.n_t; ++j) u(i, j) = env * std::exp(cplx(0.0, tau * q * g.t(j)));
                    }
                    out.push_back(std::move(u));
                }
            }
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    for (int r = 0; r < opt.n_random; ++r) {
        // random band-limited: a few random Gaussian bumps with random t-modes
        Field u(g, 1);
        for (int b = 0; b < 6; ++b) {
            double c = (2.0 * std::uniform_real_distribution<double>(0, 1)(rng) - 1.0) * (lim - 4.0);
            double w = 0.5 + 2.5 * std::uniform_real_distribution<double>(0, 1)(rng);
            int q = int(std::uniform_int_distribution<int>(-2, 2)(rng));
            cplx amp(nd(rng), nd(rng));
            for (int i = 0; i < g.n_s; ++i) {
                double x = (g.s(i) - c) / w;
                double env = std::exp(-0.5 * x * x - delta_k * eta[i]);
                for (int j = 0; j < g.n_t; ++j) u(i, j) += amp * env * std::exp(cplx(0.0, tau * q * g.t(j)));
            }
        }
        out.push_back(std::move(u));
    }
    return out;
}

TailResult embedding_tail_norm(const std::vector<Field>& probes, int k, double delta_k, int m, double delta_m,
                               double R) {
    if (probes.empty()) throw std::invalid_argument("embedding_tail_norm: probe family empty");
    if (!(k > m)) throw std::invalid_argument("embedding_tail_norm: need k > m");
    if (!(delta_k > delta_m)) throw std::invalid_argument("embedding_tail_norm: need delta_k > delta_m");
    TailResult r;
    r.bound = std::exp(-(delta_k - delta_m) * R);
    r.n_probes = int(probes.size());
    SMask tail = [R](double s) { return std::abs(s) >= R - 1e-12; };
    std::vector<double> ratio(probes.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int p = 0; p < int(probes.size()); ++p) {
        double den = weighted_norm(probes[p], k, delta_k);
        if (den == 0.0) continue;
        ratio[p] = weighted_norm(probes[p], m, delta_m, tail) / den;
    }
    for (int p = 0; p < int(probes.size()); ++p)
        if (ratio[p] > r.measured) r.measured = ratio[p], r.argmax = p;
    return r;
}

TailResult embedding_tail_norm(const CylinderGrid& g, int k, double delta_k, int m, double delta_m, double R,
                               const ProbeOptions& opt) {
    if (R < 1.0) throw std::invalid_argument("embedding_tail_norm: need R >= 1");
    if (R + opt.edge_pad > g.s_max) throw std::invalid_argument("embedding_tail_norm: R + margin exceeds s_max");
    return embedding_tail_norm(probe_family(g, delta_k, opt), k, delta_k, m, delta_m, R);
}

std::vector<NormScaleRow> norm_scale_check(const std::vector<ScaleSpec>& levels, const std::vector<Field>& probes) {
    if (levels.size() < 2) throw std::invalid_argument("norm_scale_check: need at least two levels");
    std::vector<NormScaleRow> rows;
    std::vector<std::vector<double>> norms(levels.size(), std::vector<double>(probes.size()));
    for (std::size_t a = 0; a < levels.size(); ++a)
        for (std::size_t p = 0; p < probes.size(); ++p)
            norms[a][p] = weighted_norm(probes[p], levels[a].order(), levels[a].delta);
    for (std::size_t a = 0; a < levels.size(); ++a)
        for (std::size_t b = 0; b < levels.size(); ++b) {
            // pairs k > j; a repeated level yields a degenerate pair with ratio 1
            bool degenerate = a < b && levels[a].level == levels[b].level;
            if (!(levels[a].level > levels[b].level) && !degenerate) continue;
            NormScaleRow row;
            row.k = levels[a].level;
            row.j = levels[b].level;
            row.delta_k = levels[a].delta;
            row.delta_j = levels[b].delta;
            row.bound = std::numeric_limits<double>::quiet_NaN();
            for (std::size_t p = 0; p < probes.size(); ++p) {
                double hi = norms[a][p], lo = norms[b][p];
                if (!std::isfinite(hi) || !std::isfinite(lo) || hi == 0.0) {
                    row.finite = false;
                    continue;
                }
                row.measured = std::max(row.measured, lo / hi);
            }
            rows.push_back(row);
        }
    return rows;
}

double PeriodicFunction::operator()(double t) const {
    const double tau = 2.0 * std::numbers::pi;
    cplx acc = 0.0;
    for (int k = -K; k <= K; ++k) acc += coeff[std::size_t(k + K)] * std::exp(cplx(0.0, tau * k * t));
    return acc.real();
}

PeriodicFunction PeriodicFunction::derivative() const {
    PeriodicFunction d = *this;
    const double tau = 2.0 * std::numbers::pi;
    for (int k = -K; k <= K; ++k) d.coeff[std::size_t(k + K)] *= cplx(0.0, tau * k);
    return d;
}

PeriodicFunction PeriodicFunction::from_real_modes(int K, const std::function<cplx(int)>& c) {
    PeriodicFunction f;
    f.K = K;
    f.coeff.resize(std::size_t(2 * K + 1));
    for (int k = -K; k <= K; ++k) f.coeff[std::size_t(k + K)] = c(k);
    return f;
}

PeriodicFunction sin_mode(int k0) {
    return PeriodicFunction::from_real_modes(std::abs(k0), [k0](int k) {
        if (k == k0) return cplx(0.0, -0.5);
        if (k == -k0) return cplx(0.0, 0.5);
        return cplx(0.0);
    });
}

PeriodicFunction constant_function(double c) {
    return PeriodicFunction::from_real_modes(0, [c](int) { return cplx(c); });
}

PeriodicFunction sawtooth_spike(int n) {
    PeriodicFunction f = PeriodicFunction::from_real_modes(n, [](int k) {
        if (k == 0) return cplx(0.0);
        return cplx(0.0, -0.5 / k);
    });
    double sup = 0.0;
    int ne = std::max(4096, 64 * n);
    for (int q = 0; q < ne; ++q) sup = std::max(sup, std::abs(f(double(q) / ne)));
    for (auto& c : f.coeff) c /= sup;
    return f;
}

namespace {

PeriodicFunction add_scaled(const PeriodicFunction& a, double h, const PeriodicFunction& b) {
    int K = std::max(a.K, b.K);
    return PeriodicFunction::from_real_modes(K, [&](int k) {
        cplx v = 0.0;
        if (std::abs(k) <= a.K) v += a.coeff[std::size_t(k + a.K)];
        if (std::abs(k) <= b.K) v += h * b.coeff[std::size_t(k + b.K)];
        return v;
    });
}

}  // namespace

std::vector<TranslationRow> translation_diff_check(const PeriodicFunction& f0, double s0, double S,
                                                   const PeriodicFunction& F, const std::vector<double>& h_list,
                                                   int n_eval) {
    std::vector<TranslationRow> rows;
    PeriodicFunction df0 = f0.derivative();
    int ne = std::max(n_eval, 16 * std::max(f0.K, F.K));
    for (double h : h_list) {
        if (!(h > 0.0)) throw std::invalid_argument("translation_diff_check: steps must be positive");
        PeriodicFunction fh = add_scaled(f0, h, F);
        double sup = 0.0;
        for (int q = 0; q < ne; ++q) {
            double t = double(q) / ne;
            double r = fh(s0 + h * S + t) - f0(s0 + t) - h * (S * df0(s0 + t) + F(s0 + t));
            sup = std::max(sup, std::abs(r));
        }
        rows.push_back({h, sup / h});
    }
    return rows;
}

std::vector<TranslationRow> translation_rough_family(const std::vector<double>& h_list, int n_eval) {
    std::vector<TranslationRow> rows;
    PeriodicFunction zero = constant_function(0.0);
    for (double h : h_list) {
        double best = 0.0;
        for (double c : {0.5, 1.0, 2.0}) {
            int n = std::max(1, int(std::ceil(c / h)));
            auto r = translation_diff_check(zero, 0.0, 1.0, sawtooth_spike(n), {h}, n_eval);
            best = std::max(best, r[0].remainder_over_h);
        }
        rows.push_back({h, best});
    }
    return rows;
}

}  // namespace cyl
