#include "cyl/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace cyl {

namespace {

using K = KeyType;

std::vector<KeySpec> build_schema() {
    std::vector<KeySpec> s = {
        {"seed", K::Integer, "1", "base seed of every random stream (--seed overrides)"},
        {"output.dir", K::Text, "out", "artifact directory (--out overrides)"},
        {"model.a", K::Real, "1", "Hamiltonian X(z) = i a z + ..."},
        {"model.eps", K::Real, "0.05", "strength of the perturbed/twisted nonlinearity"},
        {"model.dim", K::Integer, "1", "complex dimension n"},
        {"grid.s_max", K::Real, "152", "default grid half length"},
        {"grid.n_s", K::Integer, "609", "default grid points in s (odd)"},
        {"grid.n_t", K::Integer, "8", "default grid points in t"},
        {"weights.delta", K::Reals, "0.1,0.2,0.3,0.4", "delta_0 < delta_1 < ..."},
        {"weights.cap", K::Real, "0.5", "delta_cap, above every delta_m"},

        {"scales.necks", K::Reals, "2,4,6", "tail cut points R"},
        {"scales.pairs", K::Texts, "1:0,2:1", "embedding pairs k:m with k > m"},
        {"scales.probes", K::Integer, "4", "random probes per family"},

        {"linop.n_t", K::Integer, "16", "t points of d/dt"},
        {"linop.levels", K::Integers, "0,1,2,3", "levels of d/dt"},
        {"linop.h", K::Reals, "0.1,0.05,0.025,0.0125", "translation difference steps"},

        {"floer.models", K::Texts, "linear,perturbed,twisted", "models solved"},

        {"glue.necks", K::Reals, "45,55,70", "neck lengths R"},
        {"glue.models", K::Texts, "perturbed,twisted", "models of the reassembly check"},
        {"glue.kappa", K::Real, "0.5", "decay rate of the synthetic trajectories"},

        {"iia.models", K::Texts, "linear,perturbed", ""},
        {"iia.levels", K::Integers, "1", ""},
        {"iia.necks", K::Reals, "45,60", "r = 0 is always included"},
        {"iia.sizes", K::Reals, "1e-2,3e-3,1e-3", "||e - e'|| over a decade"},
        {"iia.base_size", K::Real, "0.05", "||e||"},
        {"iia.probes", K::Integer, "6", ""},

        {"iib.models", K::Texts, "perturbed", ""},
        {"iib.levels", K::Integers, "1", ""},
        {"iib.necks", K::Reals, "45,50,55,60,65,70,75", ""},
        {"iib.kappa", K::Real, "1", "decay rate of the synthetic trajectories"},
        {"iib.probes", K::Integer, "6", ""},

        {"index.models", K::Texts, "linear", ""},
        {"index.necks", K::Reals, "45,60,100", "r = 0 is always included"},
        {"index.levels", K::Integers, "0,1", ""},
        {"index.control_delta", K::Real, "1.5", "negative control weight past the first eigenvalue (0 = off)"},

        {"germ.models", K::Texts, "linear,perturbed", ""},
        {"germ.neck", K::Real, "45", ""},
        {"germ.level", K::Integer, "1", ""},
        {"germ.probes", K::Integer, "6", ""},
        {"germ.directions", K::Integer, "2", "parameter directions p_j"},

        {"contraction.models", K::Texts, "linear,perturbed", ""},
        {"contraction.levels", K::Integers, "1,2", ""},
        {"contraction.radius", K::Real, "0.1", "largest radius eps"},
        {"contraction.halvings", K::Integer, "3", "radii eps, eps/2, ..."},
        {"contraction.samples", K::Integer, "32", "compared against twice as many"},

        {"picard.models", K::Texts, "linear,perturbed", ""},
        {"picard.level", K::Integer, "1", ""},
        {"picard.v_norm", K::Real, "1e-3", "|v|"},
        {"picard.tol", K::Real, "1e-12", "step tolerance"},
        {"picard.max_iter", K::Integer, "50", ""},
        {"picard.abort_eps", K::Real, "3", "nonlinearity of the abort control (0 = off)"},
        {"picard.abort_v", K::Real, "1", "|v| of the abort control"},

        {"tol.identity", K::Real, "1e-10", "gluing identity max error"},
        {"tol.reassembly", K::Real, "1e-10", "coefficient discrepancy"},
        {"tol.sv_gap", K::Real, "10", ""},
        {"tol.kernel_rate", K::Real, "0.9", "kernel rate >= factor * delta_1"},
        {"tol.tail_bound", K::Real, "1.05", "tail norm <= factor * e^{-(dk - dm) R}"},
        {"tol.tail_fit", K::Real, "0.1", "relative error of the tail exponent"},
        {"tol.iia_spread", K::Real, "1.3", "max/min ratio over the size sweep"},
        {"tol.decay_rate", K::Real, "0.9", "fitted rate >= factor * delta_{m+1}"},
        {"tol.theta_sampling", K::Real, "0.1", "relative change when samples double"},
        {"tol.theta_fit", K::Real, "0.2", "line through the origin"},
        {"tol.picard_ratio", K::Real, "2", "theta / factor <= first step ratio <= factor * theta"},
        {"tol.picard_residual", K::Real, "1e-8", ""},
        {"tol.rough_floor", K::Real, "0.1", "lower bound of the rough translation family"},
        {"tol.solver_residual", K::Real, "1e-10", "Newton residual"},
    };
    // per-suite grid overrides, 0 = inherit
    const std::vector<std::pair<std::string, std::vector<std::string>>> grids = {
        {"scales", {"24", "481", "8"}},   {"floer", {"3", "241", "8"}},        {"glue", {"80", "3201", "32"}},
        {"iia", {"112", "449", "8"}},     {"iib", {"170", "681", "8"}},        {"index", {"0", "0", "0"}},
        {"index.control", {"51", "341", "8"}}, {"germ", {"98", "393", "8"}},
    };
    for (const auto& [p, d] : grids) {
        s.push_back({p + ".grid.s_max", K::Real, d[0], "0 = grid.s_max"});
        s.push_back({p + ".grid.n_s", K::Integer, d[1], "0 = grid.n_s"});
        s.push_back({p + ".grid.n_t", K::Integer, d[2], "0 = grid.n_t"});
    }
    return s;
}

std::string trim(const std::string& x) {
    auto a = x.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    auto b = x.find_last_not_of(" \t\r");
    return x.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& x) {
    std::vector<std::string> out;
    if (trim(x).empty()) return out;
    std::stringstream ss(x);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

bool parse_real(const std::string& x, double& v) {
    if (x.empty()) return false;
    errno = 0;
    char* end = nullptr;
    v = std::strtod(x.c_str(), &end);
    return errno == 0 && end == x.c_str() + x.size() && std::isfinite(v);
}

bool parse_int(const std::string& x, long& v) {
    if (x.empty()) return false;
    errno = 0;
    char* end = nullptr;
    v = std::strtol(x.c_str(), &end, 10);
    return errno == 0 && end == x.c_str() + x.size();
}

// shortest representation that reads back exactly
std::string fmt(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
    return out;
}

std::string render(const ConfigValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, double>) return fmt(x);
            else if constexpr (std::is_same_v<T, long>) return std::to_string(x);
            else if constexpr (std::is_same_v<T, std::string>) return x;
            else if constexpr (std::is_same_v<T, std::vector<double>>) return join(x, fmt);
            else if constexpr (std::is_same_v<T, std::vector<long>>) return join(x, [](long a) { return std::to_string(a); });
            else return join(x, [](const std::string& a) { return a; });
        },
        v);
}

// returns an error message or ""
std::string convert(const KeySpec& k, const std::string& raw, ConfigValue& out) {
    std::string x = trim(raw);
    switch (k.type) {
        case K::Real: {
            double v;
            if (!parse_real(x, v)) return "expected a finite number, got '" + x + "'";
            out = v;
            return "";
        }
        case K::Integer: {
            long v;
            if (!parse_int(x, v)) return "expected an integer, got '" + x + "'";
            out = v;
            return "";
        }
        case K::Text:
            if (x.find(',') != std::string::npos) return "expected a single value";
            out = x;
            return "";
        case K::Reals: {
            std::vector<double> v;
            for (const auto& e : split(x)) {
                double d;
                if (!parse_real(e, d)) return "expected a list of finite numbers, bad item '" + e + "'";
                v.push_back(d);
            }
            out = v;
            return "";
        }
        case K::Integers: {
            std::vector<long> v;
            for (const auto& e : split(x)) {
                long d;
                if (!parse_int(e, d)) return "expected a list of integers, bad item '" + e + "'";
                v.push_back(d);
            }
            out = v;
            return "";
        }
        case K::Texts:
            out = split(x);
            return "";
    }
    return "unsupported type";
}

const KeySpec* find_key(const std::string& name) {
    for (const auto& k : config_schema())
        if (k.name == name) return &k;
    return nullptr;
}

template <class T>
const T& get(const std::map<std::string, ConfigValue>& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) throw std::out_of_range("config: unknown key " + key);
    return std::get<T>(it->second);
}

}  // namespace

const std::vector<KeySpec>& config_schema() {
    static const std::vector<KeySpec> s = build_schema();
    return s;
}

const std::vector<std::string>& suite_prefixes() {
    static const std::vector<std::string> p = {"scales", "floer", "glue", "iia", "iib", "index", "index.control", "germ"};
    return p;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ConfigError::ConfigError(std::vector<std::string> f)
    : std::runtime_error([&] {
          std::string m = "invalid configuration:";
          for (const auto& x : f) m += "\n  " + x;
          return m;
      }()),
      fields(std::move(f)) {}

ExperimentConfig::ExperimentConfig() {
    for (const auto& k : config_schema()) {
        ConfigValue v;
        std::string err = convert(k, k.default_value, v);
        if (!err.empty()) throw std::logic_error("schema default of " + k.name + ": " + err);
        values_[k.name] = v;
    }
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    const KeySpec* k = find_key(key);
    if (!k) throw ConfigError({key + ": unknown key"});
    ConfigValue v;
    std::string err = convert(*k, value, v);
    if (!err.empty()) throw ConfigError({key + ": " + err});
    values_[key] = v;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig c;
    std::vector<std::string> errors;
    std::set<std::string> seen;
    std::stringstream in(text);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(no) + ": expected key = value");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        if (!seen.insert(key).second) {
            errors.push_back(key + ": given twice (line " + std::to_string(no) + ")");
            continue;
        }
        try {
            c.set(key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            for (const auto& f : e.fields) errors.push_back(f + " (line " + std::to_string(no) + ")");
        }
    }
    if (!errors.empty()) throw ConfigError(errors);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError({"--config: cannot read " + path});
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

std::string ExperimentConfig::serialize() const {
    std::string out;
    for (const auto& k : config_schema()) out += k.name + " = " + render(values_.at(k.name)) + "\n";
    return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(serialize()); }

std::string ExperimentConfig::hash_hex() const {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

double ExperimentConfig::real(const std::string& key) const { return get<double>(values_, key); }
long ExperimentConfig::integer(const std::string& key) const { return get<long>(values_, key); }
const std::string& ExperimentConfig::text(const std::string& key) const { return get<std::string>(values_, key); }
const std::vector<double>& ExperimentConfig::reals(const std::string& key) const {
    return get<std::vector<double>>(values_, key);
}
const std::vector<long>& ExperimentConfig::integers(const std::string& key) const {
    return get<std::vector<long>>(values_, key);
}
const std::vector<std::string>& ExperimentConfig::texts(const std::string& key) const {
    return get<std::vector<std::string>>(values_, key);
}

CylinderGrid ExperimentConfig::grid(const std::string& suite) const {
    double s_max = real("grid.s_max");
    long n_s = integer("grid.n_s"), n_t = integer("grid.n_t");
    if (!suite.empty()) {
        if (real(suite + ".grid.s_max") > 0) s_max = real(suite + ".grid.s_max");
        if (integer(suite + ".grid.n_s") > 0) n_s = integer(suite + ".grid.n_s");
        if (integer(suite + ".grid.n_t") > 0) n_t = integer(suite + ".grid.n_t");
    }
    return make_grid(s_max, int(n_s), int(n_t));
}

WeightSequence ExperimentConfig::weights() const { return WeightSequence{reals("weights.delta"), real("weights.cap")}; }

void ExperimentConfig::validate() const {
    std::vector<std::string> err;
    auto need = [&](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) err.push_back(key + ": " + msg);
    };

    need(integer("seed") >= 0, "seed", "must be non-negative");
    need(!text("output.dir").empty(), "output.dir", "must not be empty");
    need(real("model.a") > 0, "model.a", "must be positive");
    need(real("model.eps") >= 0, "model.eps", "must be non-negative");
    need(integer("model.dim") >= 1 && integer("model.dim") <= 4, "model.dim", "must be in 1..4");

    // grids
    auto check_grid = [&](const std::string& prefix) {
        std::string p = prefix.empty() ? "grid" : prefix + ".grid";
        std::string sm = p + ".s_max", ns = p + ".n_s", nt = p + ".n_t";
        if (!prefix.empty()) {
            need(real(sm) >= 0, sm, "must be 0 (inherit) or positive");
            need(integer(ns) >= 0, ns, "must be 0 (inherit) or positive");
            need(integer(nt) >= 0, nt, "must be 0 (inherit) or positive");
        }
        bool own_ns = prefix.empty() || integer(ns) > 0;
        bool own_nt = prefix.empty() || integer(nt) > 0;
        try {
            CylinderGrid g = grid(prefix);
            need(g.n_s >= 7, own_ns ? ns : "grid.n_s", "must be at least 7 (fourth-order s stencil)");
            need(g.n_t % 2 == 0, own_nt ? nt : "grid.n_t", "must be even");
        } catch (const GridError& e) {
            std::string what = e.what();
            std::string key = what.find("n_s") != std::string::npos ? (own_ns ? ns : "grid.n_s")
                              : what.find("n_t") != std::string::npos ? (own_nt ? nt : "grid.n_t")
                                                                      : sm;
            err.push_back(key + ": " + what.substr(what.find(':') + 2));
        }
    };
    check_grid("");
    for (const auto& p : suite_prefixes()) check_grid(p);

    WeightSequence ws = weights();
    try {
        cyl::validate(ws);
    } catch (const std::invalid_argument& e) {
        std::string what = e.what();
        err.push_back((what.find("cap") != std::string::npos ? std::string("weights.cap") : "weights.delta") +
                      what.substr(what.find(':')));
    }
    const int n_w = ws.levels();

    for (const char* key : {"floer.models", "glue.models", "iia.models", "iib.models", "index.models", "germ.models",
                            "contraction.models", "picard.models"}) {
        for (const auto& m : texts(key))
            need(m == "linear" || m == "perturbed" || m == "twisted", key, "unknown model '" + m + "'");
    }
    for (const char* key : {"iia.models", "iib.models", "index.models", "germ.models", "contraction.models",
                            "picard.models"})
        need(!texts(key).empty(), key, "needs at least one model");

    auto check_levels = [&](const std::string& key, const std::vector<long>& lv, int lo, int extra) {
        need(!lv.empty(), key, "needs at least one level");
        for (long m : lv)
            need(m >= lo && m + extra < n_w, key,
                 "level " + std::to_string(m) + " needs " + std::to_string(lo) + " <= m and a weight delta_" +
                     std::to_string(m + extra));
    };
    check_levels("iia.levels", integers("iia.levels"), 1, 0);
    check_levels("iib.levels", integers("iib.levels"), 1, 1);
    check_levels("index.levels", integers("index.levels"), 0, 0);
    check_levels("contraction.levels", integers("contraction.levels"), 1, 0);
    check_levels("germ.level", {integer("germ.level")}, 1, 0);
    check_levels("picard.level", {integer("picard.level")}, 1, 0);
    need(!integers("linop.levels").empty(), "linop.levels", "needs at least one level");
    for (long m : integers("linop.levels")) need(m >= 0 && m <= 6, "linop.levels", "levels must be in 0..6");

    for (const auto& pr : texts("scales.pairs")) {
        long k = -1, m = -1;
        auto c = pr.find(':');
        bool ok = c != std::string::npos && parse_int(pr.substr(0, c), k) && parse_int(pr.substr(c + 1), m);
        need(ok && k > m && m >= 0 && k < n_w, "scales.pairs",
             "'" + pr + "' must be k:m with 0 <= m < k < " + std::to_string(n_w));
    }
    for (double R : reals("scales.necks")) need(R >= 1, "scales.necks", "R must be >= 1");
    need(integer("linop.n_t") >= 4 && integer("linop.n_t") % 2 == 0, "linop.n_t", "must be even and >= 4");
    for (double h : reals("linop.h")) need(h > 0 && h < 1, "linop.h", "steps must be in (0, 1)");

    // necks: hard lower bound 42, truncation margin 5/delta_0 where weights act
    const double margin = 5.0 / ws.deltas.at(0);
    auto check_necks = [&](const std::string& key, const std::vector<double>& necks, const std::string& grid_prefix,
                           bool weighted, double need_margin) {
        CylinderGrid g;
        try {
            g = grid(grid_prefix);
        } catch (const GridError&) {
            return;  // already reported
        }
        for (double R : necks) {
            if (!(R > 42)) {
                err.push_back(key + ": R = " + fmt(R) + " must exceed 42");
                continue;
            }
            double s_need = R + 1.0 + (weighted ? need_margin : 1.0);
            if (g.s_max < s_need) {
                std::string gk = (grid_prefix.empty() || real(grid_prefix + ".grid.s_max") <= 0)
                                     ? std::string("grid.s_max")
                                     : grid_prefix + ".grid.s_max";
                err.push_back(key + ": R = " + fmt(R) + " needs " + gk + " >= " + fmt(s_need) + " (margin " +
                              (weighted ? fmt(need_margin) + " = 5/delta_0" : std::string("1")) + ")");
            }
        }
    };
    need(!reals("glue.necks").empty(), "glue.necks", "needs at least one neck");
    check_necks("glue.necks", reals("glue.necks"), "glue", false, margin);
    check_necks("iia.necks", reals("iia.necks"), "iia", true, margin);
    need(reals("iib.necks").size() >= 2, "iib.necks", "needs at least two necks for a rate");
    check_necks("iib.necks", reals("iib.necks"), "iib", true, margin);
    check_necks("index.necks", reals("index.necks"), "index", true, margin);
    check_necks("germ.neck", {real("germ.neck")}, "germ", true, margin);
    double cd = real("index.control_delta");
    need(cd >= 0, "index.control_delta", "must be 0 (off) or positive");
    if (cd > 0) {
        std::vector<double> first = {reals("index.necks").empty() ? 45.0 : reals("index.necks").front()};
        check_necks("index.control_delta", first, "index.control", true, 5.0 / cd);
    }

    need(!reals("iia.sizes").empty(), "iia.sizes", "needs at least one size");
    for (double x : reals("iia.sizes")) need(x >= 0, "iia.sizes", "sizes must be non-negative");
    need(real("iia.base_size") > 0, "iia.base_size", "must be positive");
    need(real("glue.kappa") > 0, "glue.kappa", "must be positive");
    need(real("iib.kappa") > 0, "iib.kappa", "must be positive");
    for (const char* key : {"scales.probes", "iia.probes", "iib.probes", "germ.probes", "germ.directions",
                            "contraction.samples", "picard.max_iter"})
        need(integer(key) >= 1, key, "must be at least 1");
    need(integer("contraction.halvings") >= 1, "contraction.halvings", "must be at least 1");
    need(real("contraction.radius") > 0, "contraction.radius", "must be positive");
    need(real("picard.v_norm") >= 0, "picard.v_norm", "must be non-negative");
    need(real("picard.tol") > 0, "picard.tol", "must be positive");
    need(real("picard.abort_eps") >= 0, "picard.abort_eps", "must be 0 (off) or positive");
    need(real("picard.abort_v") > 0, "picard.abort_v", "must be positive");
    for (const auto& k : config_schema())
        if (k.name.rfind("tol.", 0) == 0) need(real(k.name) > 0, k.name, "must be positive");

    if (!err.empty()) throw ConfigError(err);
}

}  // namespace cyl
