#include "cyl/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace cyl {

Csv::Csv(std::vector<std::string> header) : header_(std::move(header)) {}

void Csv::add(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw std::logic_error("csv: row width does not match the header");
    rows_.push_back(std::move(cells));
}

std::string Csv::cell(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x == 0.0 ? 0.0 : x);  // no "-0"
    return buf;
}

std::string Csv::str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& c) {
        for (std::size_t i = 0; i < c.size(); ++i) out += (i ? "," : "") + c[i];
        out += "\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

std::string num(double x, int digits) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) x = 0.0;  // no "-0"
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

std::string list(const std::vector<double>& xs, int digits) {
    std::string out = "{";
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + num(xs[i], digits);
    return out + "}";
}

nlohmann::json grid_json(const CylinderGrid& g) {
    return {{"s_max", g.s_max}, {"n_s", g.n_s}, {"n_t", g.n_t}, {"h_s", g.h_s()}};
}

nlohmann::json margin_json(const std::vector<MarginEntry>& m) {
    auto out = nlohmann::json::array();
    for (const auto& e : m)
        out.push_back({{"suite", e.suite},
                       {"R", e.R},
                       {"s_max", e.s_max},
                       {"margin", e.margin},
                       {"required", e.required},
                       {"weighted", e.weighted},
                       {"ok", e.ok()}});
    return out;
}

void write_text(const std::string& dir, const std::string& name, const std::string& content) {
    std::filesystem::create_directories(dir);
    std::ofstream f(std::filesystem::path(dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + dir + "/" + name);
    f << content;
}

}  // namespace cyl
