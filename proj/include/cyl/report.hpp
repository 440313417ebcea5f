#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cyl/grid.hpp"

namespace cyl {

// CSV text with a fixed header; numbers are printed with %.10g so that equal
// inputs give byte-identical files.
class Csv {
public:
    explicit Csv(std::vector<std::string> header);

    template <class... T>
    void row(const T&... xs) {
        std::vector<std::string> cells{cell(xs)...};
        add(std::move(cells));
    }
    void add(std::vector<std::string> cells);
    std::string str() const;
    std::size_t rows() const { return rows_.size(); }

    static std::string cell(double x);
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(long x) { return std::to_string(x); }
    static std::string cell(std::size_t x) { return std::to_string(x); }
    static std::string cell(bool x) { return x ? "1" : "0"; }
    static std::string cell(const std::string& x) { return x; }
    static std::string cell(const char* x) { return x; }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// short human formatting used in pass/fail lines
std::string num(double x, int digits = 3);
std::string list(const std::vector<double>& xs, int digits = 3);

nlohmann::json grid_json(const CylinderGrid& g);

struct MarginEntry {
    std::string suite;
    double R = 0.0, s_max = 0.0;
    double margin = 0.0, required = 0.0;
    bool weighted = false;
    bool ok() const { return margin >= required - 1e-12; }
};

nlohmann::json margin_json(const std::vector<MarginEntry>& m);

// writes `content` to dir/name, creating dir
void write_text(const std::string& dir, const std::string& name, const std::string& content);

}  // namespace cyl
