#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cyl/grid.hpp"
#include "cyl/scales.hpp"

namespace cyl {

// Flat "dotted.key = value" text. Lists are comma separated; '#' starts a
// comment. Unknown keys, bad values and cross-field violations are all
// collected and reported together.
using ConfigValue = std::variant<double, long, std::string, std::vector<double>, std::vector<long>, std::vector<std::string>>;

enum class KeyType { Real, Integer, Text, Reals, Integers, Texts };

struct KeySpec {
    std::string name;
    KeyType type;
    std::string default_value;
    std::string doc;
};

// every key the runner understands, in canonical order
const std::vector<KeySpec>& config_schema();

struct ConfigError : std::runtime_error {
    std::vector<std::string> fields;  // one "key: message" per problem
    explicit ConfigError(std::vector<std::string> f);
};

class ExperimentConfig {
public:
    ExperimentConfig();  // schema defaults (the acceptance configuration)

    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    std::string serialize() const;  // canonical form, schema order
    std::uint64_t hash() const;     // FNV-1a of serialize()
    std::string hash_hex() const;

    void set(const std::string& key, const std::string& value);  // throws ConfigError
    void validate() const;                                       // throws ConfigError

    double real(const std::string& key) const;
    long integer(const std::string& key) const;
    const std::string& text(const std::string& key) const;
    const std::vector<double>& reals(const std::string& key) const;
    const std::vector<long>& integers(const std::string& key) const;
    const std::vector<std::string>& texts(const std::string& key) const;

    // Grid for a suite prefix: "<suite>.grid.*" where set to a positive
    // value, else "grid.*".
    CylinderGrid grid(const std::string& suite = "") const;
    WeightSequence weights() const;

    bool operator==(const ExperimentConfig& o) const { return values_ == o.values_; }

private:
    std::map<std::string, ConfigValue> values_;
};

// the suites with their own grid override
const std::vector<std::string>& suite_prefixes();

std::uint64_t fnv1a(const std::string& s);

}  // namespace cyl
