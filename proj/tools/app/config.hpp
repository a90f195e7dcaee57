#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rabi/model.hpp"

namespace app {

using json = nlohmann::json;

// Bad config or flags; maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Range {
    double start = 0.0, stop = 0.0;
    int count = 1;
    std::vector<double> values() const;
};

// Command-line overrides. Flags win over config fields, which win over
// built-in defaults.
struct Overrides {
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<int> jobs;
    std::optional<double> tol_step, tol_root, tol_unitarity;
    std::optional<int> quad_points;
    bool unwrap = false;
    bool resume = false;
};

json load_config(const std::string& path);

// Applies flag overrides onto the config document itself so the header echo
// reflects what actually ran.
void apply_overrides(json& cfg, const Overrides& o);

rabi::ModelParams read_params(const json& cfg, const std::string& key = "params");
rabi::NumericPolicy read_policy(const json& cfg);
Range read_range(const json& node, const std::string& where);

double number_at(const json& node, const std::string& key, const std::string& where,
                 std::optional<double> fallback = {});
int int_at(const json& node, const std::string& key, const std::string& where,
           std::optional<int> fallback = {});
std::string string_at(const json& node, const std::string& key, const std::string& where,
                      std::optional<std::string> fallback = {});
bool bool_at(const json& node, const std::string& key, const std::string& where, bool fallback);

// Rejects keys outside `allowed`, so typos surface as diagnostics.
void check_keys(const json& node, const std::vector<std::string>& allowed, const std::string& where);

}  // namespace app
