#include "app/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace app {
namespace {

std::string locate(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

std::string join(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

}  // namespace

std::vector<double> Range::values() const {
    std::vector<double> v(count);
    if (count == 1) {
        v[0] = start;
        return v;
    }
    for (int i = 0; i < count; ++i) v[i] = start + (stop - start) * i / (count - 1);
    v.back() = stop;
    return v;
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    try {
        json cfg = json::parse(text);
        if (!cfg.is_object()) throw ConfigError(path + ": top level must be a JSON object");
        return cfg;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + locate(text, e.byte == 0 ? 0 : e.byte - 1) +
                          ": invalid JSON (" + e.what() + ")");
    }
}

void apply_overrides(json& cfg, const Overrides& o) {
    if (o.tol_step) cfg["policy"]["step_tol"] = *o.tol_step;
    if (o.tol_root) cfg["policy"]["root_tol"] = *o.tol_root;
    if (o.tol_unitarity) cfg["policy"]["unitarity_tol"] = *o.tol_unitarity;
    if (o.quad_points) cfg["policy"]["quad_points"] = *o.quad_points;
    if (o.unwrap) cfg["unwrap"] = true;
    if (o.format) cfg["output"]["format"] = *o.format;
}

double number_at(const json& node, const std::string& key, const std::string& where,
                 std::optional<double> fallback) {
    if (!node.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("field '" + join(where, key) + "': required");
    }
    const json& v = node.at(key);
    if (!v.is_number()) throw ConfigError("field '" + join(where, key) + "': expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError("field '" + join(where, key) + "': must be finite");
    return d;
}

int int_at(const json& node, const std::string& key, const std::string& where,
           std::optional<int> fallback) {
    if (!node.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("field '" + join(where, key) + "': required");
    }
    const json& v = node.at(key);
    if (!v.is_number_integer()) throw ConfigError("field '" + join(where, key) + "': expected an integer");
    return v.get<int>();
}

std::string string_at(const json& node, const std::string& key, const std::string& where,
                      std::optional<std::string> fallback) {
    if (!node.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("field '" + join(where, key) + "': required");
    }
    const json& v = node.at(key);
    if (!v.is_string()) throw ConfigError("field '" + join(where, key) + "': expected a string");
    return v.get<std::string>();
}

bool bool_at(const json& node, const std::string& key, const std::string& where, bool fallback) {
    if (!node.contains(key)) return fallback;
    const json& v = node.at(key);
    if (!v.is_boolean()) throw ConfigError("field '" + join(where, key) + "': expected true or false");
    return v.get<bool>();
}

void check_keys(const json& node, const std::vector<std::string>& allowed, const std::string& where) {
    if (!node.is_object())
        throw ConfigError("field '" + (where.empty() ? std::string("<root>") : where) + "': expected an object");
    for (const auto& [k, _] : node.items())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError("field '" + join(where, k) + "': unknown key");
}

rabi::ModelParams read_params(const json& cfg, const std::string& key) {
    const json node = cfg.contains(key) ? cfg.at(key) : json::object();
    check_keys(node, {"delta", "epsilon", "amplitude", "omega"}, key);
    rabi::ModelParams p;
    p.delta = number_at(node, "delta", key, 0.0);
    p.epsilon = number_at(node, "epsilon", key, 0.0);
    p.amplitude = number_at(node, "amplitude", key, 0.0);
    p.omega = number_at(node, "omega", key, 1.0);
    try {
        p.validate();
    } catch (const std::exception& e) {
        throw ConfigError("field '" + key + "': " + e.what());
    }
    return p;
}

rabi::NumericPolicy read_policy(const json& cfg) {
    rabi::NumericPolicy pol;
    if (!cfg.contains("policy")) return pol;
    const json& node = cfg.at("policy");
    check_keys(node, {"step_tol", "quad_points", "unitarity_tol", "root_tol"}, "policy");
    pol.step_tol = number_at(node, "step_tol", "policy", pol.step_tol);
    pol.quad_points = int_at(node, "quad_points", "policy", pol.quad_points);
    pol.unitarity_tol = number_at(node, "unitarity_tol", "policy", pol.unitarity_tol);
    pol.root_tol = number_at(node, "root_tol", "policy", pol.root_tol);
    try {
        pol.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("field 'policy': ") + e.what());
    }
    return pol;
}

Range read_range(const json& node, const std::string& where) {
    if (node.is_number()) return {node.get<double>(), node.get<double>(), 1};
    check_keys(node, {"start", "stop", "count"}, where);
    Range r;
    r.start = number_at(node, "start", where);
    r.stop = number_at(node, "stop", where);
    r.count = int_at(node, "count", where);
    if (r.count < 1) throw ConfigError("field '" + where + ".count': must be at least 1");
    if (r.count == 1 && r.start != r.stop)
        throw ConfigError("field '" + where + ".count': a range with start != stop needs count >= 2");
    return r;
}

}  // namespace app
