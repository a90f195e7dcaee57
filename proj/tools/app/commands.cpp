#include "app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "app/output.hpp"
#include "app/pool.hpp"
#include "rabi/chrw.hpp"
#include "rabi/errors.hpp"
#include "rabi/floquet.hpp"
#include "rabi/geometry.hpp"
#include "rabi/perturbation.hpp"
#include "rabi/propagator.hpp"
#include "rabi/resonance.hpp"

namespace app {
namespace {

using rabi::ModelParams;
using rabi::NumericPolicy;
using Values = std::map<std::string, Cell>;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string output_path(const json& cfg, const Overrides& o) {
    if (o.out) return *o.out;
    if (cfg.contains("output")) return string_at(cfg.at("output"), "path", "output", "");
    return "";
}

std::string output_format(const json& cfg) {
    std::string f = "csv";
    if (cfg.contains("output")) {
        check_keys(cfg.at("output"), {"path", "format"}, "output");
        f = string_at(cfg.at("output"), "format", "output", "csv");
    }
    if (f != "csv" && f != "json") throw ConfigError("field 'output.format': expected \"csv\" or \"json\"");
    return f;
}

json base_header(const std::string& command, const json& cfg, const NumericPolicy& pol) {
    json h;
    h["tool"] = kToolVersion;
    h["command"] = command;
    h["config"] = cfg;
    h["policy"] = {{"step_tol", pol.step_tol},
                   {"quad_points", pol.quad_points},
                   {"unitarity_tol", pol.unitarity_tol},
                   {"root_tol", pol.root_tol},
                   {"degeneracy_tol", rabi::kDegeneracyTol},
                   {"singular_tol", rabi::kSingularTol}};
    h["conventions"] = {{"total_phase", "(-pi, pi]"},
                        {"aa_phase", "[0, 2pi), gamma_minus = 2pi - gamma_plus"},
                        {"quasienergy", "q = -theta/T folded to [-omega/2, omega/2)"},
                        {"second_order_rabi", "frequency = sqrt(printed right-hand side)"}};
    return h;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
    return out;
}

// Deterministic row of cells in column order; absent values become NaN.
Row assemble(const std::vector<std::string>& columns, const Values& v) {
    Row r;
    r.reserve(columns.size());
    for (const auto& c : columns) {
        auto it = v.find(c);
        r.push_back(it == v.end() ? Cell(kNaN) : it->second);
    }
    return r;
}

double as_double(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    return kNaN;
}

Cell flag(bool b) { return Cell(static_cast<std::int64_t>(b ? 1 : 0)); }

void put_policy(Values& v, const NumericPolicy& pol) {
    v["step_tol"] = pol.step_tol;
    v["quad_points"] = static_cast<std::int64_t>(pol.quad_points);
    v["unitarity_tol"] = pol.unitarity_tol;
    v["root_tol"] = pol.root_tol;
}

const std::vector<std::string> kPolicyColumns = {"step_tol", "quad_points", "unitarity_tol", "root_tol"};

void put_state(Values& v, const std::string& suffix, const rabi::Vec2& s) {
    v["_psi0r" + suffix] = s(0).real();
    v["_psi0i" + suffix] = s(0).imag();
    v["_psi1r" + suffix] = s(1).real();
    v["_psi1i" + suffix] = s(1).imag();
}

// ---------------------------------------------------------------- journal --

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

json row_to_json(const Row& r) {
    json a = json::array();
    for (const Cell& c : r) {
        if (const auto* d = std::get_if<double>(&c))
            a.push_back(std::isfinite(*d) ? json(*d) : json(nullptr));
        else if (const auto* i = std::get_if<std::int64_t>(&c))
            a.push_back(*i);
        else
            a.push_back(std::get<std::string>(c));
    }
    return a;
}

Row row_from_json(const json& a) {
    Row r;
    for (const auto& e : a) {
        if (e.is_null())
            r.emplace_back(kNaN);
        else if (e.is_number_integer())
            r.emplace_back(e.get<std::int64_t>());
        else if (e.is_number())
            r.emplace_back(e.get<double>());
        else
            r.emplace_back(e.get<std::string>());
    }
    return r;
}

// Append-only record of finished rows so an interrupted batch can resume.
class Journal {
public:
    Journal(std::string path, const std::string& fingerprint, bool resume, std::size_t n, std::size_t width)
        : path_(std::move(path)) {
        tag_ = "rabi-journal-v1 " + std::to_string(fnv1a(fingerprint));
        if (path_.empty()) return;
        if (resume) load(n, width);
        const bool fresh = loaded_.empty();
        out_.open(path_, fresh ? std::ios::trunc : std::ios::app);
        if (!out_) throw ConfigError("cannot open journal '" + path_ + "'");
        if (fresh) out_ << tag_ << '\n' << std::flush;
    }

    const std::map<std::size_t, Row>& loaded() const { return loaded_; }

    void record(std::size_t index, const Row& r) {
        if (!out_.is_open()) return;
        out_ << index << ' ' << row_to_json(r).dump() << '\n' << std::flush;
    }

    void close() {
        if (out_.is_open()) out_.close();
    }

private:
    void load(std::size_t n, std::size_t width) {
        std::ifstream in(path_);
        if (!in) return;
        std::string line;
        if (!std::getline(in, line)) return;
        if (line != tag_)
            throw ConfigError("journal '" + path_ + "' belongs to a different configuration; "
                              "delete it or run without --resume");
        while (std::getline(in, line)) {
            const auto sp = line.find(' ');
            if (sp == std::string::npos) continue;
            try {
                const std::size_t idx = std::stoull(line.substr(0, sp));
                Row r = row_from_json(json::parse(line.substr(sp + 1)));
                if (idx < n && r.size() == width) loaded_[idx] = std::move(r);
            } catch (const std::exception&) {
                // A torn final line from an interrupted write; recompute that row.
            }
        }
    }

    std::string path_;
    std::string tag_;
    std::ofstream out_;
    std::map<std::size_t, Row> loaded_;
};

std::string journal_path(const std::string& out) { return out.empty() || out == "-" ? "" : out + ".journal"; }

// The journal outlives the batch until the dataset is safely on disk.
void write_and_retire(const Dataset& d, const std::string& out, const std::string& format) {
    write_dataset(d, out, format);
    if (const auto j = journal_path(out); !j.empty()) std::remove(j.c_str());
}

// Runs compute(i) for every i not already journaled, in parallel, and returns
// rows in index order.
template <class Compute>
std::vector<Row> batch_rows(std::size_t n, const std::vector<std::string>& columns, const json& header,
                            const std::string& out, const Overrides& o, Compute compute) {
    Journal journal(journal_path(out), header.dump() + join(columns, ","), o.resume, n, columns.size());
    std::vector<Row> rows(n);
    std::vector<bool> have(n, false);
    for (const auto& [i, r] : journal.loaded()) {
        rows[i] = r;
        have[i] = true;
    }
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < n; ++i)
        if (!have[i]) todo.push_back(i);
    const int jobs = o.jobs.value_or(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
    run_pool<Row>(todo, jobs, [&](std::size_t i) { return assemble(columns, compute(i)); },
                  [&](std::size_t i, Row&& r) {
                      journal.record(i, r);
                      rows[i] = std::move(r);
                  });
    journal.close();
    return rows;
}

// Drops internal columns (leading underscore) before writing.
Dataset visible(json header, const std::vector<std::string>& columns, const std::vector<Row>& rows) {
    Dataset d;
    d.header = std::move(header);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].empty() || columns[i][0] != '_') {
            keep.push_back(i);
            d.columns.push_back(columns[i]);
        }
    d.rows.reserve(rows.size());
    for (const Row& r : rows) {
        Row out;
        out.reserve(keep.size());
        for (std::size_t i : keep) out.push_back(r[i]);
        d.rows.push_back(std::move(out));
    }
    return d;
}

int status_exit(const std::vector<std::string>& columns, const std::vector<Row>& rows) {
    const auto it = std::find(columns.begin(), columns.end(), "status");
    if (it == columns.end()) return kOk;
    const std::size_t c = it - columns.begin();
    for (const Row& r : rows)
        if (std::get<std::string>(r[c]) != "ok") return kPartialFailure;
    return kOk;
}

std::optional<std::size_t> column_index(const std::vector<std::string>& columns, const std::string& name) {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns.begin());
}

// ------------------------------------------------------------------ sweep --

const std::set<std::string> kQuantities = {"aa_phase", "uncertainty", "quasienergy", "p_up", "bloch", "chrw",
                                           "chrw_pt", "spectrum_semiclassical", "spectrum_quantum",
                                           "resonances", "hidden_symmetry"};
const std::set<std::string> kSymbols = {"delta", "epsilon", "amplitude", "omega", "coupling"};
const std::set<std::string> kLabelings = {"theta", "chrw", "chrw_pt", "continuity"};

rabi::ResonanceMethod parse_method(const std::string& s, const std::string& where) {
    if (s == "numeric") return rabi::ResonanceMethod::numeric;
    if (s == "chrw") return rabi::ResonanceMethod::chrw;
    if (s == "second_order") return rabi::ResonanceMethod::second_order;
    throw ConfigError("field '" + where + "': unknown method '" + s + "'");
}

struct Axis {
    std::string symbol;
    std::vector<double> values;
};

struct SweepPlan {
    ModelParams base;
    NumericPolicy policy;
    double coupling = 1.0;
    int levels = 6;
    std::vector<Axis> axes;
    std::set<std::string> quantities;
    std::string labeling = "theta";
    bool unwrap = false;
    std::vector<int> orders{1, 2};
    std::vector<rabi::ResonanceMethod> methods;
    std::vector<std::string> columns;

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.values.size();
        return n;
    }
    std::size_t fast_count() const { return axes.back().values.size(); }
    bool has(const std::string& q) const { return quantities.count(q) > 0; }

    std::pair<ModelParams, double> at(std::size_t i) const {
        ModelParams p = base;
        double g = coupling;
        std::size_t rest = i;
        for (std::size_t k = axes.size(); k-- > 0;) {
            const std::size_t n = axes[k].values.size();
            const double val = axes[k].values[rest % n];
            rest /= n;
            const std::string& s = axes[k].symbol;
            if (s == "delta") p.delta = val;
            else if (s == "epsilon") p.epsilon = val;
            else if (s == "amplitude") p.amplitude = val;
            else if (s == "omega") p.omega = val;
            else g = val;
        }
        return {p, g};
    }

    bool numeric_route() const {
        return has("aa_phase") || has("uncertainty") || has("quasienergy") || has("p_up") || has("bloch") ||
               has("hidden_symmetry");
    }
};

std::vector<std::string> sweep_columns(const SweepPlan& plan) {
    std::vector<std::string> c = {"delta", "epsilon", "amplitude", "omega"};
    if (plan.has("spectrum_quantum")) c.push_back("coupling");
    auto add = [&](std::initializer_list<const char*> names) {
        for (const char* n : names) c.emplace_back(n);
    };
    if (plan.has("aa_phase")) {
        add({"theta_plus", "theta_minus", "alpha_plus", "alpha_minus", "gamma_plus", "gamma_minus"});
        if (plan.unwrap) add({"gamma_plus_unwrapped"});
        add({"degenerate"});
    }
    if (plan.has("uncertainty")) add({"s_plus", "s_minus"});
    if (plan.has("quasienergy")) add({"q_plus", "q_minus"});
    if (plan.has("p_up")) add({"p_up_min_plus", "p_up_max_plus", "p_up_min_minus", "p_up_max_minus"});
    if (plan.has("bloch")) add({"path_length_plus", "path_length_minus"});
    if (plan.has("hidden_symmetry")) add({"integer_bias", "phase_gap", "identity_distance", "not_unique"});
    if (plan.has("chrw")) {
        add({"xi", "zeta", "eps_t", "delta_t", "Xi_t", "A_t", "Omega_t", "theta_plus_chrw", "alpha_plus_chrw",
             "gamma_plus_chrw"});
        if (plan.unwrap) add({"gamma_plus_chrw_unwrapped"});
        add({"above_validity"});
    }
    if (plan.has("chrw_pt")) {
        add({"ky", "kx", "kz", "k", "L", "theta_plus_pt", "Omega_pt", "gamma_plus_pt"});
        if (plan.unwrap) add({"gamma_plus_pt_unwrapped"});
        add({"singular"});
    }
    if (plan.has("spectrum_semiclassical"))
        add({"floquet_q_lower", "floquet_q_upper", "floquet_gap", "floquet_N", "floquet_defect"});
    if (plan.has("spectrum_quantum")) {
        for (int j = 0; j < plan.levels; ++j) c.push_back("E" + std::to_string(j));
        add({"quantum_N", "quantum_defect"});
    }
    if (plan.has("resonances"))
        for (int o : plan.orders)
            for (auto m : plan.methods) {
                if (o == 2 && m == rabi::ResonanceMethod::second_order) continue;
                c.push_back("res" + std::to_string(o) + "_" + rabi::method_name(m));
            }
    add({"methods", "labeling"});
    for (const auto& s : kPolicyColumns) c.push_back(s);
    c.emplace_back("status");
    // Internal columns used by the sequential post-passes.
    if (plan.numeric_route()) {
        add({"_gamma_raw_plus", "_gamma_raw_minus"});
        for (const char* s : {"_plus", "_minus"})
            for (const char* p : {"_psi0r", "_psi0i", "_psi1r", "_psi1i"}) c.push_back(std::string(p) + s);
    }
    if (plan.has("chrw")) c.emplace_back("_gamma_raw_chrw");
    if (plan.has("chrw_pt")) c.emplace_back("_gamma_raw_pt");
    return c;
}

SweepPlan read_sweep_plan(const json& cfg) {
    check_keys(cfg, {"command", "description", "params", "sweep", "quantities", "policy", "unwrap", "labeling",
                     "coupling", "levels", "orders", "methods", "output"},
               "");
    SweepPlan plan;
    plan.base = read_params(cfg);
    plan.policy = read_policy(cfg);
    plan.coupling = number_at(cfg, "coupling", "", 1.0);
    plan.levels = int_at(cfg, "levels", "", 6);
    if (plan.levels < 2 || plan.levels > 40) throw ConfigError("field 'levels': must be in [2, 40]");
    plan.unwrap = bool_at(cfg, "unwrap", "", false);
    plan.labeling = string_at(cfg, "labeling", "", "theta");
    if (!kLabelings.count(plan.labeling))
        throw ConfigError("field 'labeling': expected one of theta, chrw, chrw_pt, continuity");

    if (!cfg.contains("sweep") || !cfg.at("sweep").is_array())
        throw ConfigError("field 'sweep': required array of {symbol, start, stop, count}");
    const json& sw = cfg.at("sweep");
    if (sw.empty() || sw.size() > 2) throw ConfigError("field 'sweep': exactly one or two symbols may be swept");
    for (std::size_t k = 0; k < sw.size(); ++k) {
        const std::string where = "sweep[" + std::to_string(k) + "]";
        check_keys(sw[k], {"symbol", "start", "stop", "count"}, where);
        Axis a;
        a.symbol = string_at(sw[k], "symbol", where);
        if (!kSymbols.count(a.symbol))
            throw ConfigError("field '" + where + ".symbol': expected delta, epsilon, amplitude, omega or coupling");
        for (const auto& other : plan.axes)
            if (other.symbol == a.symbol) throw ConfigError("field '" + where + ".symbol': swept twice");
        json range = sw[k];
        range.erase("symbol");
        a.values = read_range(range, where).values();
        plan.axes.push_back(std::move(a));
    }

    if (!cfg.contains("quantities") || !cfg.at("quantities").is_array() || cfg.at("quantities").empty())
        throw ConfigError("field 'quantities': required non-empty array");
    for (const auto& q : cfg.at("quantities")) {
        if (!q.is_string() || !kQuantities.count(q.get<std::string>()))
            throw ConfigError("field 'quantities': unknown quantity " + q.dump());
        plan.quantities.insert(q.get<std::string>());
    }
    if (cfg.contains("orders")) {
        plan.orders.clear();
        for (const auto& o : cfg.at("orders")) {
            if (!o.is_number_integer() || (o.get<int>() != 1 && o.get<int>() != 2))
                throw ConfigError("field 'orders': entries must be 1 or 2");
            plan.orders.push_back(o.get<int>());
        }
    }
    if (cfg.contains("methods")) {
        for (const auto& m : cfg.at("methods")) {
            if (!m.is_string()) throw ConfigError("field 'methods': entries must be strings");
            plan.methods.push_back(parse_method(m.get<std::string>(), "methods"));
        }
    } else {
        plan.methods = {rabi::ResonanceMethod::numeric, rabi::ResonanceMethod::chrw,
                        rabi::ResonanceMethod::second_order};
    }

    // Every grid point must be a valid model; catch that before any work.
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto [p, g] = plan.at(i);
        try {
            p.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("field 'sweep': grid point outside the valid domain: ") + e.what());
        }
        if (p.delta > 20.0 * p.omega || p.epsilon > 20.0 * p.omega || p.amplitude > 4.0 * p.omega)
            throw ConfigError("field 'sweep': grid exceeds documented brackets (delta, epsilon <= 20w, A <= 4w)");
        if (g < 0.0) throw ConfigError("field 'coupling': must be non-negative");
    }
    plan.columns = sweep_columns(plan);
    return plan;
}

std::string methods_label(const SweepPlan& plan) {
    std::vector<std::string> m;
    if (plan.numeric_route()) m.emplace_back("propagator");
    if (plan.has("chrw")) m.emplace_back("chrw");
    if (plan.has("chrw_pt")) m.emplace_back("chrw_pt");
    if (plan.has("spectrum_semiclassical")) m.emplace_back("floquet");
    if (plan.has("spectrum_quantum")) m.emplace_back("quantum_rabi");
    if (plan.has("resonances")) m.emplace_back("resonance");
    return join(m, "+");
}

Values sweep_point(const SweepPlan& plan, std::size_t i) {
    const auto [p, g] = plan.at(i);
    Values v;
    v["delta"] = p.delta;
    v["epsilon"] = p.epsilon;
    v["amplitude"] = p.amplitude;
    v["omega"] = p.omega;
    v["coupling"] = g;
    v["methods"] = methods_label(plan);
    v["labeling"] = plan.labeling;
    put_policy(v, plan.policy);
    std::vector<std::string> errors;
    auto fail = [&](const std::string& stage, const std::exception& e) { errors.push_back(stage + ": " + e.what()); };

    std::optional<rabi::ChrwSolution> sol;
    std::optional<rabi::PerturbationResult> pr;
    const bool want_pt = plan.has("chrw_pt") || plan.labeling == "chrw_pt";
    if (plan.has("chrw") || want_pt || plan.labeling == "chrw") {
        try {
            sol = rabi::solve_self_consistent(p, plan.policy);
            if (want_pt) pr = rabi::first_order_correction(*sol, p);
        } catch (const std::exception& e) {
            fail("chrw", e);
        }
    }
    if (sol && plan.has("chrw")) {
        const auto ph = rabi::chrw_phases(*sol, p);
        v["xi"] = sol->xi;
        v["zeta"] = sol->zeta;
        v["eps_t"] = sol->eps_t;
        v["delta_t"] = sol->delta_t;
        v["Xi_t"] = sol->Xi_t;
        v["A_t"] = sol->A_t;
        v["Omega_t"] = sol->Omega_t;
        v["theta_plus_chrw"] = rabi::wrap_pi(ph.theta[0]);
        v["alpha_plus_chrw"] = ph.alpha[0];
        v["gamma_plus_chrw"] = rabi::wrap_two_pi(ph.gamma[0]);
        v["_gamma_raw_chrw"] = ph.gamma[0];
        v["above_validity"] = flag(sol->above_validity);
    }
    if (pr && plan.has("chrw_pt")) {
        v["ky"] = pr->ky;
        v["kx"] = pr->kx;
        v["kz"] = pr->kz;
        v["k"] = pr->k;
        v["L"] = pr->L;
        v["theta_plus_pt"] = rabi::wrap_pi(pr->theta_pt);
        v["Omega_pt"] = pr->Omega_pt;
        v["gamma_plus_pt"] = rabi::wrap_two_pi(pr->gamma_pt[0]);
        v["_gamma_raw_pt"] = pr->gamma_pt[0];
        v["singular"] = flag(pr->singular.any());
    }

    if (plan.numeric_route()) {
        try {
            const auto r = rabi::propagate(p, plan.policy);
            std::optional<rabi::Vec2> ref;
            if (plan.labeling == "chrw" && sol) ref = rabi::chrw_cyclic_state(*sol);
            if (plan.labeling == "chrw_pt" && pr) ref = rabi::perturbed_cyclic_state(*pr, *sol);
            const auto geo = rabi::aa_phases(r, p, ref);
            const char* sfx[2] = {"_plus", "_minus"};
            for (int b = 0; b < 2; ++b) {
                const std::string s = sfx[b];
                v["theta" + s] = geo.total_phases[b];
                v["alpha" + s] = geo.dynamical_phases[b];
                v["gamma" + s] = geo.aa_phases[b];
                v["s" + s] = geo.uncertainties[b];
                v["q" + s] = geo.quasienergies[b];
                v["_gamma_raw" + s] = geo.total_phases[b] - geo.dynamical_phases[b];
                put_state(v, s, geo.cyclic_states[b]);
                if (plan.has("p_up")) {
                    const auto pu = rabi::population_up(r, geo.cyclic_states[b]);
                    double lo = 1.0, hi = 0.0;
                    for (const auto& x : pu) {
                        lo = std::min(lo, x.p_up);
                        hi = std::max(hi, x.p_up);
                    }
                    v["p_up_min" + s] = lo;
                    v["p_up_max" + s] = hi;
                }
                if (plan.has("bloch")) v["path_length" + s] = rabi::bloch_trajectory(r, geo.cyclic_states[b]).path_length;
            }
            v["degenerate"] = flag(geo.degenerate_flag);
            if (plan.has("hidden_symmetry")) {
                const auto rep = rabi::hidden_symmetry_check(p, r);
                v["integer_bias"] = flag(rep.integer_bias);
                v["phase_gap"] = rep.phase_gap;
                v["identity_distance"] = rep.identity_distance;
                v["not_unique"] = flag(rep.not_unique);
            }
        } catch (const std::exception& e) {
            fail("propagator", e);
        }
    }
    if (plan.has("spectrum_semiclassical")) {
        try {
            const auto sp = rabi::converged_floquet_spectrum(p);
            v["floquet_q_lower"] = (*sp.folded)[0];
            v["floquet_q_upper"] = (*sp.folded)[1];
            v["floquet_gap"] = rabi::circular_gap((*sp.folded)[0], (*sp.folded)[1], p.omega);
            v["floquet_N"] = static_cast<std::int64_t>(sp.truncation_used);
            v["floquet_defect"] = sp.convergence_defect;
        } catch (const std::exception& e) {
            fail("floquet", e);
        }
    }
    if (plan.has("spectrum_quantum")) {
        try {
            const auto sp = rabi::converged_quantum_spectrum(g, p, plan.levels);
            for (int j = 0; j < plan.levels; ++j) v["E" + std::to_string(j)] = sp.levels[j];
            v["quantum_N"] = static_cast<std::int64_t>(sp.truncation_used);
            v["quantum_defect"] = sp.convergence_defect;
        } catch (const std::exception& e) {
            fail("quantum_rabi", e);
        }
    }
    if (plan.has("resonances")) {
        for (int o : plan.orders)
            for (auto m : plan.methods) {
                if (o == 2 && m == rabi::ResonanceMethod::second_order) continue;
                const std::string name = "res" + std::to_string(o) + "_" + rabi::method_name(m);
                try {
                    v[name] = rabi::resonance_position(p, o, m, plan.policy);
                } catch (const std::exception& e) {
                    fail(name, e);
                }
            }
    }
    v["status"] = errors.empty() ? std::string("ok") : join(errors, "; ");
    return v;
}

// Reorders +/- along each fast-axis run so the + state moves continuously.
void continuity_pass(const SweepPlan& plan, std::vector<Row>& rows) {
    const auto& c = plan.columns;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const std::string& n = c[i];
        if (n.size() > 5 && n.compare(n.size() - 5, 5, "_plus") == 0)
            if (auto j = column_index(c, n.substr(0, n.size() - 5) + "_minus")) pairs.emplace_back(i, *j);
    }
    auto state = [&](const Row& r, const std::string& s) {
        auto at = [&](const char* p) { return as_double(r[*column_index(c, std::string(p) + s)]); };
        return rabi::Vec2(rabi::cplx(at("_psi0r"), at("_psi0i")), rabi::cplx(at("_psi1r"), at("_psi1i")));
    };
    const std::size_t run = plan.fast_count();
    for (std::size_t start = 0; start < rows.size(); start += run) {
        std::optional<rabi::Vec2> prev;
        for (std::size_t i = start; i < start + run; ++i) {
            const rabi::Vec2 plus = state(rows[i], "_plus"), minus = state(rows[i], "_minus");
            if (!plus.allFinite() || !minus.allFinite()) continue;
            if (prev && std::abs(minus.dot(*prev)) > std::abs(plus.dot(*prev))) {
                for (auto [a, b] : pairs) std::swap(rows[i][a], rows[i][b]);
                prev = minus;
            } else {
                prev = plus;
            }
        }
    }
}

void unwrap_pass(const SweepPlan& plan, std::vector<Row>& rows) {
    const std::vector<std::pair<std::string, std::string>> targets = {
        {"_gamma_raw_plus", "gamma_plus_unwrapped"},
        {"_gamma_raw_chrw", "gamma_plus_chrw_unwrapped"},
        {"_gamma_raw_pt", "gamma_plus_pt_unwrapped"}};
    const std::size_t run = plan.fast_count();
    for (const auto& [src, dst] : targets) {
        const auto si = column_index(plan.columns, src);
        const auto di = column_index(plan.columns, dst);
        if (!si || !di) continue;
        for (std::size_t start = 0; start < rows.size(); start += run) {
            // Unwrap through failed points by carrying the last finite value.
            std::vector<double> seq;
            std::vector<std::size_t> where;
            for (std::size_t i = start; i < start + run; ++i) {
                const double x = as_double(rows[i][*si]);
                if (std::isfinite(x)) {
                    seq.push_back(x);
                    where.push_back(i);
                }
            }
            const auto un = rabi::unwrap_phases(seq);
            for (std::size_t k = 0; k < un.size(); ++k) rows[where[k]][*di] = un[k];
        }
    }
}

}  // namespace

int run_sweep(json cfg, const Overrides& o) {
    apply_overrides(cfg, o);
    const SweepPlan plan = read_sweep_plan(cfg);
    const std::string format = output_format(cfg);
    const std::string out = output_path(cfg, o);
    json header = base_header("sweep", cfg, plan.policy);
    header["swept"] = json::array();
    for (const auto& a : plan.axes) header["swept"].push_back(a.symbol);

    std::vector<Row> rows =
        batch_rows(plan.size(), plan.columns, header, out, o, [&](std::size_t i) { return sweep_point(plan, i); });
    if (plan.labeling == "continuity" && plan.numeric_route()) continuity_pass(plan, rows);
    if (plan.unwrap) unwrap_pass(plan, rows);
    write_and_retire(visible(header, plan.columns, rows), out, format);
    return status_exit(plan.columns, rows);
}

// --------------------------------------------------------------- dynamics --

int run_dynamics(json cfg, const Overrides& o) {
    apply_overrides(cfg, o);
    check_keys(cfg, {"command", "description", "params", "policy", "initial_state", "n_periods",
                     "samples_per_period", "labeling", "output"},
               "");
    const ModelParams p = read_params(cfg);
    const NumericPolicy pol = read_policy(cfg);
    const std::string format = output_format(cfg);
    const std::string out = output_path(cfg, o);
    const int periods = int_at(cfg, "n_periods", "", 1);
    if (periods < 1 || periods > 1000) throw ConfigError("field 'n_periods': must be in [1, 1000]");
    const int samples = int_at(cfg, "samples_per_period", "", 256);
    if (samples < 2 || (pol.quad_points / 2) % samples != 0)
        throw ConfigError("field 'samples_per_period': must divide quad_points / 2 (" +
                          std::to_string(pol.quad_points / 2) + ")");
    const std::string labeling = string_at(cfg, "labeling", "", "theta");
    if (labeling != "theta" && labeling != "chrw" && labeling != "chrw_pt")
        throw ConfigError("field 'labeling': expected theta, chrw or chrw_pt");

    if (!cfg.contains("initial_state")) throw ConfigError("field 'initial_state': required");
    const json& is = cfg.at("initial_state");
    check_keys(is, {"kind", "delta", "branch", "re", "im"}, "initial_state");
    const std::string kind = string_at(is, "kind", "initial_state");

    try {
        // + state at a given parameter point, with the requested labeling.
        auto cyclic = [&](const ModelParams& q, int branch) {
            const auto r = rabi::propagate(q, pol);
            std::optional<rabi::Vec2> ref;
            if (labeling != "theta") {
                const auto sol = rabi::solve_self_consistent(q, pol);
                ref = labeling == "chrw" ? rabi::chrw_cyclic_state(sol)
                                         : rabi::perturbed_cyclic_state(rabi::first_order_correction(sol, q), sol);
            }
            return rabi::cyclic_decomposition(r.final_unitary(), q, ref).states[branch];
        };

        rabi::Vec2 psi0;
        if (kind == "cyclic_plus" || kind == "cyclic_minus") {
            psi0 = cyclic(p, kind == "cyclic_plus" ? 0 : 1);
        } else if (kind == "cyclic_of") {
            ModelParams q = p;
            q.delta = number_at(is, "delta", "initial_state");
            try {
                q.validate();
            } catch (const std::exception& e) {
                throw ConfigError(std::string("field 'initial_state.delta': ") + e.what());
            }
            const std::string br = string_at(is, "branch", "initial_state", "plus");
            if (br != "plus" && br != "minus") throw ConfigError("field 'initial_state.branch': plus or minus");
            psi0 = cyclic(q, br == "plus" ? 0 : 1);
        } else if (kind == "vector") {
            auto comp = [&](const char* key) {
                if (!is.contains(key)) return std::array<double, 2>{0.0, 0.0};
                const json& a = is.at(key);
                if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
                    throw ConfigError(std::string("field 'initial_state.") + key + "': expected two numbers");
                return std::array<double, 2>{a[0].get<double>(), a[1].get<double>()};
            };
            const auto re = comp("re"), im = comp("im");
            psi0 = rabi::Vec2(rabi::cplx(re[0], im[0]), rabi::cplx(re[1], im[1]));
            if (!(psi0.norm() > 0.0)) throw ConfigError("field 'initial_state': vector must be nonzero");
            psi0 /= psi0.norm();
        } else {
            throw ConfigError("field 'initial_state.kind': expected cyclic_plus, cyclic_minus, cyclic_of or vector");
        }

        const auto r = rabi::propagate(p, pol);
        const int m = pol.quad_points;
        const int stride = m / samples;
        // Dense trajectory across all periods, then a Richardson-corrected
        // running path length (fine chord sum against every-other-point sum).
        std::vector<double> t;
        std::vector<rabi::Vec2> states;
        const rabi::Mat2& ut = r.final_unitary();
        rabi::Mat2 carry = rabi::Mat2::Identity();
        for (int n = 0; n < periods; ++n) {
            for (int k = (n == 0 ? 0 : 1); k <= m; ++k) {
                t.push_back(n * p.period() + r.grid[k]);
                states.push_back(r.unitaries[k] * carry * psi0);
            }
            carry = ut * carry;
        }
        std::vector<rabi::Vec3> pts(states.size());
        for (std::size_t k = 0; k < states.size(); ++k) pts[k] = rabi::bloch_vector(states[k]);
        auto arc = [](const rabi::Vec3& a, const rabi::Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); };
        std::vector<double> length(states.size(), 0.0);
        double fine = 0.0, coarse = 0.0;
        for (std::size_t k = 1; k < pts.size(); ++k) {
            fine += arc(pts[k - 1], pts[k]);
            if (k % 2 == 0) {
                coarse += arc(pts[k - 2], pts[k]);
                length[k] = (4.0 * fine - coarse) / 3.0;
            } else {
                length[k] = fine;
            }
        }

        json header = base_header("dynamics", cfg, pol);
        const double dist = (pts.back() - pts.front()).norm();
        header["summary"] = {{"path_length", length.back()},
                             {"path_length_over_pi", length.back() / rabi::kPi},
                             {"endpoint_distance", dist},
                             {"initial_state", {{"re", {psi0(0).real(), psi0(1).real()}},
                                                {"im", {psi0(0).imag(), psi0(1).imag()}}}}};
        Dataset d;
        d.header = header;
        d.columns = {"t", "p_up", "bloch_x", "bloch_y", "bloch_z", "path_length"};
        for (std::size_t k = 0; k < pts.size(); k += stride) {
            d.rows.push_back({t[k], std::clamp(std::norm(states[k](0)), 0.0, 1.0), pts[k].x(), pts[k].y(),
                              pts[k].z(), length[k]});
        }
        write_dataset(d, out, format);
    } catch (const rabi::InvalidParams& e) {
        throw ConfigError(e.what());
    } catch (const rabi::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericFailure;
    }
    return kOk;
}

// -------------------------------------------------------------- resonance --

int run_resonance(json cfg, const Overrides& o) {
    apply_overrides(cfg, o);
    check_keys(cfg, {"command", "description", "params", "policy", "epsilon", "orders", "methods", "search",
                     "output"},
               "");
    const ModelParams base = read_params(cfg);
    const NumericPolicy pol = read_policy(cfg);
    const std::string format = output_format(cfg);
    const std::string out = output_path(cfg, o);
    if (!cfg.contains("epsilon")) throw ConfigError("field 'epsilon': required range");
    const auto eps = read_range(cfg.at("epsilon"), "epsilon").values();
    for (double e : eps)
        if (e < 0.0) throw ConfigError("field 'epsilon': values must be non-negative");

    std::vector<int> orders{1};
    if (cfg.contains("orders")) {
        orders.clear();
        for (const auto& x : cfg.at("orders")) {
            if (!x.is_number_integer() || (x.get<int>() != 1 && x.get<int>() != 2))
                throw ConfigError("field 'orders': entries must be 1 or 2");
            orders.push_back(x.get<int>());
        }
    }
    std::vector<rabi::ResonanceMethod> methods{rabi::ResonanceMethod::numeric, rabi::ResonanceMethod::chrw,
                                               rabi::ResonanceMethod::second_order};
    if (cfg.contains("methods")) {
        methods.clear();
        for (const auto& x : cfg.at("methods")) {
            if (!x.is_string()) throw ConfigError("field 'methods': entries must be strings");
            methods.push_back(parse_method(x.get<std::string>(), "methods"));
        }
    }
    rabi::ResonanceSearch search;
    if (cfg.contains("search")) {
        const json& s = cfg.at("search");
        check_keys(s, {"lo", "hi"}, "search");
        search.lo = number_at(s, "lo", "search", search.lo);
        search.hi = number_at(s, "hi", "search", search.hi);
        if (!(search.lo > 0.0 && search.hi > search.lo)) throw ConfigError("field 'search': need 0 < lo < hi");
    }

    std::vector<std::string> columns = {"epsilon", "amplitude", "omega"};
    for (int ord : orders)
        for (auto m : methods) {
            // The second-order estimate only targets the second harmonic.
            if (ord == 2 && m == rabi::ResonanceMethod::second_order) continue;
            columns.push_back("res" + std::to_string(ord) + "_" + rabi::method_name(m));
        }
    columns.emplace_back("search_lo");
    columns.emplace_back("search_hi");
    for (const auto& s : kPolicyColumns) columns.push_back(s);
    columns.emplace_back("status");

    json header = base_header("resonance", cfg, pol);
    const auto rows = batch_rows(eps.size(), columns, header, out, o, [&](std::size_t i) {
        ModelParams p = base;
        p.epsilon = eps[i];
        Values v;
        v["epsilon"] = p.epsilon;
        v["amplitude"] = p.amplitude;
        v["omega"] = p.omega;
        v["search_lo"] = search.lo;
        v["search_hi"] = search.hi;
        put_policy(v, pol);
        std::vector<std::string> errors;
        for (int ord : orders)
            for (auto m : methods) {
                if (ord == 2 && m == rabi::ResonanceMethod::second_order) continue;
                const std::string name = "res" + std::to_string(ord) + "_" + rabi::method_name(m);
                try {
                    v[name] = rabi::resonance_position(p, ord, m, pol, search);
                } catch (const std::exception& e) {
                    errors.push_back(name + ": " + e.what());
                }
            }
        v["status"] = errors.empty() ? std::string("ok") : join(errors, "; ");
        return v;
    });
    write_and_retire(visible(header, columns, rows), out, format);
    return status_exit(columns, rows);
}

// --------------------------------------------------------------- spectrum --

int run_spectrum(json cfg, const Overrides& o) {
    apply_overrides(cfg, o);
    check_keys(cfg, {"command", "description", "kind", "params", "policy", "delta", "coupling", "levels",
                     "spectrum_tol", "output"},
               "");
    const std::string kind = string_at(cfg, "kind", "");
    if (kind != "semiclassical" && kind != "quantum")
        throw ConfigError("field 'kind': expected \"semiclassical\" or \"quantum\"");
    const ModelParams base = read_params(cfg);
    const NumericPolicy pol = read_policy(cfg);
    const std::string format = output_format(cfg);
    const std::string out = output_path(cfg, o);
    if (!cfg.contains("delta")) throw ConfigError("field 'delta': required range");
    const auto deltas = read_range(cfg.at("delta"), "delta").values();
    for (double d : deltas)
        if (d < 0.0) throw ConfigError("field 'delta': values must be non-negative");
    const double g = number_at(cfg, "coupling", "", 1.0);
    const int levels = int_at(cfg, "levels", "", 6);
    if (levels < 2 || levels > 40) throw ConfigError("field 'levels': must be in [2, 40]");
    const double tol = number_at(cfg, "spectrum_tol", "", 1e-8);
    if (!(tol > 0.0)) throw ConfigError("field 'spectrum_tol': must be positive");
    const bool semi = kind == "semiclassical";

    std::vector<std::string> columns = {"delta", "epsilon", semi ? "amplitude" : "coupling", "omega"};
    if (semi) {
        columns.insert(columns.end(), {"q_lower", "q_upper", "q_branch_a", "q_branch_b", "gap"});
    } else {
        for (int j = 0; j < levels; ++j) columns.push_back("E" + std::to_string(j));
    }
    columns.insert(columns.end(), {"truncation", "defect", "event", "status"});

    json header = base_header("spectrum", cfg, pol);
    header["spectrum_tol"] = tol;
    auto rows = batch_rows(deltas.size(), columns, header, out, o, [&](std::size_t i) {
        ModelParams p = base;
        p.delta = deltas[i];
        Values v;
        v["delta"] = p.delta;
        v["epsilon"] = p.epsilon;
        v["omega"] = p.omega;
        v["event"] = std::string();
        try {
            if (semi) {
                v["amplitude"] = p.amplitude;
                const auto sp = rabi::converged_floquet_spectrum(p, tol);
                v["q_lower"] = (*sp.folded)[0];
                v["q_upper"] = (*sp.folded)[1];
                v["gap"] = rabi::circular_gap((*sp.folded)[0], (*sp.folded)[1], p.omega);
                v["truncation"] = static_cast<std::int64_t>(sp.truncation_used);
                v["defect"] = sp.convergence_defect;
            } else {
                v["coupling"] = g;
                const auto sp = rabi::converged_quantum_spectrum(g, p, levels, tol);
                for (int j = 0; j < levels; ++j) v["E" + std::to_string(j)] = sp.levels[j];
                v["truncation"] = static_cast<std::int64_t>(sp.truncation_used);
                v["defect"] = sp.convergence_defect;
            }
            v["status"] = std::string("ok");
        } catch (const std::exception& e) {
            v["status"] = std::string(e.what());
        }
        return v;
    });

    // Sequential post-passes: branch tracking and crossing classification.
    int n_max = semi ? 10 : 20;
    const auto ncol = *column_index(columns, "truncation");
    for (const Row& r : rows)
        if (const auto* n = std::get_if<std::int64_t>(&r[ncol])) n_max = std::max<int>(n_max, static_cast<int>(*n));

    if (semi) {
        const auto lo = *column_index(columns, "q_lower"), hi = *column_index(columns, "q_upper");
        std::vector<std::array<double, 2>> pairs;
        for (const Row& r : rows) pairs.push_back({as_double(r[lo]), as_double(r[hi])});
        const auto tracked = rabi::track_branches(pairs, base.omega);
        const auto a = *column_index(columns, "q_branch_a"), b = *column_index(columns, "q_branch_b");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            rows[i][a] = tracked[i][0];
            rows[i][b] = tracked[i][1];
        }
    }

    json events = json::array();
    const auto ecol = *column_index(columns, "event");
    auto mark = [&](const rabi::CrossingEvent& e, const std::string& label) {
        const char* k = e.kind == rabi::CrossingKind::crossing ? "crossing" : "anti_crossing";
        std::size_t best = 0;
        for (std::size_t i = 1; i < deltas.size(); ++i)
            if (std::abs(deltas[i] - e.delta) < std::abs(deltas[best] - e.delta)) best = i;
        auto& cell = std::get<std::string>(rows[best][ecol]);
        cell += (cell.empty() ? "" : ";") + std::string(k) + label;
        return json{{"delta", e.delta}, {"kind", k}, {"min_gap", e.min_gap}};
    };
    if (deltas.size() >= 3) {
        try {
            if (semi) {
                auto gap = [&](double d) {
                    ModelParams p = base;
                    p.delta = d;
                    return rabi::floquet_gap(p, n_max);
                };
                for (const auto& e : rabi::classify_crossings(deltas, gap, base.omega)) events.push_back(mark(e, ""));
            } else {
                for (int j = 0; j + 1 < levels; ++j) {
                    auto gap = [&](double d) {
                        ModelParams p = base;
                        p.delta = d;
                        return rabi::quantum_gap(g, p, j, n_max);
                    };
                    for (const auto& e : rabi::classify_crossings(deltas, gap, base.omega)) {
                        json ev = mark(e, "(" + std::to_string(j) + "," + std::to_string(j + 1) + ")");
                        ev["levels"] = {j, j + 1};
                        events.push_back(ev);
                    }
                }
            }
        } catch (const rabi::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kNumericFailure;
        }
    }
    header["events"] = events;
    header["classification_truncation"] = n_max;
    write_and_retire(visible(header, columns, rows), out, format);
    return status_exit(columns, rows);
}

// ------------------------------------------------------------------ check --

int run_check(json cfg, const Overrides& o) {
    apply_overrides(cfg, o);
    check_keys(cfg, {"command", "description", "params", "policy", "output"}, "");
    const ModelParams p = read_params(cfg);
    const NumericPolicy pol = read_policy(cfg);
    const std::string format = output_format(cfg);
    const std::string out = output_path(cfg, o);

    Dataset d;
    d.header = base_header("check", cfg, pol);
    d.columns = {"invariant", "value", "tolerance", "pass"};
    bool all = true;
    auto row = [&](const std::string& name, double value, double tol) {
        const bool ok = std::isfinite(value) && value <= tol;
        all = all && ok;
        d.rows.push_back({name, value, tol, flag(ok)});
    };
    try {
        const auto r = rabi::propagate(p, pol);
        const auto geo = rabi::aa_phases(r, p);
        row("su2_structure", r.su2_defect, pol.unitarity_tol);
        row("unitarity", r.max_unitarity_defect, pol.unitarity_tol);
        row("theta_complementarity", std::abs(rabi::wrap_pi(geo.total_phases[0] + geo.total_phases[1])), 1e-8);
        row("alpha_antisymmetry", std::abs(geo.dynamical_phases[0] + geo.dynamical_phases[1]), 1e-8);
        row("gamma_complementarity", std::abs(rabi::wrap_pi(geo.aa_phases[0] + geo.aa_phases[1])), 1e-6);
        if (!geo.degenerate_flag)
            row("orthogonality", std::abs(geo.cyclic_states[0].dot(geo.cyclic_states[1])), 1e-8);
        row("s_branch_equality", std::abs(geo.uncertainties[0] - geo.uncertainties[1]), 1e-8);
        for (int b = 0; b < 2; ++b) {
            const std::string s = b == 0 ? "_plus" : "_minus";
            row("s_vs_path_length" + s,
                std::abs(geo.uncertainties[b] - rabi::bloch_trajectory(r, geo.cyclic_states[b]).path_length), 1e-6);
            const auto pu = rabi::population_up(r, geo.cyclic_states[b]);
            row("p_up_periodicity" + s, std::abs(pu.back().p_up - pu.front().p_up), 1e-8);
        }
        const auto sp = rabi::converged_floquet_spectrum(p);
        double dev = 0.0;
        {
            const auto& f = *sp.folded;
            const double a = std::max(rabi::circular_gap(f[0], geo.quasienergies[0], p.omega),
                                      rabi::circular_gap(f[1], geo.quasienergies[1], p.omega));
            const double b = std::max(rabi::circular_gap(f[0], geo.quasienergies[1], p.omega),
                                      rabi::circular_gap(f[1], geo.quasienergies[0], p.omega));
            dev = std::min(a, b);
        }
        row("floquet_vs_propagator", dev, 1e-7 * p.omega);
        if (std::hypot(p.delta, p.epsilon) > 0.0) {
            const auto sol = rabi::solve_self_consistent(p, pol);
            row("chrw_residual", std::max(std::abs(sol.residuals[0]), std::abs(sol.residuals[1])), pol.root_tol);
            double udef = 0.0;
            for (int k = 0; k <= 16; ++k)
                udef = std::max(udef, rabi::unitarity_defect(rabi::analytic_propagator(sol, p, p.period() * k / 16)));
            row("chrw_propagator_unitarity", udef, 1e-13);
            const auto pr = rabi::first_order_correction(sol, p);
            const double r2 = std::sqrt(1.0 + pr.k * pr.k);
            const rabi::Vec2 raw(sol.A_t + pr.k * sol.delta_det, pr.k * sol.A_t - sol.delta_det - r2 * sol.Omega_t);
            row("pt_normalization", std::abs(raw.squaredNorm() - pr.L * pr.L) / (pr.L * pr.L), 1e-12);
        }
    } catch (const rabi::InvalidParams& e) {
        throw ConfigError(e.what());
    } catch (const rabi::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericFailure;
    }
    write_dataset(d, out, format);
    return all ? kOk : kPartialFailure;
}

}  // namespace app
