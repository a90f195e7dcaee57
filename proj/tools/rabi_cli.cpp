#include <CLI11.hpp>
#include <iostream>

#include "app/commands.hpp"

int main(int argc, char** argv) {
    CLI::App cli{"Asymmetric semiclassical Rabi model: geometric phases, resonances and spectra"};
    cli.require_subcommand(1);

    app::Overrides o;
    std::string config;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output path ('-' for stdout); overrides output.path");
        sub->add_option("--format", o.format, "csv or json; overrides output.format")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--jobs", o.jobs, "worker threads (default: hardware concurrency)")
            ->check(CLI::Range(1, 1024));
        sub->add_option("--tol-step", o.tol_step, "propagator local error tolerance");
        sub->add_option("--tol-root", o.tol_root, "CHRW self-consistency residual tolerance");
        sub->add_option("--tol-unitarity", o.tol_unitarity, "allowed unitarity defect");
        sub->add_option("--quad-points", o.quad_points, "uniform samples per period");
        sub->add_flag("--unwrap", o.unwrap, "emit AA phases unwrapped along the sweep");
        sub->add_flag("--resume", o.resume, "reuse rows recorded in <out>.journal");
    };
    struct Entry {
        const char* name;
        const char* help;
        int (*run)(app::json, const app::Overrides&);
    };
    const Entry entries[] = {
        {"sweep", "evaluate quantities on a 1-D or 2-D parameter grid", app::run_sweep},
        {"dynamics", "P_up and Bloch trajectory of one initial state", app::run_dynamics},
        {"resonance", "harmonic resonance positions versus bias", app::run_resonance},
        {"spectrum", "Floquet or quantum Rabi spectrum with crossing classification", app::run_spectrum},
        {"check", "run the invariant suite at one parameter point", app::run_check},
    };
    std::vector<CLI::App*> subs;
    for (const auto& e : entries) {
        subs.push_back(cli.add_subcommand(e.name, e.help));
        common(subs.back());
    }

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? 0 : app::kConfigError;
    }

    try {
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            app::json cfg = app::load_config(config);
            if (cfg.contains("command") && cfg["command"] != entries[i].name)
                throw app::ConfigError("config is for command " + cfg["command"].dump() + ", not \"" +
                                       entries[i].name + "\"");
            return entries[i].run(std::move(cfg), o);
        }
    } catch (const app::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return app::kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return app::kNumericFailure;
    }
    return app::kConfigError;
}
