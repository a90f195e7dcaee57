#include <doctest.h>
#include <sys/wait.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <thread>

#include "app/output.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = RABI_CLI_PATH;

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("rabi_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run(const std::string& args, const fs::path& log = "/dev/null") {
    const int st = std::system((kCli + " " + args + " >" + log.string() + " 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

const char* kPointSweep = R"({
  "command": "sweep",
  "params": {"delta": 2.7993, "epsilon": 0.8, "amplitude": 1.0},
  "sweep": [{"symbol": "delta", "start": 2.7993, "stop": 2.7993, "count": 1}],
  "quantities": ["aa_phase", "uncertainty", "quasienergy", "p_up", "bloch", "hidden_symmetry",
                 "chrw", "chrw_pt", "spectrum_semiclassical", "spectrum_quantum"]
})";

}  // namespace

TEST_CASE("single-point sweep writes one row with every requested quantity") {
    const auto d = scratch("point");
    write(d / "c.json", kPointSweep);
    REQUIRE(run("sweep --config " + (d / "c.json").string() + " --out " + (d / "o.csv").string()) == 0);
    const auto ls = lines(slurp(d / "o.csv"));
    REQUIRE(ls.size() == 3);
    CHECK(ls[0].rfind("# {", 0) == 0);
    const auto header = nlohmann::json::parse(ls[0].substr(2));
    CHECK(header.at("tool") == app::kToolVersion);
    for (const char* col : {"delta", "theta_plus", "gamma_plus", "s_plus", "q_plus", "p_up_max_plus",
                            "path_length_plus", "xi", "Omega_t", "k", "gamma_plus_pt", "floquet_gap", "E0",
                            "methods", "step_tol", "status"})
        CHECK(ls[1].find(col) != std::string::npos);
    CHECK(ls[2].find("ok") != std::string::npos);
    CHECK_FALSE(fs::exists(d / "o.csv.journal"));
}

TEST_CASE("config errors exit with code 2 and name the field") {
    const auto d = scratch("errors");
    write(d / "bad.json", "{\n  \"command\": \"sweep\",\n  \"params\": {\"delta\": 1,,}\n}");
    CHECK(run("sweep --config " + (d / "bad.json").string(), d / "log") == 2);
    CHECK(slurp(d / "log").find("line 3") != std::string::npos);

    write(d / "unknown.json", R"({"command": "sweep", "params": {"delta": 1, "bogus": 2},
        "sweep": [{"symbol": "delta", "start": 1, "stop": 2, "count": 2}], "quantities": ["aa_phase"]})");
    CHECK(run("sweep --config " + (d / "unknown.json").string(), d / "log") == 2);
    CHECK(slurp(d / "log").find("bogus") != std::string::npos);

    write(d / "range.json", R"({"command": "sweep", "params": {"epsilon": 0.5, "amplitude": 9},
        "sweep": [{"symbol": "delta", "start": 1, "stop": 2, "count": 2}], "quantities": ["aa_phase"]})");
    CHECK(run("sweep --config " + (d / "range.json").string()) == 2);

    write(d / "state.json", R"({"command": "dynamics", "params": {"delta": 1},
        "initial_state": {"kind": "sideways"}})");
    CHECK(run("dynamics --config " + (d / "state.json").string()) == 2);

    write(d / "kind.json", R"({"command": "spectrum", "kind": "classical", "delta": 1})");
    CHECK(run("spectrum --config " + (d / "kind.json").string()) == 2);

    CHECK(run("resonance --config " + (d / "range.json").string()) == 2);
    CHECK(run("sweep") == 2);
    CHECK(run("sweep --config " + (d / "missing.json").string()) == 2);
}

TEST_CASE("identical configs give byte-identical datasets, independent of --jobs") {
    const auto d = scratch("determinism");
    write(d / "c.json", R"({"command": "sweep", "params": {"epsilon": 0.5, "amplitude": 1.0},
        "sweep": [{"symbol": "epsilon", "start": 0.0, "stop": 1.0, "count": 3},
                  {"symbol": "delta", "start": 0.5, "stop": 3.0, "count": 7}],
        "quantities": ["aa_phase", "uncertainty", "chrw"], "unwrap": true})");
    const std::string c = " --config " + (d / "c.json").string();
    REQUIRE(run("sweep" + c + " --jobs 1 --out " + (d / "a.csv").string()) == 0);
    REQUIRE(run("sweep" + c + " --jobs 1 --out " + (d / "b.csv").string()) == 0);
    REQUIRE(run("sweep" + c + " --jobs 4 --out " + (d / "c.csv").string()) == 0);
    const auto a = slurp(d / "a.csv");
    CHECK(lines(a).size() == 2 + 21);
    CHECK(a == slurp(d / "b.csv"));
    CHECK(a == slurp(d / "c.csv"));
}

TEST_CASE("JSON output carries header, columns and rows") {
    const auto d = scratch("json");
    write(d / "c.json", kPointSweep);
    REQUIRE(run("sweep --config " + (d / "c.json").string() + " --format json --out " + (d / "o.json").string()) == 0);
    const auto j = nlohmann::json::parse(slurp(d / "o.json"));
    CHECK(j.at("header").at("command") == "sweep");
    CHECK(j.at("rows").size() == 1);
    CHECK(j.at("rows")[0].size() == j.at("columns").size());
}

TEST_CASE("command-line tolerances override the config and are recorded") {
    const auto d = scratch("override");
    write(d / "c.json", kPointSweep);
    REQUIRE(run("sweep --config " + (d / "c.json").string() + " --tol-step 1e-9 --quad-points 1024 --out " +
                (d / "o.csv").string()) == 0);
    const auto header = nlohmann::json::parse(lines(slurp(d / "o.csv"))[0].substr(2));
    CHECK(header.dump().find("1e-09") != std::string::npos);
    CHECK(header.dump().find("1024") != std::string::npos);
}

TEST_CASE("mismatched subcommand is a config error") {
    const auto d = scratch("mismatch");
    write(d / "c.json", kPointSweep);
    CHECK(run("dynamics --config " + (d / "c.json").string()) == 2);
}

TEST_CASE("interrupted sweep resumes from its journal without recomputation") {
    const auto d = scratch("resume");
    write(d / "c.json", R"({"command": "sweep", "params": {"epsilon": 0.5, "amplitude": 1.0},
        "sweep": [{"symbol": "delta", "start": 0.5, "stop": 3.0, "count": 3000}],
        "quantities": ["aa_phase", "uncertainty", "chrw", "chrw_pt"]})");
    const std::string c = " --config " + (d / "c.json").string() + " --jobs 1";
    REQUIRE(run("sweep" + c + " --out " + (d / "ref.csv").string()) == 0);

    const fs::path out = d / "o.csv";
    const fs::path journal = d / "o.csv.journal";
    const std::string bg = kCli + " sweep" + c + " --out " + out.string() + " >/dev/null 2>&1 & echo $! > " +
                           (d / "pid").string();
    REQUIRE(std::system(bg.c_str()) == 0);
    for (int i = 0; i < 400 && (!fs::exists(journal) || lines(slurp(journal)).size() < 40); ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(25));
    std::system(("kill -9 $(cat " + (d / "pid").string() + ") 2>/dev/null").c_str());
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    REQUIRE(fs::exists(journal));
    REQUIRE_FALSE(fs::exists(out));

    // Mark one journaled row; if it survives, the row was reused rather than recomputed.
    auto jl = lines(slurp(journal));
    REQUIRE(jl.size() >= 3);
    const std::string row5 = jl[1];
    auto j = nlohmann::json::parse(row5.substr(row5.find(' ') + 1));
    const std::string idx = row5.substr(0, row5.find(' '));
    j[1] = 123.25;
    jl[1] = idx + " " + j.dump();
    std::string text;
    for (const auto& l : jl) text += l + "\n";
    write(journal, text);

    REQUIRE(run("sweep" + c + " --resume --out " + out.string()) == 0);
    CHECK_FALSE(fs::exists(journal));
    const auto got = lines(slurp(out));
    const auto ref = lines(slurp(d / "ref.csv"));
    REQUIRE(got.size() == ref.size());
    int differing = 0;
    for (std::size_t i = 0; i < got.size(); ++i) differing += got[i] != ref[i];
    CHECK(differing == 1);
    CHECK(got[2 + std::stoul(idx)].find("123.25") != std::string::npos);

    // A journal from another configuration is refused.
    write(journal, "rabi-journal-v1 1\n");
    CHECK(run("sweep" + c + " --resume --out " + out.string()) == 2);
}

TEST_CASE("dynamics with spin-up at zero tunneling is constant") {
    const auto d = scratch("dyn");
    write(d / "c.json", R"({"command": "dynamics", "params": {"delta": 0.0, "epsilon": 0.5, "amplitude": 1.0},
        "initial_state": {"kind": "vector", "re": [1, 0], "im": [0, 0]}, "n_periods": 2, "samples_per_period": 64})");
    REQUIRE(run("dynamics --config " + (d / "c.json").string() + " --out " + (d / "o.csv").string()) == 0);
    const auto ls = lines(slurp(d / "o.csv"));
    CHECK(ls.size() == 2 + 129);
    const double expect[] = {1, 0, 0, 1, 0};
    for (std::size_t i = 2; i < ls.size(); ++i) {
        std::istringstream row(ls[i]);
        std::string cell;
        std::getline(row, cell, ',');
        for (double e : expect) {
            std::getline(row, cell, ',');
            CHECK(std::abs(std::stod(cell) - e) < 1e-14);
        }
    }
}

TEST_CASE("single-epsilon resonance run equals the library call") {
    const auto d = scratch("res");
    write(d / "c.json", R"({"command": "resonance", "params": {"amplitude": 1.0}, "epsilon": 0.5,
        "orders": [1], "methods": ["chrw"]})");
    REQUIRE(run("resonance --config " + (d / "c.json").string() + " --format json --out " + (d / "o.json").string()) == 0);
    const auto j = nlohmann::json::parse(slurp(d / "o.json"));
    const auto& cols = j.at("columns");
    const auto it = std::find(cols.begin(), cols.end(), "res1_chrw");
    REQUIRE(it != cols.end());
    const double v = j.at("rows")[0][it - cols.begin()].get<double>();
    CHECK(v == doctest::Approx(1.77286).epsilon(1e-4));
}

TEST_CASE("check subcommand passes at the resonant point") {
    CHECK(run("check --config " + std::string(RABI_RECIPES_DIR) + "/check_resonant_point.json --out -") == 0);
}
