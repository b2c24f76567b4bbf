#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpq/constants.hpp"
#include "cpq/sweep.hpp"

using namespace cpq;
using nlohmann::json;

namespace {

json minimal_spectrum_config() {
    return json::parse(R"({
        "mode": "spectrum",
        "circuit": {
            "c_big": 0.0,
            "c_small": 96.851147,
            "loops": [{
                "arm1": {"ej1": 0.0, "ej2": 5.0},
                "arm2": {"ej1": 0.0, "ej2": 5.0},
                "flux": 0.5,
                "offset_charge": 0.0
            }]
        },
        "truncation": {"n_max": 8},
        "eigenvalues": 3,
        "sweep": [{
            "name": "ng",
            "paths": ["loops[0].offset_charge"],
            "start": 0.0,
            "stop": 1.0,
            "points": 5
        }],
        "workers": 2
    })");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("cpq_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string prefix(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("config validation diagnostics") {
    SUBCASE("well-formed config passes") {
        CHECK(validate_config(minimal_spectrum_config()).empty());
    }
    SUBCASE("single-point axis is rejected, naming the axis") {
        auto doc = minimal_spectrum_config();
        doc["sweep"][0]["points"] = 1;
        const auto issues = validate_config(doc);
        REQUIRE(!issues.empty());
        CHECK(issues[0].find("sweep[0].points") != std::string::npos);
    }
    SUBCASE("negative coupling capacitance is rejected, citing the invariant") {
        auto doc = minimal_spectrum_config();
        doc["circuit"]["c_small"] = -4.0;
        const auto issues = validate_config(doc);
        REQUIRE(!issues.empty());
        CHECK(issues[0].find("circuit.c_small") != std::string::npos);
        CHECK(issues[0].find("> 0") != std::string::npos);
    }
    SUBCASE("unknown keys are listed") {
        auto doc = minimal_spectrum_config();
        doc["truncation"]["nmax"] = 10;
        const auto issues = validate_config(doc);
        REQUIRE(!issues.empty());
        CHECK(issues[0].find("truncation.nmax") != std::string::npos);
        CHECK(issues[0].find("unknown key") != std::string::npos);
    }
    SUBCASE("mode-path mismatch") {
        auto doc = minimal_spectrum_config();
        doc["mode"] = "sweep-flux";
        const auto issues = validate_config(doc);
        REQUIRE(!issues.empty());
        CHECK(issues[0].find("must target flux") != std::string::npos);
    }
    SUBCASE("bad parameter path") {
        auto doc = minimal_spectrum_config();
        doc["sweep"][0]["paths"][0] = "loops[4].flux";
        const auto issues = validate_config(doc);
        REQUIRE(!issues.empty());
        CHECK(issues[0].find("out of range") != std::string::npos);
    }
    SUBCASE("parse_config throws ConfigError naming the key") {
        auto doc = minimal_spectrum_config();
        doc["eigenvalues"] = 1;
        try {
            parse_config(doc);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.key == "eigenvalues");
        }
    }
}

TEST_CASE("spectrum sweep: files, shape, and the half-charge zero") {
    TempDir tmp;
    auto doc = minimal_spectrum_config();
    doc["output"] = tmp.prefix("spec");
    const SweepConfig cfg = parse_config(doc);
    const RunOutputs out = run_sweep(cfg);
    CHECK(out.all_converged);

    const auto lines = csv_lines(slurp(out.csv_path));
    REQUIRE(lines.size() == 6); // header + 5 points
    CHECK(lines[0] == "ng,e0,e1,e2,e01,converged,n_max_used");

    // row at ng = 0.5: e01 column vanishes
    std::istringstream row(lines[3]);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    CHECK(cells[0] == "0.5");
    CHECK(std::abs(std::stod(cells[4])) < 1e-8);
    CHECK(cells[5] == "true");

    CHECK(slurp(out.gnuplot_path).find("plot") != std::string::npos);
    const json meta = json::parse(slurp(out.meta_path));
    CHECK(meta["version"] == kVersion);
    CHECK(meta["all_converged"] == true);
}

TEST_CASE("identical configs give byte-identical output") {
    TempDir tmp;
    auto doc = minimal_spectrum_config();
    doc["output"] = tmp.prefix("det1");
    run_sweep(parse_config(doc));
    const std::string first = slurp(tmp.prefix("det1") + ".csv");

    doc["workers"] = 1; // worker count must not leak into the bytes
    doc["output"] = tmp.prefix("det2");
    run_sweep(parse_config(doc));
    CHECK(first == slurp(tmp.prefix("det2") + ".csv"));
}

TEST_CASE("meta config round-trips to identical results") {
    TempDir tmp;
    auto doc = minimal_spectrum_config();
    doc["output"] = tmp.prefix("round");
    const RunOutputs out = run_sweep(parse_config(doc));
    const std::string csv1 = slurp(out.csv_path);

    const json meta = json::parse(slurp(out.meta_path));
    const SweepConfig again = parse_config(meta["config"]);
    const RunOutputs out2 = run_sweep(again);
    CHECK(slurp(out2.csv_path) == csv1);
}

TEST_CASE("correlated axis binds several paths") {
    TempDir tmp;
    auto doc = minimal_spectrum_config();
    doc["mode"] = "sweep-flux";
    doc["circuit"]["c_big"] = 200.0;
    doc["circuit"]["c_small"] = 10.0;
    doc["circuit"]["loops"][0]["arm1"]["ej1"] = 250.0;
    doc["circuit"]["loops"][0]["arm2"]["ej1"] = 250.0;
    doc["circuit"]["loops"].push_back(doc["circuit"]["loops"][0]);
    doc["truncation"]["n_max"] = 6;
    doc["truncation"]["convergence_tol"] = 1e-3;
    doc["sweep"] = json::array({json{{"name", "df"},
                                     {"paths", {"loops[*].flux"}},
                                     {"start", 0.5},
                                     {"stop", 0.502},
                                     {"points", 3}}});
    doc["flags"] = {{"linearized_flux_error", true}};
    doc["output"] = tmp.prefix("corr");
    const RunOutputs out = run_sweep(parse_config(doc));
    const auto lines = csv_lines(slurp(out.csv_path));
    REQUIRE(lines.size() == 4);
    // detuning lifts the near-degeneracy monotonically along the sweep
    auto e01_of = [&](int i) {
        std::istringstream row(lines[i]);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        return std::stod(cells[4]);
    };
    CHECK(e01_of(1) < e01_of(2));
    CHECK(e01_of(2) < e01_of(3));
}

TEST_CASE("two-axis sweeps enumerate the first axis slowest") {
    TempDir tmp;
    auto doc = minimal_spectrum_config();
    doc["truncation"]["n_max"] = 4;
    doc["truncation"]["convergence_tol"] = 1.0;
    doc["sweep"] = nlohmann::json::array(
        {{{"name", "a"}, {"paths", {"loops[0].offset_charge"}}, {"start", 0.0},
          {"stop", 0.2}, {"points", 3}},
         {{"name", "b"}, {"paths", {"loops[0].flux"}}, {"start", 0.5}, {"stop", 0.52},
          {"points", 2}}});
    doc["output"] = tmp.prefix("grid");
    const RunOutputs out = run_sweep(parse_config(doc));
    const auto lines = csv_lines(slurp(out.csv_path));
    REQUIRE(lines.size() == 7); // header + 3 * 2 points, none omitted
    CHECK(lines[1].rfind("0,0.5,", 0) == 0);
    CHECK(lines[2].rfind("0,0.52,", 0) == 0);
    CHECK(lines[3].rfind("0.1,0.5,", 0) == 0);
    CHECK(lines[6].rfind("0.2,0.52,", 0) == 0);
}

TEST_CASE("eigenvector retention adds parity columns") {
    TempDir tmp;
    auto doc = minimal_spectrum_config();
    doc["flags"] = {{"store_eigenvectors", true}};
    doc["sweep"][0]["points"] = 2;
    doc["sweep"][0]["stop"] = 0.1;
    doc["output"] = tmp.prefix("vec");
    const RunOutputs out = run_sweep(parse_config(doc));
    const auto lines = csv_lines(slurp(out.csv_path));
    CHECK(lines[0] == "ng,e0,e1,e2,e01,converged,n_max_used,parity0,parity1,parity2");
    std::istringstream row(lines[1]);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    CHECK(std::abs(std::stod(cells[7])) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("unconverged points are kept with converged=false") {
    TempDir tmp;
    auto doc = minimal_spectrum_config();
    doc["circuit"]["c_small"] = 1e9; // free-rotor limit
    doc["truncation"] = {{"n_max", 8}, {"dim_ceiling", 128}};
    doc["sweep"][0]["points"] = 2;
    doc["output"] = tmp.prefix("unconv");
    const RunOutputs out = run_sweep(parse_config(doc));
    CHECK_FALSE(out.all_converged);
    const auto lines = csv_lines(slurp(out.csv_path));
    REQUIRE(lines.size() == 3);
    CHECK(lines[1].find("false") != std::string::npos);
    const json meta = json::parse(slurp(out.meta_path));
    CHECK(meta["all_converged"] == false);
}

TEST_CASE("fit-tb mode writes bands and the fitted parameters") {
    TempDir tmp;
    json doc = minimal_spectrum_config();
    doc["mode"] = "fit-tb";
    doc.erase("sweep");
    doc["fit"] = {{"grid_points", 5}};
    doc["output"] = tmp.prefix("fit");
    const RunOutputs out = run_sweep(parse_config(doc));
    const auto lines = csv_lines(slurp(out.csv_path));
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "ng_1,band0,band1,converged");
    const json meta = json::parse(slurp(out.meta_path));
    CHECK(meta["results"]["fit"]["t"].get<double>() < 0.0);
    CHECK(meta["results"]["fit"]["residual_rms"].get<double>() >= 0.0);
}

TEST_CASE("lmg-scan mode") {
    TempDir tmp;
    json doc;
    doc["mode"] = "lmg-scan";
    doc["lmg"] = {{"n", 200}, {"j", 0.5},    {"eps_start", 0.0},
                  {"eps_stop", 1.5}, {"eps_points", 31}};
    doc["output"] = tmp.prefix("lmg");
    const RunOutputs out = run_sweep(parse_config(doc));
    const auto lines = csv_lines(slurp(out.csv_path));
    REQUIRE(lines.size() == 32);
    CHECK(lines[0] == "eps,eps_over_2j,gap_e10,gap_over_4j,sz_mean");
    const json meta = json::parse(slurp(out.meta_path));
    const double eps_star = meta["results"]["eps_star"].get<double>();
    CHECK(eps_star > 0.5);
    CHECK(eps_star <= 1.0);
}

TEST_CASE("capmat mode emits both inverses") {
    TempDir tmp;
    json doc;
    doc["mode"] = "capmat";
    doc["circuit"] = minimal_spectrum_config()["circuit"];
    doc["circuit"]["c_big"] = 350.0;
    doc["circuit"]["c_small"] = 10.0;
    doc["circuit"]["loops"].push_back(doc["circuit"]["loops"][0]);
    doc["circuit"]["loops"].push_back(doc["circuit"]["loops"][0]);
    doc["output"] = tmp.prefix("cap");
    const RunOutputs out = run_sweep(parse_config(doc));
    const auto lines = csv_lines(slurp(out.csv_path));
    REQUIRE(lines.size() == 10); // header + 9 entries
    CHECK(lines[0] == "i,j,inv_cap_numeric,inv_cap_closed_form,abs_dev,ec_ghz");
    const json meta = json::parse(slurp(out.meta_path));
    CHECK(meta["results"]["max_abs_deviation"].get<double>() < 1e-12);
}

TEST_CASE("lmg-scan rejects sweep axes") {
    json doc;
    doc["mode"] = "lmg-scan";
    doc["lmg"] = {{"n", 10}, {"j", 0.5}, {"eps_start", 0.0}, {"eps_stop", 1.0},
                  {"eps_points", 5}};
    doc["sweep"] = json::array({json{{"paths", {"c_big"}}, {"start", 0}, {"stop", 1},
                                     {"points", 3}}});
    const auto issues = validate_config(doc);
    REQUIRE(!issues.empty());
    CHECK(issues[0].find("not used in mode lmg-scan") != std::string::npos);
}
