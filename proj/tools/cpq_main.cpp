// Command line front end: runs sweep configurations, validates them, and
// prints capacitance-network tables.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpq/circuit.hpp"
#include "cpq/constants.hpp"
#include "cpq/sweep.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNoConvergence = 3;

int cmd_run(const std::string& config_path, int workers, const std::string& out_prefix) {
    cpq::SweepConfig cfg = cpq::load_config(config_path);
    if (workers >= 0) cfg.workers = workers;
    if (!out_prefix.empty()) cfg.output = out_prefix;
    if (cfg.output.empty())
        cfg.output = std::filesystem::path(config_path).stem().string();

    const cpq::RunOutputs out = cpq::run_sweep(cfg);
    std::cout << "wrote " << out.csv_path << ", " << out.gnuplot_path << ", " << out.meta_path
              << "\n";
    if (!out.all_converged) {
        std::cerr << "warning: some points did not converge (see converged column)\n";
        return kExitNoConvergence;
    }
    return 0;
}

int cmd_validate(const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "config: cannot open '" << config_path << "'\n";
        return kExitConfig;
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "config: JSON parse error: " << e.what() << "\n";
        return kExitConfig;
    }
    const auto issues = cpq::validate_config(doc);
    if (issues.empty()) {
        std::cout << "ok\n";
        return 0;
    }
    for (const auto& issue : issues) std::cerr << issue << "\n";
    return kExitConfig;
}

int cmd_capmat(int n, double cb, double cs) {
    cpq::CircuitSpec spec;
    spec.c_big = cb;
    spec.c_small = cs;
    spec.loops.resize(n);

    const cpq::ChargingMatrix cm = cpq::charging_matrix(spec);
    const Eigen::MatrixXd closed = cpq::closed_form_inverse(n, cb, cs);
    const double max_dev = (cm.inv_cap - closed).cwiseAbs().maxCoeff();

    std::cout << std::setprecision(12);
    std::cout << "node capacitance matrix (fF):\n" << cpq::build_node_capacitance(spec) << "\n\n";
    std::cout << "numerical inverse branch capacitance (1/fF):\n" << cm.inv_cap << "\n\n";
    std::cout << "closed-form inverse (1/fF):\n" << closed << "\n\n";
    std::cout << "max |numeric - closed form| = " << max_dev << "\n\n";
    std::cout << "charging energy matrix E_C (GHz):\n" << cm.ec << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"interferometer-array qubit simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_prefix;
    int workers = -1;
    auto* run = app.add_subcommand("run", "run a sweep configuration");
    run->add_option("config", config_path, "JSON configuration file")->required();
    run->add_option("--workers", workers, "worker threads (default: logical cores)");
    run->add_option("--out", out_prefix, "output file prefix");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "schema-check a configuration");
    validate->add_option("config", validate_path, "JSON configuration file")->required();

    int cap_n = 1;
    double cap_cb = 0.0, cap_cs = 0.0;
    auto* capmat = app.add_subcommand("capmat", "print the capacitance network tables");
    capmat->add_option("-N,--loops", cap_n, "number of loops")->required();
    capmat->add_option("--cb", cap_cb, "end shunt capacitance C_B (fF)")->required();
    capmat->add_option("--cs", cap_cs, "island coupling capacitance C_S (fF)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, workers, out_prefix);
        if (validate->parsed()) return cmd_validate(validate_path);
        if (capmat->parsed()) return cmd_capmat(cap_n, cap_cb, cap_cs);
    } catch (const cpq::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
