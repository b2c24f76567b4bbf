#ifndef CPQ_SWEEP_HPP
#define CPQ_SWEEP_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "cpq/charge_basis.hpp"
#include "cpq/circuit.hpp"

namespace cpq {

enum class SweepMode { spectrum, sweep_charge, sweep_flux, fit_tb, lmg_scan, capmat };

std::string to_string(SweepMode mode);

/// One sweep dimension.  Binding several parameter paths to a single axis
/// expresses correlated sweeps (e.g. the same flux offset in every loop).
struct SweepAxis {
    std::string name;                // CSV column name, defaults to first path
    std::vector<std::string> paths;  // e.g. "loops[0].flux", "loops[*].offset_charge"
    double start = 0.0;
    double stop = 0.0;
    int points = 0;
};

struct FitConfig {
    int grid_points = 9;
    int bands = 0; // 0: 2 bands for N=1, 4 for N=2
};

struct LmgConfig {
    int n = 0;
    double j = 0.0;
    double eps_start = 0.0;
    double eps_stop = 0.0;
    int eps_points = 0;
};

struct SweepFlags {
    bool linearized_flux_error = false;
    bool store_eigenvectors = false;
    double gap_threshold = 0.05;
};

struct SweepConfig {
    SweepMode mode = SweepMode::spectrum;
    CircuitSpec circuit;
    Truncation truncation;
    int eigenvalues = 6;
    std::vector<SweepAxis> axes;
    FitConfig fit;
    LmgConfig lmg;
    SweepFlags flags;
    std::string output; // file path prefix
    int workers = 0;    // 0: logical cores
};

/// Schema check without computation; returns one line per problem, each
/// starting with the offending key.  Empty means valid.
std::vector<std::string> validate_config(const nlohmann::json& doc);

/// Parses a validated document; throws ConfigError on the first problem.
SweepConfig parse_config(const nlohmann::json& doc);

SweepConfig load_config(const std::string& path);

/// Fully resolved round-trip form: parse_config(config_to_json(c)) == c.
nlohmann::json config_to_json(const SweepConfig& cfg);

struct RunOutputs {
    std::string csv_path;
    std::string gnuplot_path;
    std::string meta_path;
    bool all_converged = true;
};

/// Executes the configured mode and writes <prefix>.csv, <prefix>.gp and
/// <prefix>.meta.json.  Deterministic: identical configs produce
/// byte-identical CSVs.
RunOutputs run_sweep(const SweepConfig& cfg);

} // namespace cpq

#endif
