// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with its headline measurements and wall time.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cpq/charge_basis.hpp"
#include "cpq/constants.hpp"
#include "cpq/effective_spin.hpp"
#include "cpq/giant_spin.hpp"
#include "cpq/sweep.hpp"
#include "cpq/trig.hpp"

using namespace cpq;

namespace {

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int criterion, const char* name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[acceptance] %2d %-28s %s  (%s; %.2f s)\n", criterion, name,
                pass ? "PASS" : "FAIL", detail.c_str(), seconds);
    std::fflush(stdout);
}

CircuitSpec array_spec(int n, double cb, double cs, double ej1, double ej2_total, double flux) {
    CircuitSpec s;
    s.c_big = cb;
    s.c_small = cs;
    InterferometerLoop loop;
    loop.arm1 = {ej1, ej2_total / 2.0};
    loop.arm2 = {ej1, ej2_total / 2.0};
    loop.flux = flux;
    s.loops.assign(n, loop);
    return s;
}

// Single loop with the charging energy carried entirely by c_small.
CircuitSpec single_loop_ec(double ec, double ej2_total) {
    CircuitSpec s = array_spec(1, 0.0, kChargingGHzfF / ec, 0.0, ej2_total, 0.5);
    return s;
}

double e01_linearized(int n, double cb, double df) {
    CircuitSpec s = array_spec(n, cb, 10.0, 250.0, 10.0, 0.5 + df);
    Truncation tr;
    return converged_spectrum(s, tr, 4, FluxErrorModel::linearized).e01;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("criterion 1: capacitance closed form") {
    Stopwatch sw;
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> cs_dist(1.0, 100.0);
    std::uniform_real_distribution<double> cb_dist(0.0, 1000.0);
    std::uniform_int_distribution<int> n_dist(1, 8);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = n_dist(rng);
        const double cs = cs_dist(rng);
        const double cb = cb_dist(rng);
        CircuitSpec s;
        s.c_big = cb;
        s.c_small = cs;
        s.loops.resize(n);
        const Eigen::MatrixXd closed = closed_form_inverse(n, cb, cs);
        const Eigen::MatrixXd numeric = charging_matrix(s).inv_cap;
        worst = std::max(worst,
                         (numeric - closed).cwiseAbs().maxCoeff() / closed.cwiseAbs().maxCoeff());
    }
    const double secs = sw.seconds();
    const bool pass = worst < 1e-10 && secs < 1.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max rel dev %.1e", worst);
    report(1, "capacitance closed form", pass, buf, secs);
    CHECK(worst < 1e-10);
    CHECK(secs < 1.0);
}

TEST_CASE("criterion 2: single-qubit degeneracy") {
    Stopwatch sw;
    Truncation tr;
    CircuitSpec s = single_loop_ec(0.2, 10.0);

    s.loops[0].offset_charge = 0.5;
    const double e01_half = converged_spectrum(s, tr, 2).e01;

    s.loops[0].offset_charge = 0.0;
    const double e01_zero = converged_spectrum(s, tr, 2).e01;
    double worst = 0.0;
    for (int i = 0; i <= 10; ++i) {
        const double ng = 0.05 * i;
        s.loops[0].offset_charge = ng;
        const double ratio = converged_spectrum(s, tr, 2).e01 / e01_zero;
        worst = std::max(worst, std::abs(ratio - std::abs(cos_pi(ng))));
    }
    const double secs = sw.seconds();
    const bool pass = e01_half < 1e-8 && worst < 0.03 && secs < 5.0;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "E01(1/2) = %.2e GHz, max |ratio - cos| = %.2e", e01_half,
                  worst);
    report(2, "single-qubit degeneracy", pass, buf, secs);
    CHECK(e01_half < 1e-8);
    CHECK(worst < 0.03);
    CHECK(secs < 5.0);
}

TEST_CASE("criterion 3: parity protection") {
    Stopwatch sw;
    Eigen::MatrixXd ec(1, 1);
    ec << 0.2;
    Truncation tr;
    tr.n_max = 16;
    const auto op = build_hamiltonian_parts(ec, {{0.0, 0.0, -10.0, 0.0}}, {0.0}, tr);

    bool blocks_clean = true;
    for (int outer = 0; outer < op.h.outerSize(); ++outer)
        for (Eigen::SparseMatrix<std::complex<double>>::InnerIterator it(op.h, outer); it; ++it)
            if (((it.row() ^ it.col()) & 1) != 0) blocks_clean = false;

    const auto res = lowest_eigenvalues(op, 2, true);
    const double p0 = parity_expectation(op, res, 0);
    const double p1 = parity_expectation(op, res, 1);
    const bool parities = std::abs(std::abs(p0) - 1.0) < 1e-9 &&
                          std::abs(std::abs(p1) - 1.0) < 1e-9 && p0 * p1 < 0.0;
    const double secs = sw.seconds();
    char buf[128];
    std::snprintf(buf, sizeof(buf), "<P>0 = %.12f, <P>1 = %.12f, cross blocks empty = %d", p0, p1,
                  blocks_clean ? 1 : 0);
    report(3, "parity protection", blocks_clean && parities, buf, secs);
    CHECK(blocks_clean);
    CHECK(parities);
}

TEST_CASE("criterion 4: two-loop spin-model extraction") {
    Stopwatch sw;

    // synthetic bands generated from the effective two-spin model
    std::vector<double> axis(9);
    for (int i = 0; i < 9; ++i) axis[i] = 0.5 * i / 8.0;
    const double t_in = -0.05, tp_in = 0.004, tm_in = -0.5;
    BandGrid synth;
    synth.axes = {axis, axis};
    synth.bands = 4;
    for (double ng1 : axis) {
        for (double ng2 : axis) {
            std::array<double, 4> e;
            int c = 0;
            for (int s1 : {+1, -1})
                for (int s2 : {+1, -1})
                    e[c++] = 2.0 * t_in * (cos_pi(ng1) * s1 + cos_pi(ng2) * s2) +
                             (2.0 * tp_in * cos_pi(ng1 + ng2) +
                              2.0 * tm_in * cos_pi(ng1 - ng2)) * s1 * s2;
            std::sort(e.begin(), e.end());
            for (double v : e) synth.energies.push_back(v);
            synth.point_converged.push_back(1);
        }
    }
    const auto sfit = extract_two_loop(synth);
    const bool synth_ok = std::abs(sfit.t - t_in) < 1e-10 &&
                          std::abs(sfit.t_plus - tp_in) < 1e-10 &&
                          std::abs(sfit.t_minus - tm_in) < 1e-10;

    // full model at the protected two-loop parameters, default truncation
    Truncation tr;
    const BandGrid bands = band_structure(array_spec(2, 200.0, 10.0, 250.0, 10.0, 0.5), 9, 4, tr);
    const auto fit = extract_two_loop(bands);
    double bandwidth = 0.0;
    for (long p = 0; p < bands.n_points(); ++p)
        bandwidth = std::max(bandwidth, bands.energy(p, 3) - bands.energy(p, 0));
    const bool full_ok = fit.j > 0.0 && std::abs(fit.t_plus) < 0.1 * std::abs(fit.t_minus) &&
                         fit.residual_rms < 0.05 * bandwidth;

    const double secs = sw.seconds();
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "synthetic recovered; J = %.4f GHz, t = %.2e, |t+/t-| = %.3f, resid/bw = %.4f",
                  fit.j, fit.t, std::abs(fit.t_plus / fit.t_minus),
                  fit.residual_rms / bandwidth);
    report(4, "two-loop model extraction", synth_ok && full_ok && secs < 600.0, buf, secs);
    CHECK(synth_ok);
    CHECK(fit.j > 0.0);
    CHECK(std::abs(fit.t_plus) < 0.1 * std::abs(fit.t_minus));
    CHECK(fit.residual_rms < 0.05 * bandwidth);
    CHECK(secs < 600.0);
}

TEST_CASE("criterion 5: protection-window broadening") {
    Stopwatch sw;
    const double e1 = e01_linearized(1, 100.0, 0.01);
    const double e2 = e01_linearized(2, 200.0, 0.01);
    const double e3 = e01_linearized(3, 350.0, 0.01);
    const bool ordering = e2 < e1 && e3 < e2;
    const bool plateau = e3 < 0.1 * e1;
    const double secs = sw.seconds();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "E01(N=1..3) = %.3f, %.3f, %.3f GHz; E01(3)/E01(1) = %.2f",
                  e1, e2, e3, e3 / e1);
    report(5, "protection-window broadening", ordering && plateau, buf, secs);
    CHECK(ordering);
    // The plateau as specified: at this detuning the window (set by
    // 2J/E_J1 ~ 1e-3) is already closed for every N, so this stays red.
    CHECK(plateau);
}

TEST_CASE("criterion 6: unbalanced junctions destroy the degeneracy") {
    Stopwatch sw;
    Truncation tr;
    CircuitSpec balanced = array_spec(2, 200.0, 10.0, 250.0, 10.0, 0.5);
    const double e_bal = converged_spectrum(balanced, tr, 2).e01;

    CircuitSpec unbal = balanced;
    for (auto& loop : unbal.loops) {
        loop.arm1.ej1 = 251.0;
        loop.arm2.ej1 = 249.0;
    }
    const double e_unbal = converged_spectrum(unbal, tr, 2).e01;
    const double secs = sw.seconds();
    const bool pass = e_unbal > 10.0 * e_bal;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "E01 balanced = %.3e, unbalanced = %.3e (x%.1f)", e_bal,
                  e_unbal, e_unbal / e_bal);
    report(6, "imbalance lifts degeneracy", pass, buf, secs);
    CHECK(pass);
}

TEST_CASE("criterion 7: collective-spin exact limits") {
    Stopwatch sw;
    LMGProblem ferro;
    ferro.n = 8;
    ferro.j = 0.7;
    const double gap_ferro = lmg_spectrum(ferro, 2).gap_e10;

    LMGProblem zeeman;
    zeeman.n = 9;
    zeeman.j = 0.0;
    zeeman.epsilon = 0.31;
    const double gap_zeeman = lmg_spectrum(zeeman, 2).gap_e10;

    double worst = 0.0;
    for (int n = 2; n <= 12; ++n) {
        const double t = -0.03, j = 0.45, eps = 0.12;
        const auto h = build_spin_hamiltonian(n, t, j, std::vector<double>(n, eps), {});
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> proj(maximal_spin_sector(h));
        LMGProblem p;
        p.n = n;
        p.t = t;
        p.j = j;
        p.epsilon = eps;
        const auto r = lmg_spectrum(p, n + 1);
        for (int i = 0; i <= n; ++i)
            worst = std::max(worst, std::abs(proj.eigenvalues()(i) - j - r.energies[i]));
    }
    const double secs = sw.seconds();
    const bool pass = std::abs(gap_ferro) < 1e-12 && std::abs(gap_zeeman - 0.62) < 1e-12 &&
                      worst < 1e-10;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "gap(t=eps=0) = %.1e, gap(J=0) - 2eps = %.1e, cross-module dev = %.1e",
                  gap_ferro, gap_zeeman - 0.62, worst);
    report(7, "collective-spin exact limits", pass, buf, secs);
    CHECK(std::abs(gap_ferro) < 1e-12);
    CHECK(std::abs(gap_zeeman - 0.62) < 1e-12);
    CHECK(worst < 1e-10);
}

TEST_CASE("criterion 8: gap-closing phase transition") {
    Stopwatch sw;
    const double j = 0.5; // 2J = 1
    std::vector<double> grid(151);
    for (int i = 0; i < 151; ++i) grid[i] = 1.5 * i / 150.0;

    double prev = 0.0;
    bool monotone = true;
    double star_2000 = 0.0;
    for (int n : {50, 200, 2000}) {
        const auto scan = transition_scan(n, j, grid);
        if (scan.eps_star <= prev || scan.eps_star > 2.0 * j) monotone = false;
        prev = scan.eps_star;
        if (n == 2000) {
            star_2000 = scan.eps_star;
            for (const auto& row : scan.rows)
                if (row.eps_over_2j > 0.05 && row.gap_over_4j < 0.05)
                    if (std::abs(row.sz_mean - row.eps_over_2j) > 0.05) monotone = false;
        }
    }
    const double secs = sw.seconds();
    const bool near_one = std::abs(star_2000 / (2.0 * j) - 1.0) < 0.05;
    const bool pass = monotone && near_one && secs < 120.0;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "eps*/2J (N=2000) = %.4f", star_2000 / (2.0 * j));
    report(8, "phase transition scan", pass, buf, secs);
    CHECK(near_one);
    CHECK(monotone);
    CHECK(secs < 120.0);
}

TEST_CASE("criterion 9: offset-charge stability map") {
    Stopwatch sw;
    Truncation tr;
    CircuitSpec s = array_spec(2, 200.0, 10.0, 250.0, 10.0, 0.5);

    auto levels = [&](double ng1, double ng2) {
        CircuitSpec local = s;
        local.loops[0].offset_charge = ng1;
        local.loops[1].offset_charge = ng2;
        return converged_spectrum(local, tr, 3);
    };

    // Exact lattice symmetries: joint charge flip and loop exchange.
    const double e_ref = levels(0.13, 0.27).e01;
    const double dev_joint = std::abs(levels(-0.13, -0.27).e01 - e_ref);
    const double dev_swap = std::abs(levels(0.27, 0.13).e01 - e_ref);
    const double dev_period = std::abs(levels(1.13, 0.27).e01 - e_ref);
    const bool exact_ok = dev_joint < 1e-9 && dev_swap < 1e-9 && dev_period < 1e-9;

    // Evenness in each argument separately: only approximate in the full
    // model (flipping one offset charge swaps the diagonal couplings, a
    // t_x^+-sized effect), measured here against the strict tolerance.
    const double dev_even1 = std::abs(levels(-0.13, 0.27).e01 - e_ref);
    const double dev_even2 = std::abs(levels(0.13, -0.27).e01 - e_ref);
    const bool even_each = dev_even1 < 1e-9 && dev_even2 < 1e-9;

    // doublet stability: gap from the qubit ground state to the third level
    double best = -1.0;
    int best_i = -1, best_j = -1;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            const auto r = levels(0.5 * i / 4.0, 0.5 * j / 4.0);
            const double stability = r.energies[2] - r.energies[0];
            if (stability > best) {
                best = stability;
                best_i = i;
                best_j = j;
            }
        }
    }
    const bool centered = best_i == 0 && best_j == 0;
    const double secs = sw.seconds();
    const bool pass = exact_ok && even_each && centered;
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "joint/swap/period dev = %.0e/%.0e/%.0e, per-arg evenness dev = %.1e, "
                  "argmax E2-E0 = (%.2f, %.2f)",
                  dev_joint, dev_swap, dev_period, std::max(dev_even1, dev_even2),
                  0.5 * best_i / 4.0, 0.5 * best_j / 4.0);
    report(9, "offset-charge stability map", pass, buf, secs);
    CHECK(exact_ok);
    // Strict per-argument evenness stays red: the measured violation is the
    // physics of the sum-direction coupling, not noise.
    CHECK(even_each);
    CHECK(centered);
}

TEST_CASE("criterion 10: CLI determinism and round-trip") {
    Stopwatch sw;
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "cpq_acceptance";
    fs::create_directories(dir);

    nlohmann::json doc;
    doc["mode"] = "spectrum";
    doc["circuit"] = {{"c_big", 0.0},
                      {"c_small", 96.851147},
                      {"loops",
                       {{{"arm1", {{"ej1", 0.0}, {"ej2", 5.0}}},
                         {"arm2", {{"ej1", 0.0}, {"ej2", 5.0}}},
                         {"flux", 0.5},
                         {"offset_charge", 0.0}}}}};
    doc["truncation"] = {{"n_max", 8}};
    doc["eigenvalues"] = 3;
    doc["sweep"] = nlohmann::json::array(
        {{{"name", "ng"}, {"paths", {"loops[0].offset_charge"}}, {"start", 0.0},
          {"stop", 1.0}, {"points", 11}}});
    doc["workers"] = 2;

    doc["output"] = (dir / "a").string();
    const auto out_a = run_sweep(parse_config(doc));
    doc["output"] = (dir / "b").string();
    run_sweep(parse_config(doc));
    const bool identical = slurp((dir / "a.csv").string()) == slurp((dir / "b.csv").string());

    const nlohmann::json meta = nlohmann::json::parse(slurp(out_a.meta_path));
    const auto out_c = run_sweep(parse_config(meta["config"]));
    const bool round_trip = slurp(out_c.csv_path) == slurp((dir / "b.csv").string());

    fs::remove_all(dir);
    const double secs = sw.seconds();
    report(10, "CLI determinism", identical && round_trip,
           std::string("byte-identical = ") + (identical ? "yes" : "no") +
               ", meta round-trip = " + (round_trip ? "yes" : "no"),
           secs);
    CHECK(identical);
    CHECK(round_trip);
}
