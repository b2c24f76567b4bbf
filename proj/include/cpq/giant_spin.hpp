#ifndef CPQ_GIANT_SPIN_HPP
#define CPQ_GIANT_SPIN_HPP

#include <vector>

#include <Eigen/Dense>

#include "cpq/errors.hpp"

namespace cpq {

/// Collective-spin Hamiltonian H = -2 (eps Sz - 2t Sx) - (4j/n) Sx^2 in the
/// maximal sector S = n/2 (dimension n+1).  All energies GHz.
struct LMGProblem {
    int n = 1;
    double t = 0.0;
    double j = 0.0;
    double epsilon = 0.0;

    void validate() const;
};

struct LMGResult {
    std::vector<double> energies; // k lowest, ascending
    double gap_e10 = 0.0;
    double sz_mean = 0.0;         // <Sz>/S in the ground state
    double sx_mean = 0.0;
    double sy_mean = 0.0;
};

/// Variational minimum of the spin-coherent-state energy
/// E(theta, chi) = -eps n cos(theta) - j (n-1) (sin(theta) cos(chi))^2.
struct MeanFieldMinimum {
    double theta0 = 0.0;           // minimizer on [0, pi]
    double chi0 = 0.0;             // 0 or pi
    double energy = 0.0;           // GHz
    bool chi_twofold = false;      // both chi values minimize
    double theta0_large_n = 0.0;   // arccos(eps/2j), the n -> inf form
};

struct SymmetryReport {
    double s2_commutator_rel = 0.0; // ||[H, S^2]|| / ||H||, Frobenius
    bool s2_ok = false;
    bool spin_flip_symmetric = false; // spin-flip symmetry present (t == 0)
    double max_abs_sx = 0.0;          // over the lowest eigenstates, t == 0 only
    double max_abs_sy = 0.0;
    bool transverse_zero_ok = false;
};

/// Lowest k eigenvalues plus ground-state spin expectations.  At t = 0 the
/// Hamiltonian splits into two spin-flip parity blocks, each an unreduced
/// symmetric tridiagonal; that path is used for any n and keeps degenerate
/// partners in separate blocks.  For t != 0 a dense solve is used up to
/// dimension 4096 and block Lanczos on the pentadiagonal matrix beyond.
LMGResult lmg_spectrum(const LMGProblem& p, int k);

SymmetryReport check_symmetries(const LMGProblem& p);

/// Coarse grid (1e4 points) plus golden-section refinement to 1e-10 in theta.
MeanFieldMinimum mean_field_minimum(const LMGProblem& p);

struct TransitionRow {
    double eps = 0.0;
    double eps_over_2j = 0.0;
    double gap_e10 = 0.0;
    double gap_over_4j = 0.0;
    double sz_mean = 0.0;
};

struct TransitionScan {
    std::vector<TransitionRow> rows;
    double eps_star = 0.0; // first grid point with gap_e10 > threshold * 4j
};

/// t = 0 gap-closing scan across an ascending epsilon grid.
TransitionScan transition_scan(int n, double j, const std::vector<double>& eps_grid,
                               double gap_threshold = 0.05, int workers = 0);

} // namespace cpq

#endif
