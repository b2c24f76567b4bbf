#ifndef CPQ_EFFECTIVE_SPIN_HPP
#define CPQ_EFFECTIVE_SPIN_HPP

#include <vector>

#include <Eigen/Dense>

#include "cpq/charge_basis.hpp"

// C99 complex.h (reached through the LAPACK backend) leaks an `I` macro.
#ifdef I
#undef I
#endif

namespace cpq {

/// Low-lying bands over a cartesian offset-charge grid (one axis per loop),
/// energies sorted ascending per grid point.
struct BandGrid {
    std::vector<std::vector<double>> axes; // offset-charge samples per loop
    int bands = 0;
    std::vector<double> energies;          // [point][band], first axis slowest
    std::vector<char> point_converged;

    long n_points() const;
    long point_index(const std::vector<int>& coord) const;
    double energy(long point, int band) const { return energies[point * bands + band]; }
};

/// Effective hopping parameters extracted from bands, all GHz.
/// `j` uses the two-spin convention (coupling term -2 j sx sx), j = -t_minus.
struct SpinModelFit {
    double t = 0.0;
    double t_in = 0.0;
    double t_out = 0.0;
    double t_plus = 0.0;
    double t_minus = 0.0;
    double j = 0.0;
    std::vector<double> epsilon;
    double residual_rms = 0.0;
};

enum class PauliOp : char { I = 0, X = 1, Y = 2, Z = 3 };

struct PauliTerm {
    double coeff = 0.0;          // GHz, real: Hermitian strings only
    std::vector<PauliOp> ops;    // one per site
};

/// Real-weighted sum of Pauli strings.
struct PauliHamiltonian {
    int n_spins = 0;
    std::vector<PauliTerm> terms;

    Eigen::MatrixXcd to_dense() const;
};

/// converged_spectrum on every point of a grid over [ng_start, ng_stop] per
/// loop (endpoints included; `grid_points` odd and >= 5 so 0 and 1/2 are both
/// on the default grid).  Points run in parallel.
BandGrid band_structure(const CircuitSpec& spec, int grid_points, int bands,
                        const Truncation& trunc,
                        FluxErrorModel model = FluxErrorModel::exact,
                        double ng_start = 0.0, double ng_stop = 0.5, int workers = 0);

/// Single-loop fit: t = -E01(ng=0)/4; residual_rms measures the deviation of
/// E01(ng) from |4 t cos(pi ng)| over the grid.  epsilon[0] reports the
/// splitting floor E01(1/2)/2 (zero for a protected loop).
SpinModelFit extract_single_loop(const BandGrid& bands);

/// Two-loop fit of E(s1,s2) = 2 t_par (c1 s1 + c2 s2)
/// + (2 t_plus c_+ + 2 t_minus c_-) s1 s2 with c_i = cos(pi ng_i),
/// c_± = cos(pi [ng_1 ± ng_2]); linear least squares with sorted-spectrum
/// matching at each grid point.
SpinModelFit extract_two_loop(const BandGrid& bands);

/// H = 2t sum_i cos(pi ng_i) sx~_i
///   - (2j/n) sum_{i<j} cos(pi [ng_i - ng_j]) sx~_i sx~_j - sum_i eps_i sz_i,
/// where sx~ = cos(pi ng) sx + sin(pi ng) sy is the offset-charge rotated
/// Pauli.
PauliHamiltonian build_spin_hamiltonian(int n, double t, double j,
                                        const std::vector<double>& eps,
                                        const std::vector<double>& offset_charges);

/// Adds (t_in - t_out) sx_i and -eps_i sz_i error terms.
PauliHamiltonian inject_error_terms(const PauliHamiltonian& h,
                                    const std::vector<double>& imbalance,
                                    const std::vector<double>& flux_detuning);

/// Projection of a permutation-symmetric spin Hamiltonian onto the maximal
/// total-spin sector (the (n+1)-dimensional symmetric subspace).
Eigen::MatrixXd maximal_spin_sector(const PauliHamiltonian& h);

} // namespace cpq

#endif
