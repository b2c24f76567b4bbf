#ifndef CPQ_CHARGE_BASIS_HPP
#define CPQ_CHARGE_BASIS_HPP

#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "cpq/circuit.hpp"
#include "cpq/interferometer.hpp"

namespace cpq {

/// Per-island charge cutoff and the eigenvalue tolerance used when the
/// cutoff is refined.
struct Truncation {
    int n_max = 12;
    double convergence_tol = 1e-6;     // GHz
    long dim_ceiling = 1L << 21;

    void validate() const;
};

/// Hamiltonian in the truncated product charge basis
/// { |n_1..n_N> : n_i in [-n_max, n_max] + window_i }, stored sparse.
/// Island i moves in steps of stride_i = (2 n_max + 1)^i.
struct ChargeOperator {
    int n_islands = 0;
    int n_max = 0;
    long dim = 0;
    bool is_real = false;              // no sin(phi)/sin(2phi) terms present
    std::vector<int> window;           // per-island charge window center
    Eigen::SparseMatrix<std::complex<double>> h;
};

/// Low-lying spectrum (GHz) with solver metadata.  `vectors` holds the
/// eigenvectors column-wise when they were requested.
struct SpectrumResult {
    std::vector<double> energies;
    double e01 = 0.0;
    bool converged = false;
    int n_max_used = 0;
    double last_shift = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;                // Krylov basis size, 0 on the dense path
    Eigen::MatrixXcd vectors;
};

long charge_basis_dim(int n_islands, int n_max, long ceiling);

/// H = sum_ij 4 E_C^(ij) (n_i - ng_i)(n_j - ng_j)
///   + sum_i [ a1_i C1_i + b1_i S1_i + a2_i C2_i + b2_i S2_i ],
/// with Cm = (shift^{+m} + shift^{-m})/2 and Sm = (shift^{+m} - shift^{-m})/(2i).
/// Couplings that are exactly zero are never inserted, so symmetry-forbidden
/// blocks are structurally empty.
ChargeOperator build_hamiltonian_parts(const Eigen::MatrixXd& ec,
                                       const std::vector<HarmonicPotential>& potentials,
                                       const std::vector<double>& offset_charges,
                                       const Truncation& trunc,
                                       const std::vector<int>& window = {});

/// Assemble from a circuit description: charging matrix from the capacitance
/// network, one interferometer potential per loop.
ChargeOperator build_hamiltonian(const CircuitSpec& spec, const Truncation& trunc,
                                 FluxErrorModel model = FluxErrorModel::exact);

/// k smallest eigenvalues; dense solver for dim <= 4096, block Lanczos with
/// full reorthogonalization above.  Throws NoConvergence from the iterative
/// path.
SpectrumResult lowest_eigenvalues(const ChargeOperator& op, int k, bool with_vectors = false);

/// Doubles n_max until all k eigenvalues move by less than
/// trunc.convergence_tol between refinements or the next doubling would
/// exceed the dimension ceiling; `converged` reports which happened.
SpectrumResult converged_spectrum(const CircuitSpec& spec, const Truncation& trunc, int k,
                                  FluxErrorModel model = FluxErrorModel::exact,
                                  bool with_vectors = false);

/// Same refinement loop on explicit parts.
SpectrumResult converged_spectrum_parts(const Eigen::MatrixXd& ec,
                                        const std::vector<HarmonicPotential>& potentials,
                                        const std::vector<double>& offset_charges,
                                        const Truncation& trunc, int k,
                                        bool with_vectors = false);

/// Total Cooper-pair parity (-1)^{sum_i n_i} of a basis index.
double basis_parity(const ChargeOperator& op, long index);

/// <state| prod_i (-1)^{n_i} |state> for a retained eigenvector.
double parity_expectation(const ChargeOperator& op, const SpectrumResult& res, int state_index);
double parity_expectation(const ChargeOperator& op, const Eigen::VectorXcd& state);

} // namespace cpq

#endif
