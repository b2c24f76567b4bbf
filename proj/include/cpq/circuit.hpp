#ifndef CPQ_CIRCUIT_HPP
#define CPQ_CIRCUIT_HPP

#include <vector>

#include <Eigen/Dense>

#include "cpq/errors.hpp"

namespace cpq {

/// One junction of an interferometer loop, reduced to its first two
/// Josephson harmonics (GHz).
struct JunctionArm {
    double ej1 = 0.0;
    double ej2 = 0.0;
};

/// Two-arm interferometer threaded by `flux` (units of Phi0) with a gate
/// offset charge on its island (units of 2e).
struct InterferometerLoop {
    JunctionArm arm1;
    JunctionArm arm2;
    double flux = 0.5;
    double offset_charge = 0.0;
};

/// Declarative description of an N-loop array: the chain of loops, the end
/// shunt C_B and the inter-island coupling C_S (both fF).
struct CircuitSpec {
    std::vector<InterferometerLoop> loops;
    double c_big = 0.0;
    double c_small = 0.0;

    int n_loops() const { return static_cast<int>(loops.size()); }
    void validate() const;
};

/// Inverse branch capacitance matrix (fF^-1) together with the derived
/// charging-energy matrix E_C (GHz).
struct ChargingMatrix {
    Eigen::MatrixXd inv_cap;
    Eigen::MatrixXd ec;
};

/// (N+1)x(N+1) island (node) capacitance matrix: C_B+C_S on the end
/// diagonal, 2C_S in the interior, -C_S on the sub/superdiagonal and -C_B in
/// the corners.  For N=1 the single branch carries C_B and C_S in parallel.
Eigen::MatrixXd build_node_capacitance(const CircuitSpec& spec);

/// Change from island charges to branch charges, drop the free total-charge
/// mode, and invert the remaining NxN block numerically.
/// Throws SingularMatrix when the branch matrix is not invertible.
ChargingMatrix reduce_to_branch(const Eigen::MatrixXd& node_cap, int n);

/// Closed-form inverse kappa*Q + (1/C_S)*1 of the uniform branch matrix,
/// with kappa = -C_B / (C_S (C_S + C_B N)).  Used as an independent check of
/// reduce_to_branch.
Eigen::MatrixXd closed_form_inverse(int n, double c_big, double c_small);

/// build_node_capacitance followed by reduce_to_branch.
ChargingMatrix charging_matrix(const CircuitSpec& spec);

} // namespace cpq

#endif
