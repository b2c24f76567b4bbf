#include "cpq/circuit.hpp"

#include <cmath>

#include "cpq/constants.hpp"

namespace cpq {

void CircuitSpec::validate() const {
    if (loops.empty())
        throw InvalidSpec("circuit needs at least one loop");
    if (!(c_small > 0.0))
        throw InvalidSpec("c_small must be > 0 fF");
    if (c_big < 0.0)
        throw InvalidSpec("c_big must be >= 0 fF");
    for (std::size_t i = 0; i < loops.size(); ++i) {
        const auto& l = loops[i];
        if (l.arm1.ej1 < 0 || l.arm1.ej2 < 0 || l.arm2.ej1 < 0 || l.arm2.ej2 < 0)
            throw InvalidSpec("loop " + std::to_string(i) + ": junction energies must be >= 0");
        if (!std::isfinite(l.flux) || !std::isfinite(l.offset_charge))
            throw InvalidSpec("loop " + std::to_string(i) + ": flux and offset_charge must be finite");
    }
}

Eigen::MatrixXd build_node_capacitance(const CircuitSpec& spec) {
    spec.validate();
    const int n = spec.n_loops();
    const double cb = spec.c_big;
    const double cs = spec.c_small;

    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n + 1, n + 1);
    if (n == 1) {
        // Both capacitors sit across the one branch.
        c << cb + cs, -(cb + cs), -(cb + cs), cb + cs;
        return c;
    }
    for (int i = 0; i <= n; ++i)
        c(i, i) = (i == 0 || i == n) ? cb + cs : 2.0 * cs;
    for (int i = 0; i < n; ++i) {
        c(i, i + 1) = -cs;
        c(i + 1, i) = -cs;
    }
    c(0, n) -= cb;
    c(n, 0) -= cb;
    return c;
}

ChargingMatrix reduce_to_branch(const Eigen::MatrixXd& node_cap, int n) {
    if (node_cap.rows() != n + 1 || node_cap.cols() != n + 1)
        throw InvalidSpec("node capacitance matrix must be (N+1)x(N+1)");

    // Rows 1..N of R are the branch differences, the last row is the total
    // charge (the free mode).  The quadratic form transforms with R^-1, so
    // the branch capacitance matrix is the leading NxN block of
    // R^-T * C_node * R^-1.
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 0; i < n; ++i) {
        r(i, i) = -1.0;
        r(i, i + 1) = 1.0;
    }
    r.row(n).setOnes();

    Eigen::PartialPivLU<Eigen::MatrixXd> rlu(r);
    const Eigen::MatrixXd rinv = rlu.inverse();
    const Eigen::MatrixXd full = rinv.transpose() * node_cap * rinv;
    const Eigen::MatrixXd branch = full.topLeftCorner(n, n);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(branch);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
        throw SingularMatrix("branch capacitance matrix is singular");

    ChargingMatrix out;
    out.inv_cap = lu.inverse();
    // Symmetrize away the last bits of inversion noise.
    out.inv_cap = 0.5 * (out.inv_cap + out.inv_cap.transpose()).eval();
    out.ec = kChargingGHzfF * out.inv_cap;
    return out;
}

Eigen::MatrixXd closed_form_inverse(int n, double c_big, double c_small) {
    if (n < 1)
        throw InvalidSpec("N must be >= 1");
    if (!(c_small > 0.0))
        throw InvalidSpec("c_small must be > 0 fF");
    const double kappa = -c_big / (c_small * (c_small + c_big * n));
    Eigen::MatrixXd inv = Eigen::MatrixXd::Constant(n, n, kappa);
    inv.diagonal().array() += 1.0 / c_small;
    return inv;
}

ChargingMatrix charging_matrix(const CircuitSpec& spec) {
    return reduce_to_branch(build_node_capacitance(spec), spec.n_loops());
}

} // namespace cpq
