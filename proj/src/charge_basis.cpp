#include "cpq/charge_basis.hpp"

#include <cmath>

#include "cpq/davidson.hpp"

namespace cpq {

using cd = std::complex<double>;

void Truncation::validate() const {
    if (n_max < 2)
        throw InvalidSpec("n_max must be >= 2");
    if (!(convergence_tol > 0.0))
        throw InvalidSpec("convergence_tol must be > 0");
    if (dim_ceiling < 5)
        throw InvalidSpec("dim_ceiling too small");
}

long charge_basis_dim(int n_islands, int n_max, long ceiling) {
    const long base = 2L * n_max + 1;
    long dim = 1;
    for (int i = 0; i < n_islands; ++i) {
        if (dim > ceiling / base)
            throw DimensionOverflow("charge basis exceeds dimension ceiling", -1, ceiling);
        dim *= base;
    }
    if (dim > ceiling)
        throw DimensionOverflow("charge basis exceeds dimension ceiling", dim, ceiling);
    return dim;
}

ChargeOperator build_hamiltonian_parts(const Eigen::MatrixXd& ec,
                                       const std::vector<HarmonicPotential>& potentials,
                                       const std::vector<double>& offset_charges,
                                       const Truncation& trunc,
                                       const std::vector<int>& window) {
    trunc.validate();
    const int n = static_cast<int>(potentials.size());
    if (n < 1 || ec.rows() != n || ec.cols() != n ||
        static_cast<int>(offset_charges.size()) != n)
        throw InvalidSpec("inconsistent island count across ec/potentials/offsets");
    if (!window.empty() && static_cast<int>(window.size()) != n)
        throw InvalidSpec("window size mismatch");

    ChargeOperator op;
    op.n_islands = n;
    op.n_max = trunc.n_max;
    op.window = window.empty() ? std::vector<int>(n, 0) : window;
    op.dim = charge_basis_dim(n, trunc.n_max, trunc.dim_ceiling);

    const long base = 2L * trunc.n_max + 1;
    std::vector<long> stride(n);
    stride[0] = 1;
    for (int i = 1; i < n; ++i) stride[i] = stride[i - 1] * base;

    op.is_real = true;
    for (const auto& p : potentials)
        if (p.b1 != 0.0 || p.b2 != 0.0) op.is_real = false;

    long nnz_per_row = 1;
    for (const auto& p : potentials) {
        if (p.a1 != 0.0 || p.b1 != 0.0) nnz_per_row += 2;
        if (p.a2 != 0.0 || p.b2 != 0.0) nnz_per_row += 2;
    }

    std::vector<Eigen::Triplet<cd>> trip;
    trip.reserve(static_cast<std::size_t>(op.dim * nnz_per_row));

    std::vector<int> digit(n, 0);
    std::vector<double> q(n); // n_i - ng_i per island
    for (long idx = 0; idx < op.dim; ++idx) {
        for (int i = 0; i < n; ++i)
            q[i] = (digit[i] - trunc.n_max + op.window[i]) - offset_charges[i];

        double ekin = 0.0;
        for (int i = 0; i < n; ++i) {
            ekin += 4.0 * ec(i, i) * q[i] * q[i];
            for (int j = i + 1; j < n; ++j)
                ekin += 8.0 * ec(i, j) * q[i] * q[j];
        }
        trip.emplace_back(idx, idx, cd(ekin, 0.0));

        for (int i = 0; i < n; ++i) {
            const auto& p = potentials[i];
            const double am[2] = {p.a1, p.a2};
            const double bm[2] = {p.b1, p.b2};
            for (int m = 1; m <= 2; ++m) {
                const double a = am[m - 1], b = bm[m - 1];
                if (a == 0.0 && b == 0.0) continue;
                if (digit[i] + m >= base) continue;
                const long jdx = idx + m * stride[i];
                // <n+m|H|n> = a/2 - i b/2 and its Hermitian image.
                trip.emplace_back(jdx, idx, cd(0.5 * a, -0.5 * b));
                trip.emplace_back(idx, jdx, cd(0.5 * a, 0.5 * b));
            }
        }

        for (int i = 0; i < n; ++i) {
            if (++digit[i] < base) break;
            digit[i] = 0;
        }
    }

    op.h.resize(op.dim, op.dim);
    op.h.setFromTriplets(trip.begin(), trip.end());
    op.h.makeCompressed();
    return op;
}

ChargeOperator build_hamiltonian(const CircuitSpec& spec, const Truncation& trunc,
                                 FluxErrorModel model) {
    spec.validate();
    const ChargingMatrix cm = charging_matrix(spec);
    std::vector<HarmonicPotential> pots;
    std::vector<double> ng;
    pots.reserve(spec.loops.size());
    for (const auto& loop : spec.loops) {
        pots.push_back(loop_potential(loop, model));
        ng.push_back(loop.offset_charge);
    }
    return build_hamiltonian_parts(cm.ec, pots, ng, trunc);
}

namespace {

Eigen::SparseMatrix<double> real_part(const Eigen::SparseMatrix<cd>& h) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(h.nonZeros());
    for (int outer = 0; outer < h.outerSize(); ++outer)
        for (Eigen::SparseMatrix<cd>::InnerIterator it(h, outer); it; ++it)
            trip.emplace_back(it.row(), it.col(), it.value().real());
    Eigen::SparseMatrix<double> out(h.rows(), h.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

SpectrumResult solve_dense(const ChargeOperator& op, int k, bool with_vectors) {
    SpectrumResult res;
    res.n_max_used = op.n_max;
    const int opts = with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
    if (op.is_real) {
        Eigen::MatrixXd dense(real_part(op.h));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense, opts);
        res.energies.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + k);
        if (with_vectors)
            res.vectors = eig.eigenvectors().leftCols(k).cast<cd>();
    } else {
        Eigen::MatrixXcd dense(op.h);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(dense, opts);
        res.energies.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + k);
        if (with_vectors)
            res.vectors = eig.eigenvectors().leftCols(k);
    }
    res.converged = true;
    res.e01 = res.energies[1] - res.energies[0];
    return res;
}

SpectrumResult solve_sparse(const ChargeOperator& op, int k, bool with_vectors,
                            const Eigen::MatrixXcd* warm = nullptr) {
    SpectrumResult res;
    res.n_max_used = op.n_max;

    Eigen::VectorXd diag = Eigen::VectorXd::Zero(op.dim);
    Eigen::VectorXd row_abs = Eigen::VectorXd::Zero(op.dim);
    for (int outer = 0; outer < op.h.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<cd>::InnerIterator it(op.h, outer); it; ++it) {
            if (it.row() == it.col()) diag(it.row()) = it.value().real();
            row_abs(it.row()) += std::abs(it.value());
        }
    }
    DavidsonOptions dopt;
    dopt.k = k;
    dopt.with_vectors = with_vectors;
    dopt.norm_bound = row_abs.maxCoeff();

    if (op.is_real) {
        const Eigen::SparseMatrix<double> hr = real_part(op.h);
        auto apply = [&hr](const auto& x, auto& y) { y.noalias() = hr * x; };
        Eigen::MatrixXd warm_real;
        if (warm) warm_real = warm->real();
        auto lr = davidson_lowest<double>(op.dim, apply, diag, dopt,
                                          warm ? &warm_real : nullptr);
        res.energies = lr.eigenvalues;
        res.iterations = lr.iterations;
        if (with_vectors) res.vectors = lr.vectors.cast<cd>();
    } else {
        auto apply = [&op](const auto& x, auto& y) { y.noalias() = op.h * x; };
        auto lr = davidson_lowest<cd>(op.dim, apply, diag, dopt, warm);
        res.energies = lr.eigenvalues;
        res.iterations = lr.iterations;
        if (with_vectors) res.vectors = lr.vectors;
    }
    res.converged = true;
    res.e01 = res.energies[1] - res.energies[0];
    return res;
}

// Maps eigenvectors between charge windows: island digits shift by the
// cutoff difference, amplitudes carry over.
Eigen::MatrixXcd embed_charge_vectors(int n_islands, int n_max_old, int n_max_new, long dim_new,
                                      const Eigen::MatrixXcd& v) {
    const long b_old = 2L * n_max_old + 1;
    const long b_new = 2L * n_max_new + 1;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim_new, v.cols());
    for (long idx = 0; idx < v.rows(); ++idx) {
        long rem = idx, nidx = 0, stride = 1;
        for (int i = 0; i < n_islands; ++i) {
            nidx += (rem % b_old + (n_max_new - n_max_old)) * stride;
            rem /= b_old;
            stride *= b_new;
        }
        out.row(nidx) = v.row(idx);
    }
    return out;
}

} // namespace

namespace {

bool parity_symmetric(const ChargeOperator& op) {
    for (int outer = 0; outer < op.h.outerSize(); ++outer)
        for (Eigen::SparseMatrix<cd>::InnerIterator it(op.h, outer); it; ++it)
            if (((it.row() ^ it.col()) & 1L) != 0) return false;
    return true;
}

// Eigenvectors inside a near-degenerate cluster come out of the solver in an
// arbitrary mixture.  When the operator conserves total charge parity,
// rotate each cluster into the parity eigenbasis (even member first).
void parity_adapt_clusters(const ChargeOperator& op, SpectrumResult& res) {
    if (res.vectors.cols() == 0 || !parity_symmetric(op)) return;
    const int k = static_cast<int>(res.vectors.cols());
    double scale = 1e-30;
    for (double e : res.energies) scale = std::max(scale, std::abs(e));
    const double tol = 1e-8 * scale;

    Eigen::VectorXd parity(op.dim);
    for (long i = 0; i < op.dim; ++i) parity(i) = basis_parity(op, i);

    for (int lo = 0; lo < k;) {
        int hi = lo + 1;
        while (hi < k && res.energies[hi] - res.energies[hi - 1] < tol) ++hi;
        if (hi - lo > 1) {
            const int w = hi - lo;
            Eigen::MatrixXcd block = res.vectors.middleCols(lo, w);
            Eigen::MatrixXcd pb = parity.asDiagonal() * block;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(block.adjoint() * pb);
            Eigen::MatrixXcd rot = eig.eigenvectors();
            // even member first
            res.vectors.middleCols(lo, w) = block * rot.rowwise().reverse();
        }
        lo = hi;
    }
}

} // namespace

SpectrumResult lowest_eigenvalues(const ChargeOperator& op, int k, bool with_vectors) {
    if (k < 2 || k >= op.dim)
        throw InvalidSpec("need 2 <= k < dim");
    SpectrumResult res =
        op.dim <= 4096 ? solve_dense(op, k, with_vectors) : solve_sparse(op, k, with_vectors);
    if (with_vectors) parity_adapt_clusters(op, res);
    return res;
}

SpectrumResult converged_spectrum_parts(const Eigen::MatrixXd& ec,
                                        const std::vector<HarmonicPotential>& potentials,
                                        const std::vector<double>& offset_charges,
                                        const Truncation& trunc, int k,
                                        bool with_vectors) {
    trunc.validate();
    const int n = static_cast<int>(potentials.size());

    // Sparse levels always keep their Ritz vectors: the next refinement
    // warm-starts from them, which is where almost all the time goes.
    auto solve = [&](int n_max, bool vecs, const SpectrumResult* prior) {
        Truncation t = trunc;
        t.n_max = n_max;
        ChargeOperator op = build_hamiltonian_parts(ec, potentials, offset_charges, t);
        if (op.dim <= 4096) return lowest_eigenvalues(op, k, vecs);
        Eigen::MatrixXcd warm;
        if (prior && prior->vectors.cols() > 0 && prior->n_max_used < n_max) {
            warm = embed_charge_vectors(n, prior->n_max_used, n_max, op.dim, prior->vectors);
        }
        SpectrumResult r = solve_sparse(op, k, true, warm.cols() > 0 ? &warm : nullptr);
        parity_adapt_clusters(op, r);
        return r;
    };

    SpectrumResult prev = solve(trunc.n_max, false, nullptr);
    for (int n_max = 2 * trunc.n_max;; n_max *= 2) {
        bool fits = true;
        try {
            charge_basis_dim(n, n_max, trunc.dim_ceiling);
        } catch (const DimensionOverflow&) {
            fits = false;
        }
        if (!fits) {
            prev.converged = false;
            if (with_vectors && prev.vectors.cols() == 0) {
                SpectrumResult redo = solve(prev.n_max_used, true, nullptr);
                redo.converged = false;
                redo.last_shift = prev.last_shift;
                return redo;
            }
            if (!with_vectors) prev.vectors.resize(0, 0);
            return prev;
        }
        SpectrumResult next = solve(n_max, false, &prev);
        double shift = 0.0;
        for (int i = 0; i < k; ++i)
            shift = std::max(shift, std::abs(next.energies[i] - prev.energies[i]));
        next.last_shift = shift;
        if (shift < trunc.convergence_tol) {
            next.converged = true;
            if (with_vectors && next.vectors.cols() == 0) {
                SpectrumResult redo = solve(n_max, true, &prev);
                redo.converged = true;
                redo.last_shift = shift;
                return redo;
            }
            if (!with_vectors) next.vectors.resize(0, 0);
            return next;
        }
        prev = next;
    }
}

SpectrumResult converged_spectrum(const CircuitSpec& spec, const Truncation& trunc, int k,
                                  FluxErrorModel model, bool with_vectors) {
    spec.validate();
    const ChargingMatrix cm = charging_matrix(spec);
    std::vector<HarmonicPotential> pots;
    std::vector<double> ng;
    for (const auto& loop : spec.loops) {
        pots.push_back(loop_potential(loop, model));
        ng.push_back(loop.offset_charge);
    }
    return converged_spectrum_parts(cm.ec, pots, ng, trunc, k, with_vectors);
}

double basis_parity(const ChargeOperator& op, long index) {
    // Base (2 n_max + 1) is odd, so index parity equals digit-sum parity.
    int shift = 0;
    for (int i = 0; i < op.n_islands; ++i)
        shift += op.window[i] - op.n_max;
    const bool odd = ((index & 1L) ^ (shift & 1)) != 0;
    return odd ? -1.0 : 1.0;
}

double parity_expectation(const ChargeOperator& op, const Eigen::VectorXcd& state) {
    if (state.size() != op.dim)
        throw InvalidSpec("state dimension mismatch");
    double acc = 0.0;
    for (long i = 0; i < op.dim; ++i)
        acc += basis_parity(op, i) * std::norm(state(i));
    return acc;
}

double parity_expectation(const ChargeOperator& op, const SpectrumResult& res, int state_index) {
    if (state_index < 0 || state_index >= res.vectors.cols())
        throw std::out_of_range("state index outside retained eigenvectors");
    return parity_expectation(op, Eigen::VectorXcd(res.vectors.col(state_index)));
}

} // namespace cpq
