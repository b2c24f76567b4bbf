#ifndef CPQ_DAVIDSON_HPP
#define CPQ_DAVIDSON_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cpq/errors.hpp"

namespace cpq {

struct DavidsonOptions {
    int k = 6;                 // number of lowest eigenvalues wanted
    bool with_vectors = false;
    int start_block = 6;       // deterministic start vectors (covers clusters up to this size)
    int max_basis = 64;        // thick-restart ceiling on stored basis vectors
    int max_matvecs = 20000;
    double rel_tol = 1e-9;     // residual tolerance relative to the operator norm bound
    double norm_bound = 0.0;   // caller-supplied ||H|| estimate; 0: use Ritz spread
};

template <typename Scalar>
struct DavidsonResult {
    std::vector<double> eigenvalues; // ascending, size k
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors; // dim x k when requested
    int iterations = 0;              // matrix-block applications
    double max_residual = 0.0;
};

namespace detail {

inline double splitmix_unit(std::uint64_t i) {
    std::uint64_t z = i * 0x9E3779B97F4A7C15ull + 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1p-52 - 1.0;
}

// Deterministic start block.  Column 0 is the all-ones vector; column 1
// alternates with index parity (equal to total charge parity for an odd
// basis size per island, so tightly split parity doublets are spanned from
// the start); the rest are fixed-seed pseudo-random and overlap every
// symmetry sector -- structured starts alone never reach eigenvectors that
// are odd under a lattice symmetry such as the loop-order mirror.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> start_block(Eigen::Index dim, int block) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> x(dim, block);
    for (Eigen::Index i = 0; i < dim; ++i) {
        x(i, 0) = Scalar(1.0);
        if (block > 1) x(i, 1) = (i % 2 == 0) ? Scalar(1.0) : Scalar(-1.0);
        for (int b = 2; b < block; ++b)
            x(i, b) = Scalar(splitmix_unit(static_cast<std::uint64_t>(i) + 0x51ull * b));
    }
    return x;
}

} // namespace detail

/// Lowest-k eigenpairs of a Hermitian operator by a diagonally
/// preconditioned block Davidson iteration with full reorthogonalization,
/// thick restarts and a fixed deterministic start block.  `apply` computes
/// Y = H * X for a dim x b block; `diagonal` is the real diagonal of H.
/// `warm_start` columns, when given, are used ahead of the built-in block.
/// Throws NoConvergence when the matvec budget runs out.
template <typename Scalar, typename MatVec>
DavidsonResult<Scalar> davidson_lowest(
    Eigen::Index dim, MatVec&& apply, const Eigen::VectorXd& diagonal,
    const DavidsonOptions& opt,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* warm_start = nullptr) {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    const int k = opt.k;
    if (k < 1 || k >= dim)
        throw InvalidSpec("davidson: need 1 <= k < dim");
    if (diagonal.size() != dim)
        throw InvalidSpec("davidson: diagonal size mismatch");
    const int max_basis =
        static_cast<int>(std::min<Eigen::Index>(std::max(opt.max_basis, 3 * k + 3), dim));
    const int keep = std::min(2 * k + 2, max_basis - k); // retained at restart

    Mat v(dim, max_basis);
    Mat w(dim, max_basis); // W = H V
    Mat t = Mat::Zero(max_basis, max_basis);
    std::uint64_t fresh_salt = 1000;

    // Orthonormalize a candidate against the current basis (two passes).
    // Returns false when the candidate is numerically dependent.
    int m = 0;
    auto orthonormalize = [&](Vec& cand) {
        const double initial = cand.norm();
        for (int pass = 0; pass < 2; ++pass) {
            if (m > 0)
                cand -= v.leftCols(m) * (v.leftCols(m).adjoint() * cand).eval();
        }
        const double nrm = cand.norm();
        // Keep even nearly dependent candidates: after two projection
        // passes the remainder is orthogonal to working precision, and near
        // convergence it is exactly where the missing information sits.
        if (nrm < 1e-11 * std::max(initial, 1e-30)) return false;
        cand /= nrm;
        return true;
    };

    int matvecs = 0;
    auto append_columns = [&](Mat& cand) {
        int added = 0;
        for (int c = 0; c < cand.cols() && m < max_basis; ++c) {
            Vec col = cand.col(c);
            if (!orthonormalize(col)) continue;
            v.col(m) = col;
            ++m;
            ++added;
        }
        if (added > 0) {
            auto vn = v.middleCols(m - added, added);
            auto wn = w.middleCols(m - added, added);
            wn.setZero();
            apply(vn, wn);
            matvecs += added;
            t.block(0, m - added, m, added) = v.leftCols(m).adjoint() * wn;
            t.block(m - added, 0, added, m - added) =
                t.block(0, m - added, m - added, added).adjoint();
        }
        return added;
    };

    {
        if (warm_start && warm_start->rows() == dim && warm_start->cols() > 0) {
            Mat ws = *warm_start;
            append_columns(ws);
        }
        Mat x = detail::start_block<Scalar>(dim, std::min<Eigen::Index>(
                                                     std::max(opt.start_block, k), dim));
        append_columns(x);
    }

    Eigen::SelfAdjointEigenSolver<Mat> eig;
    double worst_res = std::numeric_limits<double>::infinity();

    while (true) {
        eig.compute(0.5 * (t.topLeftCorner(m, m) + t.topLeftCorner(m, m).adjoint()));
        const auto& theta = eig.eigenvalues();
        const auto& s = eig.eigenvectors();

        const int kk = std::min(k, m);
        Mat x = v.leftCols(m) * s.leftCols(kk);
        Mat hx = w.leftCols(m) * s.leftCols(kk);
        Mat resid = hx;
        for (int i = 0; i < kk; ++i) resid.col(i) -= theta(i) * x.col(i);

        const double scale = opt.norm_bound > 0.0
                                 ? opt.norm_bound
                                 : std::max({std::abs(theta(0)), std::abs(theta(m - 1)), 1.0});
        const double tol_abs = opt.rel_tol * scale;

        worst_res = 0.0;
        for (int i = 0; i < kk; ++i) worst_res = std::max(worst_res, resid.col(i).norm());

        if (m >= k && worst_res < tol_abs) {
            DavidsonResult<Scalar> out;
            out.iterations = matvecs;
            out.max_residual = worst_res;
            out.eigenvalues.assign(theta.data(), theta.data() + k);
            if (opt.with_vectors) out.vectors = std::move(x);
            return out;
        }
        if (matvecs > opt.max_matvecs)
            throw NoConvergence("davidson: matvec budget exhausted", matvecs, worst_res);

        // Thick restart before the basis overflows.
        if (m + kk > max_basis) {
            const int nkeep = std::min(keep + k, m);
            Mat vc = v.leftCols(m) * s.leftCols(nkeep);
            Mat wc = w.leftCols(m) * s.leftCols(nkeep);
            v.leftCols(nkeep) = vc;
            w.leftCols(nkeep) = wc;
            t.setZero();
            for (int i = 0; i < nkeep; ++i) t(i, i) = theta(i);
            m = nkeep;
        }

        // Expand with diagonally preconditioned residuals of the unconverged
        // pairs; dead directions are replaced by fresh generic vectors.
        Mat cand(dim, kk);
        int nc = 0;
        const double floor = std::max(1e-6 * scale, 1e-12);
        for (int i = 0; i < kk; ++i) {
            if (resid.col(i).norm() < tol_abs) continue;
            Vec c = resid.col(i);
            for (Eigen::Index r = 0; r < dim; ++r) {
                double denom = diagonal(r) - theta(i);
                if (std::abs(denom) < floor) denom = denom < 0 ? -floor : floor;
                c(r) /= denom;
            }
            cand.col(nc++) = c;
        }
        if (nc == 0) {
            // All k residuals below tolerance would have returned above;
            // being here means m < k.  Feed generic vectors.
            cand.resize(dim, 1);
            for (Eigen::Index i = 0; i < dim; ++i)
                cand(i, 0) = Scalar(detail::splitmix_unit(static_cast<std::uint64_t>(i) +
                                                          0x51ull * fresh_salt));
            ++fresh_salt;
            nc = 1;
        }
        Mat cand_trim = cand.leftCols(nc);
        if (append_columns(cand_trim) == 0) {
            Mat fresh(dim, 1);
            for (Eigen::Index i = 0; i < dim; ++i)
                fresh(i, 0) = Scalar(detail::splitmix_unit(static_cast<std::uint64_t>(i) +
                                                           0x51ull * fresh_salt));
            ++fresh_salt;
            if (append_columns(fresh) == 0)
                throw NoConvergence("davidson: basis stagnated", matvecs, worst_res);
        }
    }
}

} // namespace cpq

#endif
