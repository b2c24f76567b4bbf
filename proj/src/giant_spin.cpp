#include "cpq/giant_spin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>

#include "cpq/constants.hpp"
#include "cpq/davidson.hpp"
#include "cpq/parallel.hpp"

namespace cpq {

void LMGProblem::validate() const {
    if (n < 1)
        throw InvalidSpec("LMG needs n >= 1");
    if (j < 0.0)
        throw InvalidSpec("LMG coupling j must be >= 0");
    if (!std::isfinite(t) || !std::isfinite(epsilon))
        throw InvalidSpec("LMG parameters must be finite");
}

namespace {

// Ladder factor sqrt(S(S+1) - m(m+1)).
double ladder(double s, double m) { return std::sqrt(s * (s + 1.0) - m * (m + 1.0)); }

// Diagonal of H in the Sz basis (Sx^2 contributes (S(S+1) - m^2)/2).
double diag_element(const LMGProblem& p, double s, double m) {
    return -2.0 * p.epsilon * m - (4.0 * p.j / p.n) * 0.5 * (s * (s + 1.0) - m * m);
}

// Sx^2 element <m+2|Sx^2|m> = c(m) c(m+1) / 4.
double skip_element(const LMGProblem& p, double s, double m) {
    return -(4.0 * p.j / p.n) * 0.25 * ladder(s, m) * ladder(s, m + 1.0);
}

struct TridiagBlock {
    std::vector<double> m;    // Sz eigenvalue per block row
    Eigen::VectorXd diag;
    Eigen::VectorXd sub;
};

// Spin-flip parity blocks of the t = 0 Hamiltonian: even and odd Sz
// sublattices, coupled in steps of two by Sx^2.
std::array<TridiagBlock, 2> parity_blocks(const LMGProblem& p) {
    const double s = 0.5 * p.n;
    std::array<TridiagBlock, 2> blocks;
    for (int par = 0; par < 2; ++par) {
        auto& b = blocks[par];
        for (int i = par; i <= p.n; i += 2)
            b.m.push_back(-s + i);
        const int len = static_cast<int>(b.m.size());
        b.diag.resize(len);
        b.sub.resize(std::max(0, len - 1));
        for (int i = 0; i < len; ++i)
            b.diag(i) = diag_element(p, s, b.m[i]);
        for (int i = 0; i + 1 < len; ++i)
            b.sub(i) = skip_element(p, s, b.m[i]);
    }
    return blocks;
}

// Inverse iteration for the eigenvector of an unreduced symmetric
// tridiagonal at an isolated eigenvalue.  The shift sits strictly below
// lambda, so the shifted matrix is positive definite and the LDL^T solve is
// stable without pivoting.
Eigen::VectorXd tridiag_eigenvector(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub,
                                    double lambda) {
    const int n = static_cast<int>(diag.size());
    if (n == 1) return Eigen::VectorXd::Ones(1);
    double scale = diag.cwiseAbs().maxCoeff() + 2.0 * sub.cwiseAbs().maxCoeff();
    scale = std::max(scale, 1e-30);
    double delta = 1e-11 * scale;

    Eigen::VectorXd x = Eigen::VectorXd::Ones(n) / std::sqrt(double(n));
    Eigen::VectorXd d(n), l(n - 1), y(n);
    for (int attempt = 0; attempt < 40; ++attempt, delta *= 10.0) {
        const double sigma = lambda - delta;
        bool posdef = true;
        d(0) = diag(0) - sigma;
        if (d(0) <= 0.0) posdef = false;
        for (int i = 1; i < n && posdef; ++i) {
            l(i - 1) = sub(i - 1) / d(i - 1);
            d(i) = diag(i) - sigma - l(i - 1) * sub(i - 1);
            if (d(i) <= 0.0) posdef = false;
        }
        if (!posdef) continue;
        for (int iter = 0; iter < 3; ++iter) {
            y(0) = x(0);
            for (int i = 1; i < n; ++i) y(i) = x(i) - l(i - 1) * y(i - 1);
            for (int i = 0; i < n; ++i) y(i) /= d(i);
            for (int i = n - 2; i >= 0; --i) y(i) -= l(i) * y(i + 1);
            x = y / y.norm();
        }
        // Residual check against the unshifted matrix.
        Eigen::VectorXd r = diag.cwiseProduct(x) - lambda * x;
        for (int i = 0; i + 1 < n; ++i) {
            r(i) += sub(i) * x(i + 1);
            r(i + 1) += sub(i) * x(i);
        }
        if (r.norm() < 1e-8 * scale) return x;
    }
    return x;
}

LMGResult solve_t_zero(const LMGProblem& p, int k) {
    const auto blocks = parity_blocks(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;

    std::array<Eigen::VectorXd, 2> evals;
    for (int par = 0; par < 2; ++par) {
        const auto& b = blocks[par];
        if (b.diag.size() == 0) {
            evals[par].resize(0);
            continue;
        }
        if (b.diag.size() == 1) {
            evals[par] = b.diag;
            continue;
        }
        es.computeFromTridiagonal(b.diag, b.sub, Eigen::EigenvaluesOnly);
        evals[par] = es.eigenvalues();
    }

    std::vector<double> merged;
    for (int par = 0; par < 2; ++par)
        merged.insert(merged.end(), evals[par].data(), evals[par].data() + evals[par].size());
    std::sort(merged.begin(), merged.end());

    LMGResult res;
    res.energies.assign(merged.begin(), merged.begin() + k);
    res.gap_e10 = res.energies[1] - res.energies[0];

    // Ground state lives in a single parity block, so <Sx> = <Sy> = 0 and
    // <Sz> follows from the block vector.
    const int gpar = (evals[0].size() > 0 &&
                      (evals[1].size() == 0 || evals[0](0) <= evals[1](0))) ? 0 : 1;
    const auto& gb = blocks[gpar];
    const Eigen::VectorXd v = tridiag_eigenvector(gb.diag, gb.sub, evals[gpar](0));
    double sz = 0.0;
    for (int i = 0; i < v.size(); ++i)
        sz += gb.m[i] * v(i) * v(i);
    res.sz_mean = sz / (0.5 * p.n);
    res.sx_mean = 0.0;
    res.sy_mean = 0.0;
    return res;
}

LMGResult solve_t_nonzero(const LMGProblem& p, int k) {
    const int dim = p.n + 1;
    const double s = 0.5 * p.n;
    auto m_of = [&](int i) { return -s + i; };

    LMGResult res;
    Eigen::VectorXd ground;
    if (dim <= 4096) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
        for (int i = 0; i < dim; ++i) {
            h(i, i) = diag_element(p, s, m_of(i));
            if (i + 1 < dim) {
                const double sx = 2.0 * p.t * ladder(s, m_of(i)); // 4t Sx coupling
                h(i + 1, i) = sx;
                h(i, i + 1) = sx;
            }
            if (i + 2 < dim) {
                const double sk = skip_element(p, s, m_of(i));
                h(i + 2, i) = sk;
                h(i, i + 2) = sk;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        res.energies.assign(es.eigenvalues().data(), es.eigenvalues().data() + k);
        ground = es.eigenvectors().col(0);
    } else {
        Eigen::SparseMatrix<double> h(dim, dim);
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(5 * dim);
        for (int i = 0; i < dim; ++i) {
            trip.emplace_back(i, i, diag_element(p, s, m_of(i)));
            if (i + 1 < dim) {
                const double sx = 2.0 * p.t * ladder(s, m_of(i));
                trip.emplace_back(i + 1, i, sx);
                trip.emplace_back(i, i + 1, sx);
            }
            if (i + 2 < dim) {
                const double sk = skip_element(p, s, m_of(i));
                trip.emplace_back(i + 2, i, sk);
                trip.emplace_back(i, i + 2, sk);
            }
        }
        h.setFromTriplets(trip.begin(), trip.end());
        DavidsonOptions opt;
        opt.k = k;
        opt.with_vectors = true;
        Eigen::VectorXd hdiag(dim), row_abs = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i < dim; ++i) hdiag(i) = diag_element(p, s, m_of(i));
        for (int outer = 0; outer < h.outerSize(); ++outer)
            for (Eigen::SparseMatrix<double>::InnerIterator it(h, outer); it; ++it)
                row_abs(it.row()) += std::abs(it.value());
        opt.norm_bound = row_abs.maxCoeff();
        auto apply = [&h](const auto& x, auto& y) { y.noalias() = h * x; };
        auto lr = davidson_lowest<double>(dim, apply, hdiag, opt);
        res.energies = lr.eigenvalues;
        ground = lr.vectors.col(0);
    }

    res.gap_e10 = res.energies[1] - res.energies[0];
    double sz = 0.0, sx = 0.0;
    for (int i = 0; i < dim; ++i) {
        sz += m_of(i) * ground(i) * ground(i);
        if (i + 1 < dim)
            sx += ground(i) * ground(i + 1) * ladder(s, m_of(i));
    }
    res.sz_mean = sz / s;
    res.sx_mean = sx / s;
    res.sy_mean = 0.0; // real eigenvector of a real matrix
    return res;
}

} // namespace

LMGResult lmg_spectrum(const LMGProblem& p, int k) {
    p.validate();
    if (k < 2 || k > p.n + 1)
        throw InvalidSpec("need 2 <= k <= n+1");
    return p.t == 0.0 ? solve_t_zero(p, k) : solve_t_nonzero(p, k);
}

SymmetryReport check_symmetries(const LMGProblem& p) {
    p.validate();
    const int dim = p.n + 1;
    const double s = 0.5 * p.n;
    auto m_of = [&](int i) { return -s + i; };

    // Assemble H, Sx, Sy, Sz in the S = n/2 block and verify [H, S^2] = 0
    // with S^2 built from its components.
    Eigen::MatrixXcd sx = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd sy = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd sz = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
        sz(i, i) = m_of(i);
        if (i + 1 < dim) {
            const double c = ladder(s, m_of(i));
            sx(i + 1, i) = 0.5 * c;
            sx(i, i + 1) = 0.5 * c;
            sy(i + 1, i) = std::complex<double>(0.0, -0.5) * c;
            sy(i, i + 1) = std::complex<double>(0.0, 0.5) * c;
        }
    }
    const Eigen::MatrixXcd s2 = sx * sx + sy * sy + sz * sz;
    const Eigen::MatrixXcd h =
        -2.0 * (p.epsilon * sz - 2.0 * p.t * sx) - (4.0 * p.j / p.n) * sx * sx;

    SymmetryReport rep;
    const double hnorm = std::max(h.norm(), 1e-30);
    rep.s2_commutator_rel = (h * s2 - s2 * h).norm() / hnorm;
    rep.s2_ok = rep.s2_commutator_rel < 1e-10;
    rep.spin_flip_symmetric = (p.t == 0.0);

    if (p.t == 0.0) {
        const int k = std::min(4, dim);
        const auto blocks = parity_blocks(p);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        rep.max_abs_sx = 0.0;
        rep.max_abs_sy = 0.0;
        int checked = 0;
        for (int par = 0; par < 2 && checked < k; ++par) {
            const auto& b = blocks[par];
            const int len = static_cast<int>(b.m.size());
            if (len == 0) continue;
            Eigen::MatrixXd vecs;
            if (len == 1) {
                vecs = Eigen::MatrixXd::Ones(1, 1);
            } else {
                es.computeFromTridiagonal(b.diag, b.sub);
                vecs = es.eigenvectors();
            }
            for (int c = 0; c < std::min(len, k) && checked < k; ++c, ++checked) {
                Eigen::VectorXcd full = Eigen::VectorXcd::Zero(dim);
                for (int i = 0; i < len; ++i)
                    full(static_cast<int>(b.m[i] + s + 0.5)) = vecs(i, c);
                rep.max_abs_sx = std::max(rep.max_abs_sx, std::abs((full.adjoint() * sx * full)(0)));
                rep.max_abs_sy = std::max(rep.max_abs_sy, std::abs((full.adjoint() * sy * full)(0)));
            }
        }
        rep.transverse_zero_ok = rep.max_abs_sx < 1e-9 && rep.max_abs_sy < 1e-9;
    }
    return rep;
}

MeanFieldMinimum mean_field_minimum(const LMGProblem& p) {
    p.validate();
    const double en = p.epsilon * p.n;
    const double jn = p.j * (p.n - 1);
    auto e_var = [&](double theta) {
        const double st = std::sin(theta);
        return -en * std::cos(theta) - jn * st * st;
    };

    constexpr int kGrid = 10000;
    int best = 0;
    double best_e = e_var(0.0);
    for (int i = 1; i <= kGrid; ++i) {
        const double e = e_var(kPi * i / kGrid);
        if (e < best_e) {
            best_e = e;
            best = i;
        }
    }
    double lo = kPi * std::max(0, best - 1) / kGrid;
    double hi = kPi * std::min(kGrid, best + 1) / kGrid;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = e_var(x1), f2 = e_var(x2);
    while (hi - lo > 1e-10) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = e_var(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = e_var(x2);
        }
    }

    MeanFieldMinimum mf;
    mf.theta0 = 0.5 * (lo + hi);
    mf.energy = e_var(mf.theta0);
    mf.chi0 = 0.0;
    // chi = 0 and chi = pi are distinct minima only when the easy-axis term
    // actually contributes at theta0.
    const double axis_part = jn * std::sin(mf.theta0) * std::sin(mf.theta0);
    mf.chi_twofold = axis_part > 1e-9 * std::max(std::abs(mf.energy), 1e-12);
    if (p.j > 0.0) {
        const double r = std::clamp(p.epsilon / (2.0 * p.j), -1.0, 1.0);
        mf.theta0_large_n = std::acos(r);
    } else {
        mf.theta0_large_n = p.epsilon >= 0.0 ? 0.0 : kPi;
    }
    return mf;
}

TransitionScan transition_scan(int n, double j, const std::vector<double>& eps_grid,
                               double gap_threshold, int workers) {
    if (eps_grid.empty())
        throw InvalidSpec("epsilon grid must not be empty");
    for (std::size_t i = 1; i < eps_grid.size(); ++i)
        if (eps_grid[i] < eps_grid[i - 1])
            throw InvalidSpec("epsilon grid must ascend");

    TransitionScan scan;
    scan.rows.resize(eps_grid.size());
    parallel_for_index(static_cast<long>(eps_grid.size()), workers, [&](long i) {
        LMGProblem p;
        p.n = n;
        p.j = j;
        p.t = 0.0;
        p.epsilon = eps_grid[i];
        const LMGResult r = lmg_spectrum(p, 2);
        TransitionRow row;
        row.eps = p.epsilon;
        row.gap_e10 = r.gap_e10;
        row.sz_mean = r.sz_mean;
        row.eps_over_2j = j > 0.0 ? p.epsilon / (2.0 * j) : std::numeric_limits<double>::quiet_NaN();
        row.gap_over_4j = j > 0.0 ? r.gap_e10 / (4.0 * j) : std::numeric_limits<double>::quiet_NaN();
        scan.rows[i] = row;
    });

    scan.eps_star = std::numeric_limits<double>::quiet_NaN();
    if (j == 0.0) {
        scan.eps_star = eps_grid.front(); // no ordered phase
    } else {
        for (const auto& row : scan.rows) {
            if (row.gap_e10 > gap_threshold * 4.0 * j) {
                scan.eps_star = row.eps;
                break;
            }
        }
    }
    return scan;
}

} // namespace cpq
