#include "cpq/effective_spin.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "cpq/parallel.hpp"
#include "cpq/trig.hpp"

namespace cpq {

using cd = std::complex<double>;

long BandGrid::n_points() const {
    long p = 1;
    for (const auto& a : axes) p *= static_cast<long>(a.size());
    return p;
}

long BandGrid::point_index(const std::vector<int>& coord) const {
    long idx = 0;
    for (std::size_t a = 0; a < axes.size(); ++a)
        idx = idx * static_cast<long>(axes[a].size()) + coord[a];
    return idx;
}

BandGrid band_structure(const CircuitSpec& spec, int grid_points, int bands,
                        const Truncation& trunc, FluxErrorModel model,
                        double ng_start, double ng_stop, int workers) {
    spec.validate();
    trunc.validate();
    if (grid_points < 5 || grid_points % 2 == 0)
        throw InvalidSpec("grid_points must be odd and >= 5");
    if (bands < 2)
        throw InvalidSpec("need at least 2 bands");

    const int n = spec.n_loops();
    std::vector<double> axis(grid_points);
    for (int j = 0; j < grid_points; ++j)
        axis[j] = ng_start + (ng_stop - ng_start) * j / (grid_points - 1);

    BandGrid grid;
    grid.axes.assign(n, axis);
    grid.bands = bands;
    const long points = grid.n_points();
    grid.energies.assign(points * bands, 0.0);
    grid.point_converged.assign(points, 0);

    parallel_for_index(points, workers, [&](long p) {
        CircuitSpec local = spec;
        long rem = p;
        for (int a = n - 1; a >= 0; --a) {
            local.loops[a].offset_charge = axis[rem % grid_points];
            rem /= grid_points;
        }
        try {
            SpectrumResult res = converged_spectrum(local, trunc, bands, model);
            for (int b = 0; b < bands; ++b)
                grid.energies[p * bands + b] = res.energies[b];
            grid.point_converged[p] = res.converged ? 1 : 0;
        } catch (const NoConvergence& e) {
            throw NoConvergence("band point " + std::to_string(p) + ": " + e.what(),
                                e.iterations, e.residual);
        }
    });
    return grid;
}

namespace {

long find_axis_index(const std::vector<double>& axis, double value) {
    for (std::size_t j = 0; j < axis.size(); ++j)
        if (std::abs(axis[j] - value) < 1e-12) return static_cast<long>(j);
    throw InvalidSpec("band grid does not cover offset charge " + std::to_string(value));
}

} // namespace

SpinModelFit extract_single_loop(const BandGrid& bands) {
    if (bands.axes.size() != 1 || bands.bands < 2)
        throw InvalidSpec("single-loop fit needs a 1-axis grid with >= 2 bands");
    const auto& axis = bands.axes[0];

    const long p0 = find_axis_index(axis, 0.0);
    const double e01_zero = bands.energy(p0, 1) - bands.energy(p0, 0);
    if (e01_zero < 1e-10)
        throw FitDegenerate("E01(ng=0) below 1e-10 GHz, hopping not resolvable");

    SpinModelFit fit;
    fit.t = -e01_zero / 4.0;
    fit.t_in = fit.t;
    fit.t_out = fit.t;
    const long p_half = find_axis_index(axis, 0.5);
    fit.epsilon = {0.5 * (bands.energy(p_half, 1) - bands.energy(p_half, 0))};

    double acc = 0.0;
    for (std::size_t j = 0; j < axis.size(); ++j) {
        const double e01 = bands.energy(j, 1) - bands.energy(j, 0);
        const double model = std::abs(4.0 * fit.t * cos_pi(axis[j]));
        acc += (e01 - model) * (e01 - model);
    }
    fit.residual_rms = std::sqrt(acc / axis.size());
    return fit;
}

SpinModelFit extract_two_loop(const BandGrid& bands) {
    if (bands.axes.size() != 2 || bands.bands < 4)
        throw InvalidSpec("two-loop fit needs a 2-axis grid with 4 bands");
    const auto& ax1 = bands.axes[0];
    const auto& ax2 = bands.axes[1];
    const long p1 = static_cast<long>(ax1.size());
    const long p2 = static_cast<long>(ax2.size());

    static constexpr std::array<std::array<int, 2>, 4> kConfigs{
        {{+1, +1}, {+1, -1}, {-1, +1}, {-1, -1}}};

    struct Point {
        std::array<double, 3> row[4]; // design row per spin configuration
        std::array<double, 4> data;   // sorted, mean-removed energies
    };
    std::vector<Point> pts;
    pts.reserve(p1 * p2);
    for (long i = 0; i < p1; ++i) {
        for (long j = 0; j < p2; ++j) {
            const long p = i * p2 + j;
            const double c1 = cos_pi(ax1[i]);
            const double c2 = cos_pi(ax2[j]);
            const double cp = cos_pi(ax1[i] + ax2[j]);
            const double cm = cos_pi(ax1[i] - ax2[j]);
            Point pt;
            double mean = 0.0;
            for (int b = 0; b < 4; ++b) mean += bands.energy(p, b);
            mean /= 4.0;
            for (int b = 0; b < 4; ++b) pt.data[b] = bands.energy(p, b) - mean;
            std::sort(pt.data.begin(), pt.data.end());
            for (int c = 0; c < 4; ++c) {
                const int s1 = kConfigs[c][0], s2 = kConfigs[c][1];
                pt.row[c] = {2.0 * (c1 * s1 + c2 * s2), 2.0 * cp * s1 * s2, 2.0 * cm * s1 * s2};
            }
            pts.push_back(pt);
        }
    }

    // Starting guess from the two decoupling corners of the grid: at
    // (1/2, 0) only the single-spin term survives, at (1/2, 1/2) only the
    // difference coupling does.  Grids missing those corners start from a
    // generic guess and rely on the least-squares iteration.
    Eigen::Vector3d x;
    try {
        const long pa = find_axis_index(ax1, 0.5) * p2 + find_axis_index(ax2, 0.0);
        const long pb = find_axis_index(ax1, 0.5) * p2 + find_axis_index(ax2, 0.5);
        x(0) = -(bands.energy(pa, 3) - bands.energy(pa, 0)) / 4.0;
        x(1) = 0.0;
        x(2) = -(bands.energy(pb, 3) - bands.energy(pb, 0)) / 4.0;
    } catch (const InvalidSpec&) {
        double spread = 0.0;
        for (const auto& pt : pts) spread = std::max(spread, pt.data[3] - pt.data[0]);
        x << -spread / 8.0, 0.0, -spread / 8.0;
    }

    const long rows = static_cast<long>(pts.size()) * 4;
    Eigen::MatrixXd a(rows, 3);
    Eigen::VectorXd rhs(rows);
    std::vector<int> order(4);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    for (int iter = 0; iter < 40; ++iter) {
        long r = 0;
        for (const auto& pt : pts) {
            std::array<double, 4> model;
            for (int c = 0; c < 4; ++c)
                model[c] = pt.row[c][0] * x(0) + pt.row[c][1] * x(1) + pt.row[c][2] * x(2);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](int u, int v) { return model[u] < model[v]; });
            for (int rank = 0; rank < 4; ++rank, ++r) {
                const auto& row = pt.row[order[rank]];
                a(r, 0) = row[0];
                a(r, 1) = row[1];
                a(r, 2) = row[2];
                rhs(r) = pt.data[rank];
            }
        }
        qr.compute(a);
        if (qr.rank() < 3)
            throw FitDegenerate("two-loop design matrix is rank-deficient");
        Eigen::Vector3d xn = qr.solve(rhs);
        const bool done = (xn - x).cwiseAbs().maxCoeff() < 1e-14 * (1.0 + x.cwiseAbs().maxCoeff());
        x = xn;
        if (done) break;
    }

    SpinModelFit fit;
    fit.t = x(0);
    fit.t_in = x(0);
    fit.t_out = x(0);
    fit.t_plus = x(1);
    fit.t_minus = x(2);
    fit.j = -x(2);
    fit.epsilon = {0.0, 0.0};

    // Residual over unambiguous points: a point is skipped when two model
    // levels cross (equal values from rows that differ), since rank matching
    // carries no information there.
    double acc = 0.0;
    long used = 0;
    double scale = 1e-30;
    for (const auto& pt : pts)
        for (int c = 0; c < 4; ++c)
            scale = std::max(scale, std::abs(pt.data[c]));
    for (const auto& pt : pts) {
        std::array<double, 4> model;
        for (int c = 0; c < 4; ++c)
            model[c] = pt.row[c][0] * x(0) + pt.row[c][1] * x(1) + pt.row[c][2] * x(2);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int u, int v) { return model[u] < model[v]; });
        bool ambiguous = false;
        for (int rank = 0; rank + 1 < 4; ++rank) {
            const int u = order[rank], v = order[rank + 1];
            if (std::abs(model[u] - model[v]) < 1e-9 * scale) {
                for (int c = 0; c < 3; ++c)
                    if (std::abs(pt.row[u][c] - pt.row[v][c]) > 1e-12) ambiguous = true;
            }
        }
        if (ambiguous) continue;
        for (int rank = 0; rank < 4; ++rank) {
            const double diff = model[order[rank]] - pt.data[rank];
            acc += diff * diff;
        }
        used += 4;
    }
    fit.residual_rms = used > 0 ? std::sqrt(acc / used) : 0.0;
    return fit;
}

namespace {

void add_term(PauliHamiltonian& h, double coeff, std::vector<PauliOp> ops) {
    if (coeff == 0.0) return;
    h.terms.push_back({coeff, std::move(ops)});
}

} // namespace

PauliHamiltonian build_spin_hamiltonian(int n, double t, double j,
                                        const std::vector<double>& eps,
                                        const std::vector<double>& offset_charges) {
    if (n < 1)
        throw InvalidSpec("need n >= 1 spins");
    if (static_cast<int>(eps.size()) != n)
        throw std::invalid_argument("eps length must equal n");
    std::vector<double> ng = offset_charges;
    if (ng.empty()) ng.assign(n, 0.0);
    if (static_cast<int>(ng.size()) != n)
        throw std::invalid_argument("offset_charges length must equal n");

    std::vector<double> c(n), s(n);
    for (int i = 0; i < n; ++i) {
        c[i] = cos_pi(ng[i]);
        s[i] = sin_pi(ng[i]);
    }

    PauliHamiltonian h;
    h.n_spins = n;
    const std::vector<PauliOp> id(n, PauliOp::I);

    for (int i = 0; i < n; ++i) {
        auto ops = id;
        ops[i] = PauliOp::X;
        add_term(h, 2.0 * t * c[i] * c[i], ops);
        ops[i] = PauliOp::Y;
        add_term(h, 2.0 * t * c[i] * s[i], ops);
        ops[i] = PauliOp::Z;
        add_term(h, -eps[i], ops);
    }
    for (int i = 0; i < n; ++i) {
        for (int k = i + 1; k < n; ++k) {
            const double w = -(2.0 * j / n) * cos_pi(ng[i] - ng[k]);
            for (int oi = 0; oi < 2; ++oi) {
                for (int ok = 0; ok < 2; ++ok) {
                    auto ops = id;
                    ops[i] = oi == 0 ? PauliOp::X : PauliOp::Y;
                    ops[k] = ok == 0 ? PauliOp::X : PauliOp::Y;
                    const double wi = oi == 0 ? c[i] : s[i];
                    const double wk = ok == 0 ? c[k] : s[k];
                    add_term(h, w * wi * wk, ops);
                }
            }
        }
    }
    return h;
}

PauliHamiltonian inject_error_terms(const PauliHamiltonian& h,
                                    const std::vector<double>& imbalance,
                                    const std::vector<double>& flux_detuning) {
    const int n = h.n_spins;
    if (static_cast<int>(imbalance.size()) != n || static_cast<int>(flux_detuning.size()) != n)
        throw std::invalid_argument("error-term lists must match n_spins");
    PauliHamiltonian out = h;
    const std::vector<PauliOp> id(n, PauliOp::I);
    for (int i = 0; i < n; ++i) {
        auto ops = id;
        ops[i] = PauliOp::X;
        add_term(out, imbalance[i], ops);
        ops[i] = PauliOp::Z;
        add_term(out, -flux_detuning[i], ops);
    }
    return out;
}

Eigen::MatrixXcd PauliHamiltonian::to_dense() const {
    const long dim = 1L << n_spins;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    for (const auto& term : terms) {
        for (long b = 0; b < dim; ++b) {
            long target = b;
            cd amp(term.coeff, 0.0);
            for (int i = 0; i < n_spins; ++i) {
                const bool down = (b >> i) & 1L;
                switch (term.ops[i]) {
                    case PauliOp::I: break;
                    case PauliOp::X: target ^= 1L << i; break;
                    case PauliOp::Y:
                        target ^= 1L << i;
                        amp *= down ? cd(0.0, -1.0) : cd(0.0, 1.0);
                        break;
                    case PauliOp::Z:
                        if (down) amp = -amp;
                        break;
                }
            }
            h(target, b) += amp;
        }
    }
    return h;
}

Eigen::MatrixXd maximal_spin_sector(const PauliHamiltonian& h) {
    const int n = h.n_spins;
    const long dim = 1L << n;
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(dim, n + 1);
    std::vector<double> binom(n + 1, 1.0);
    for (int k = 1; k <= n; ++k)
        binom[k] = binom[k - 1] * (n - k + 1) / k;
    for (long b = 0; b < dim; ++b) {
        const int k = static_cast<int>(__builtin_popcountll(static_cast<unsigned long long>(b)));
        v(b, k) = 1.0 / std::sqrt(binom[k]);
    }
    const Eigen::MatrixXcd dense = h.to_dense();
    const Eigen::MatrixXcd proj = v.cast<cd>().adjoint() * dense * v.cast<cd>();
    return proj.real();
}

} // namespace cpq
