#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scatlen/capacitory.hpp"
#include "scatlen/error.hpp"
#include "scatlen/grid.hpp"
#include "scatlen/numeric.hpp"
#include "scatlen/riesz.hpp"

namespace scatlen {

/// A(d, alpha): with this constant (A/2) * double integral of
/// (u(x)-u(y))^2 / |x-y|^(d+alpha) over R^d x R^d equals the integral of
/// |xi|^alpha |u^(xi)|^2 d xi / (2 pi)^d, the form inverted by the Riesz kernel.
inline double form_constant(int d, double alpha) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw InvalidArgument("form_constant needs 0 < alpha < 2");
    return std::pow(2.0, alpha) * std::tgamma(0.5 * (d + alpha)) /
           (std::pow(std::numbers::pi, 0.5 * d) * std::abs(std::tgamma(-0.5 * alpha)));
}

/// Integral of |x-y|^(-d-alpha) over y outside the box, for x inside it:
/// (1/alpha) times the integral over directions of R(theta)^(-alpha), R the
/// distance to the boundary along theta. Exact for d = 1, a midpoint rule in
/// the angle for d = 2.
inline double exterior_kernel_mass(const Box& box, std::span<const double> x, double alpha,
                                   std::size_t angles = 4096) {
    const int d = box.dim();
    if (d == 1) return (std::pow(x[0] - box.lower[0], -alpha) + std::pow(box.upper[0] - x[0], -alpha)) / alpha;
    if (d != 2) throw InvalidArgument("full-space form is implemented for d <= 2");
    CompensatedSum acc;
    const double dtheta = 2.0 * std::numbers::pi / static_cast<double>(angles);
    for (std::size_t k = 0; k < angles; ++k) {
        const double t = (static_cast<double>(k) + 0.5) * dtheta;
        const double dir[2] = {std::cos(t), std::sin(t)};
        double reach = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 2; ++a) {
            if (dir[a] > 0.0) reach = std::min(reach, (box.upper[a] - x[a]) / dir[a]);
            if (dir[a] < 0.0) reach = std::min(reach, (box.lower[a] - x[a]) / dir[a]);
        }
        acc.add(std::pow(reach, -alpha));
    }
    return acc.value() * dtheta / alpha;
}

/// Discretised fractional form u^T L u on a grid. For the regional form only
/// pairs of cells inside the box interact; the full-space form adds the
/// interaction with the exterior of the box as a diagonal killing term.
class FormMatrix {
public:
    FormMatrix(GridSpec grid, Eigen::MatrixXd l, std::vector<double> killing)
        : grid_(std::move(grid)), l_(std::move(l)), killing_(std::move(killing)) {}

    const GridSpec& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& matrix() const noexcept { return l_; }
    /// Diagonal contribution of the exterior; empty for the regional form.
    const std::vector<double>& killing() const noexcept { return killing_; }
    bool full_space() const noexcept { return !killing_.empty(); }
    std::size_t size() const noexcept { return grid_.size(); }

    /// u^T L u as a sum of nonnegative pair terms, so it is never negative.
    double value(std::span<const double> u) const {
        if (u.size() != size()) throw GridMismatch("form value: vector size");
        CompensatedSum acc;
        const auto n = static_cast<Eigen::Index>(size());
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double du = u[i] - u[j];
                acc.add(-l_(i, j) * du * du);
            }
            if (!killing_.empty()) acc.add(killing_[i] * u[i] * u[i]);
        }
        return acc.value();
    }

private:
    GridSpec grid_;
    Eigen::MatrixXd l_;
    std::vector<double> killing_;
};

namespace spectral_detail {

inline Eigen::MatrixXd pair_matrix(const GridSpec& grid, unsigned threads) {
    const int d = grid.dim();
    const double alpha = grid.alpha();
    const double w = grid.cell_weight();
    const double scale = form_constant(d, alpha) * w * w;
    const double expo = -0.5 * (d + alpha);
    const auto n = grid.size();
    const std::vector<double> xs = grid.centers();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double dx = xs[i * d + a] - xs[j * d + a];
                r2 += dx * dx;
            }
            l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -scale * std::pow(r2, expo);
        }
    });
    const auto m = static_cast<Eigen::Index>(n);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = j + 1; i < m; ++i) l(i, j) = l(j, i);
    for (Eigen::Index i = 0; i < m; ++i) {
        CompensatedSum row;
        for (Eigen::Index j = 0; j < m; ++j)
            if (j != i) row.add(l(i, j));
        l(i, i) = -row.value();
    }
    return l;
}

}  // namespace spectral_detail

/// Regional form on the grid's box; same-cell pairs are dropped.
inline FormMatrix assemble_neumann_form(const GridSpec& grid, unsigned threads = 1) {
    return FormMatrix(grid, spectral_detail::pair_matrix(grid, threads), {});
}

/// Form over R^d x R^d for functions vanishing outside the grid's box.
inline FormMatrix assemble_full_space_form(const GridSpec& grid, unsigned threads = 1) {
    Eigen::MatrixXd l = spectral_detail::pair_matrix(grid, threads);
    const double a = form_constant(grid.dim(), grid.alpha()) * grid.cell_weight();
    std::vector<double> kill(grid.size());
    std::vector<double> x(grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.center(i, x);
        kill[i] = a * exterior_kernel_mass(grid.box(), x, grid.alpha());
        l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += kill[i];
    }
    return FormMatrix(grid, std::move(l), std::move(kill));
}

// Eigenproblem ---------------------------------------------------------------------

struct SpectralResult {
    double lambda = 0.0;
    std::vector<double> phi;  // sum phi^2 w = 1, first nonzero entry positive
    double residual = 0.0;    // relative to the norm of L + diag(v w)
};

/// Lowest eigenpair of (L + diag(v w)) phi = lambda w phi.
inline SpectralResult schrodinger_lowest(const FormMatrix& l, const Potential& v) {
    require_same_grid(l.grid(), v.grid(), "schrodinger_lowest");
    const double w = l.grid().cell_weight();
    const auto n = static_cast<Eigen::Index>(l.size());
    SpectralResult out;
    if (v.is_zero() && !l.full_space()) {
        out.phi.assign(l.size(), 1.0 / std::sqrt(w * static_cast<double>(l.size())));
        return out;
    }
    Eigen::MatrixXd h = l.matrix();
    for (Eigen::Index i = 0; i < n; ++i) h(i, i) += v[static_cast<std::size_t>(i)] * w;
    const double scale = h.norm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h / w);
    if (es.info() != Eigen::Success) throw NonConvergence("symmetric eigensolver did not converge");
    Eigen::VectorXd phi = es.eigenvectors().col(0);
    phi /= std::sqrt(phi.squaredNorm() * w);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (phi(i) != 0.0) {
            if (phi(i) < 0.0) phi = -phi;
            break;
        }
    }
    const double lambda = es.eigenvalues()(0);
    out.residual = (h * phi - lambda * w * phi).norm() / (scale * std::sqrt(1.0 / w));
    out.lambda = std::max(0.0, lambda);
    out.phi.assign(phi.data(), phi.data() + n);
    return out;
}

/// (phi^T L phi + sum v phi^2 w) / (sum phi^2 w).
inline double rayleigh_quotient(const FormMatrix& l, const Potential& v, std::span<const double> phi) {
    require_same_grid(l.grid(), v.grid(), "rayleigh_quotient");
    if (phi.size() != l.size()) throw GridMismatch("rayleigh_quotient: vector size");
    const double w = l.grid().cell_weight();
    CompensatedSum pot, mass;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        pot.add(v[i] * phi[i] * phi[i] * w);
        mass.add(phi[i] * phi[i] * w);
    }
    if (!(mass.value() > 0.0)) throw InvalidArgument("rayleigh_quotient: zero test function");
    return (l.value(phi) + pot.value()) / mass.value();
}

// Grids around Omega -------------------------------------------------------------------

/// Grid with the same cells as `omega` extended by at least `margin` on each
/// side; Omega's cells are a sub-block of it. Needs square cells.
inline GridSpec enclosing_grid(const GridSpec& omega, double margin) {
    const double h = omega.spacing(0);
    for (int k = 1; k < omega.dim(); ++k)
        if (std::abs(omega.spacing(k) - h) > 1e-12 * h) throw InvalidArgument("enclosing grid needs a cubical Omega");
    const auto m = static_cast<std::size_t>(std::ceil(margin / h - 1e-9));
    Box b = omega.box();
    for (int k = 0; k < omega.dim(); ++k) {
        b.lower[k] -= static_cast<double>(m) * h;
        b.upper[k] += static_cast<double>(m) * h;
    }
    return GridSpec(omega.dim(), omega.alpha(), b, omega.points_per_axis() + 2 * m);
}

namespace spectral_detail {

/// Index map from Omega cells to the enclosing grid's cells.
inline std::vector<std::size_t> block_indices(const GridSpec& omega, const GridSpec& outer) {
    const double h = outer.spacing(0);
    const auto shift = static_cast<std::size_t>(std::llround((omega.box().lower[0] - outer.box().lower[0]) / h));
    for (int k = 0; k < omega.dim(); ++k) {
        const double off = (omega.box().lower[k] - outer.box().lower[k]) / h;
        if (std::abs(off - static_cast<double>(shift)) > 1e-6 || std::abs(omega.spacing(k) - outer.spacing(k)) > 1e-12 * h)
            throw GridMismatch("Omega grid is not a sub-block of the enclosing grid");
    }
    std::vector<std::size_t> idx(omega.size());
    for (std::size_t i = 0; i < omega.size(); ++i) {
        std::size_t j = 0;
        for (int k = 0; k < omega.dim(); ++k) j = j * outer.points_per_axis() + omega.axis_index(i, k) + shift;
        idx[i] = j;
    }
    return idx;
}

}  // namespace spectral_detail

/// v on Omega extended by zero to the enclosing grid.
inline Potential embed(const Potential& v, const GridSpec& outer) {
    const auto idx = spectral_detail::block_indices(v.grid(), outer);
    std::vector<double> values(outer.size(), 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) values[idx[i]] = v[i];
    return Potential(outer, std::move(values));
}

inline std::vector<double> restrict_to(std::span<const double> f, const GridSpec& outer, const GridSpec& omega) {
    if (f.size() != outer.size()) throw GridMismatch("restrict_to: vector size");
    const auto idx = spectral_detail::block_indices(omega, outer);
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = f[idx[i]];
    return out;
}

/// C(Omega) = max over cells x of the integral over Omega of K(x, y) dy.
inline double region_kernel_constant(const KernelMatrix& k_omega) {
    double best = 0.0;
    const auto& m = k_omega.entries();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        CompensatedSum row;
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.add(m(i, j));
        best = std::max(best, row.value());
    }
    return best;
}

/// beta(Omega) = |Omega| / (4 C(Omega)).
inline double beta_threshold(const KernelMatrix& k_omega) {
    return k_omega.grid().box().volume() / (4.0 * region_kernel_constant(k_omega));
}

// Bound report ----------------------------------------------------------------------

struct BoundOptions {
    SolverOptions solver;
    double numerator_tolerance = 0.05;
    unsigned threads = 1;
};

struct BoundReport {
    int dim = 1;
    double alpha = 0.0;
    Box omega;
    std::size_t n = 0;
    std::string potential_id;
    double lambda = 0.0;
    double eigen_residual = 0.0;
    double gamma_low = 0.0;
    double gamma_high = 0.0;
    double gamma_mid = 0.0;
    double ratio = 0.0;           // lambda / gamma_mid, 0 when gamma = 0
    double numerator = 0.0;       // phi^T L phi + sum v phi^2 w, phi = U_v - 1
    double denominator = 0.0;     // sum phi^2 w over Omega
    double denominator_floor = 0.0;  // |Omega| - 2 C(Omega) gamma_high
    double region_constant = 0.0;
    double beta = 0.0;
    bool above_threshold = false;
    bool numerator_ok = true;     // numerator <= gamma_high (1 + tol)
    bool denominator_ok = true;   // only asserted below the threshold
    bool variational_ok = true;   // lambda <= numerator / denominator

    double upper_bound() const { return denominator > 0.0 ? numerator / denominator : 0.0; }
    bool ok() const { return numerator_ok && denominator_ok && variational_ok; }
};

/// Everything needed for the two-sided eigenvalue bound on Omega for one
/// potential. The form lives on Omega; U_v comes from the capacitory solve on
/// the enclosing grid of `k_outer`.
inline BoundReport eigen_bound_report(const Potential& v, const FormMatrix& l_omega, const KernelMatrix& k_omega,
                                      const KernelMatrix& k_outer, const BoundOptions& opts = {},
                                      std::string id = {}) {
    const GridSpec& g = v.grid();
    require_same_grid(g, l_omega.grid(), "eigen_bound_report");
    require_same_grid(g, k_omega.grid(), "eigen_bound_report");
    BoundReport rep;
    rep.dim = g.dim();
    rep.alpha = g.alpha();
    rep.omega = g.box();
    rep.n = g.points_per_axis();
    rep.potential_id = std::move(id);
    rep.region_constant = region_kernel_constant(k_omega);
    rep.beta = g.box().volume() / (4.0 * rep.region_constant);

    const SpectralResult sr = schrodinger_lowest(l_omega, v);
    rep.lambda = sr.lambda;
    rep.eigen_residual = sr.residual;

    const Potential vx = embed(v, k_outer.grid());
    const CapacitoryResult cr = solve_capacitory(vx, k_outer, opts.solver);
    if (!cr.converged) throw NonConvergence("capacitory solve for the bound report did not converge");
    rep.gamma_low = cr.gamma_low;
    rep.gamma_high = cr.gamma_high;
    rep.gamma_mid = cr.gamma_mid();
    rep.ratio = rep.gamma_mid > 0.0 ? rep.lambda / rep.gamma_mid : 0.0;

    std::vector<double> phi = restrict_to(cr.u_mid().values(), k_outer.grid(), g);
    for (double& x : phi) x -= 1.0;
    const double w = g.cell_weight();
    CompensatedSum pot, mass;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        pot.add(v[i] * phi[i] * phi[i] * w);
        mass.add(phi[i] * phi[i] * w);
    }
    rep.numerator = l_omega.value(phi) + pot.value();
    rep.denominator = mass.value();
    rep.denominator_floor = g.box().volume() - 2.0 * rep.region_constant * rep.gamma_high;
    rep.above_threshold = rep.gamma_mid > rep.beta;

    rep.numerator_ok = rep.numerator <= rep.gamma_high * (1.0 + opts.numerator_tolerance);
    rep.denominator_ok = rep.above_threshold || rep.denominator >= rep.denominator_floor;
    const double slack = 1e-10 * std::max(1.0, rep.upper_bound());
    rep.variational_ok = rep.lambda <= rep.upper_bound() + slack;
    return rep;
}

}  // namespace scatlen
