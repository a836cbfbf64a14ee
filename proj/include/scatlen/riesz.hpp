#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "scatlen/error.hpp"
#include "scatlen/grid.hpp"
#include "scatlen/numeric.hpp"

namespace scatlen {

inline double unit_ball_volume(int d) {
    return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

/// Surface area of the unit sphere in R^d (2 for d = 1).
inline double unit_sphere_area(int d) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Green-function constant of the alpha-stable process: the kernel
/// c |x|^(alpha-d) has Fourier transform |xi|^(-alpha), so U[f] inverts the
/// fractional Laplacian with symbol |xi|^alpha.
inline double riesz_constant(int d, double alpha) {
    if (!(alpha > 0.0 && alpha < static_cast<double>(d)))
        throw InvalidArgument("riesz_constant needs 0 < alpha < d");
    return std::tgamma(0.5 * (d - alpha)) /
           (std::pow(2.0, alpha) * std::pow(std::numbers::pi, 0.5 * d) * std::tgamma(0.5 * alpha));
}

/// Integral of |y|^(alpha-d) over the centred ball of the given volume
/// (without the Riesz constant).
inline double singular_cell_integral(int d, double alpha, double volume) {
    const double rho = std::pow(volume / unit_ball_volume(d), 1.0 / d);
    return unit_sphere_area(d) * std::pow(rho, alpha) / alpha;
}

/// Dense quadrature matrix of the Riesz potential on a grid:
/// (U[f])_i = sum_j K(i,j) f_j.
class KernelMatrix {
public:
    KernelMatrix(GridSpec grid, Eigen::MatrixXd entries, double constant)
        : grid_(std::move(grid)), entries_(std::move(entries)), constant_(constant) {
        const auto n = static_cast<Eigen::Index>(grid_.size());
        if (entries_.rows() != n || entries_.cols() != n) throw InvalidArgument("kernel matrix shape");
    }

    const GridSpec& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& entries() const noexcept { return entries_; }
    double constant() const noexcept { return constant_; }
    std::size_t size() const noexcept { return grid_.size(); }
    double operator()(std::size_t i, std::size_t j) const {
        return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

private:
    GridSpec grid_;
    Eigen::MatrixXd entries_;
    double constant_;
};

/// Off-diagonal entries by the midpoint rule, diagonal by the exact integral
/// over the ball of one cell volume. Rows are split across `threads`; each
/// unordered pair is computed once and mirrored.
inline KernelMatrix assemble_riesz(const GridSpec& grid, unsigned threads = 1) {
    const int d = grid.dim();
    const double alpha = grid.alpha();
    const double c = riesz_constant(d, alpha);
    const double w = grid.cell_weight();
    const double diag = c * singular_cell_integral(d, alpha, w);
    const double expo = 0.5 * (alpha - d);  // applied to squared distance
    const auto n = grid.size();
    const std::vector<double> xs = grid.centers();

    Eigen::MatrixXd k(n, n);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        k(ii, ii) = diag;
        for (std::size_t j = i + 1; j < n; ++j) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double dx = xs[i * d + a] - xs[j * d + a];
                r2 += dx * dx;
            }
            k(ii, static_cast<Eigen::Index>(j)) = c * w * std::pow(r2, expo);
        }
    });
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j)
        for (Eigen::Index i = j + 1; i < static_cast<Eigen::Index>(n); ++i) k(i, j) = k(j, i);
    return KernelMatrix(grid, std::move(k), c);
}

inline ScalarField apply_riesz(const KernelMatrix& k, std::span<const double> f) {
    if (f.size() != k.size()) throw GridMismatch("apply_riesz: operand size");
    Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
    Eigen::VectorXd out = k.entries() * fv;
    return ScalarField(k.grid(), std::vector<double>(out.data(), out.data() + out.size()));
}

inline ScalarField apply_riesz(const KernelMatrix& k, const ScalarField& f) {
    require_same_grid(k.grid(), f.grid(), "apply_riesz");
    return apply_riesz(k, f.values());
}

inline ScalarField apply_riesz(const KernelMatrix& k, const Potential& f) {
    require_same_grid(k.grid(), f.grid(), "apply_riesz");
    return apply_riesz(k, f.values());
}

/// Riesz potential of the piecewise-constant density f at an arbitrary point,
/// by the midpoint rule over cells. Accurate away from the support (at a
/// cell centre it falls back to the singular-cell rule for that cell).
inline double riesz_potential_at(const GridSpec& grid, std::span<const double> f, std::span<const double> x) {
    const int d = grid.dim();
    const double alpha = grid.alpha();
    const double c = riesz_constant(d, alpha);
    const double w = grid.cell_weight();
    const double self = singular_cell_integral(d, alpha, w);
    std::vector<double> y(d);
    CompensatedSum acc;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (f[j] == 0.0) continue;
        grid.center(j, y);
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) r2 += (x[a] - y[a]) * (x[a] - y[a]);
        acc.add(r2 > 0.0 ? f[j] * w * std::pow(r2, 0.5 * (alpha - d)) : f[j] * self);
    }
    return c * acc.value();
}

}  // namespace scatlen
