#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "scatlen/error.hpp"
#include "scatlen/grid.hpp"
#include "scatlen/numeric.hpp"
#include "scatlen/riesz.hpp"

namespace scatlen {

struct SolverOptions {
    double tolerance = 1e-10;  // target for sup(u_high - u_low)
    int max_iterations = 10000;
    /// Per-step shrink factor of the bracket width below which the antitone
    /// sweep is considered productive; slower sweeps hand over to the direct
    /// solve.
    double min_contraction = 0.5;

    void validate() const {
        if (!(tolerance > 0.0)) throw InvalidArgument("solver tolerance must be positive");
        if (max_iterations < 1) throw InvalidArgument("solver max_iterations must be at least 1");
        if (!(min_contraction > 0.0 && min_contraction < 1.0))
            throw InvalidArgument("solver min_contraction must lie in (0, 1)");
    }
};

/// Two-sided enclosure of the capacitory potential U_v and the scattering
/// length Gamma(v) = integral of v (1 - U_v).
struct CapacitoryResult {
    ScalarField u_low;
    ScalarField u_high;
    ScalarField mu;  // v (1 - u_mid)
    double gamma_low = 0.0;
    double gamma_high = 0.0;
    int iterations = 0;
    bool converged = false;
    bool direct_solve = false;  // bracket tightened by the linear solve

    ScalarField u_mid() const {
        ScalarField m(u_low.grid());
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (u_low[i] + u_high[i]);
        return m;
    }
    double gamma_mid() const { return 0.5 * (gamma_low + gamma_high); }
    double bracket_width() const { return gamma_high - gamma_low; }
    double sup_gap() const {
        double g = 0.0;
        for (std::size_t i = 0; i < u_low.size(); ++i) g = std::max(g, u_high[i] - u_low[i]);
        return g;
    }
};

/// Called after every antitone sweep with (iteration, u_low, u_high).
using BracketObserver = std::function<void(int, std::span<const double>, std::span<const double>)>;

namespace capacitory_detail {

inline double sup_gap(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return lo.size() == 0 ? 0.0 : (hi - lo).maxCoeff();
}

/// T(u) = clip_[0,1]( K (v (1 - u)) ); order reversing in u.
inline Eigen::VectorXd antitone_map(const Eigen::MatrixXd& k, const Eigen::VectorXd& v, const Eigen::VectorXd& u) {
    Eigen::VectorXd out = k * v.cwiseProduct(Eigen::VectorXd::Ones(u.size()) - u);
    return out.cwiseMax(0.0).cwiseMin(1.0);
}

struct DirectEnclosure {
    Eigen::VectorXd u;
    Eigen::VectorXd radius;   // |U* - u| <= radius componentwise
    double gamma = 0.0;       // w * sum(mu)
    double gamma_radius = 0.0;
};

/// Solves U = K v (1 - U) through the symmetric system
/// (I + S K_SS S) y = S 1 on the support, S = diag(sqrt v), mu = S y, U = K mu.
/// K_SS is positive definite, so the system matrix is bounded below by
/// I + lambda_min(K_SS) S^2 and the residual norm bounds the error in y.
inline std::optional<DirectEnclosure> direct_enclosure(const Eigen::MatrixXd& k, const Eigen::VectorXd& v,
                                                       double weight, double tolerance) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v(i) > 0.0) support.push_back(i);
    const auto m = static_cast<Eigen::Index>(support.size());
    const auto n = v.size();
    DirectEnclosure out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    if (m == 0) return out;

    Eigen::MatrixXd kss(m, m);
    Eigen::VectorXd s(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        s(a) = std::sqrt(v(support[a]));
        for (Eigen::Index b = 0; b < m; ++b) kss(a, b) = k(support[a], support[b]);
    }

    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double mm = static_cast<double>(m);
    const double k_norm = kss.cwiseAbs().rowwise().sum().maxCoeff();

    Eigen::MatrixXd a = s.asDiagonal() * kss * s.asDiagonal();
    a.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return std::nullopt;

    // Residual of the exact system s - y - S K S y in extended precision,
    // with a componentwise bound on its own rounding.
    using ld = long double;
    constexpr ld uld = std::numeric_limits<ld>::epsilon();
    std::vector<ld> s_ld(m), sy(m), r_ld(m), r_err(m);
    for (Eigen::Index i = 0; i < m; ++i) s_ld[i] = std::sqrt(static_cast<ld>(v(support[i])));
    auto residual = [&](const Eigen::VectorXd& y) {
        for (Eigen::Index j = 0; j < m; ++j) sy[j] = s_ld[j] * y(j);
        for (Eigen::Index i = 0; i < m; ++i) {
            ld t = 0.0L, t_abs = 0.0L;
            for (Eigen::Index j = 0; j < m; ++j) {
                t += static_cast<ld>(kss(i, j)) * sy[j];
                t_abs += std::abs(static_cast<ld>(kss(i, j)) * sy[j]);
            }
            r_ld[i] = s_ld[i] - static_cast<ld>(y(i)) - s_ld[i] * t;
            r_err[i] = (static_cast<ld>(m) + 6.0L) * uld * (s_ld[i] + std::abs(static_cast<ld>(y(i))) + s_ld[i] * t_abs);
        }
    };
    Eigen::VectorXd y = llt.solve(s);
    Eigen::VectorXd r(m);
    for (int pass = 0; pass < 3; ++pass) {
        residual(y);
        for (Eigen::Index i = 0; i < m; ++i) r(i) = static_cast<double>(r_ld[i]);
        y += llt.solve(r);
    }
    residual(y);
    ld r_sq = 0.0L;
    for (Eigen::Index i = 0; i < m; ++i) {
        const ld bound = std::abs(r_ld[i]) + r_err[i];
        r_sq += bound * bound;
    }
    const double r_norm = static_cast<double>(std::sqrt(r_sq)) * (1.0 + 4.0 * eps);

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ks = Eigen::VectorXd::Zero(n);  // K_{:,S} s
    for (Eigen::Index i = 0; i < m; ++i) mu(support[i]) = s(i) * y(i);
    for (Eigen::Index i = 0; i < m; ++i) ks += k.col(support[i]) * s(i);
    out.u = k * mu;
    const Eigen::VectorXd k_abs_mu = k * mu.cwiseAbs();
    const Eigen::VectorXd round_u = (4.0 * (mm + 2.0) * eps) * k_abs_mu;

    auto fill = [&](double lambda_floor) {
        const double y_err = r_norm / lambda_floor;
        out.radius = y_err * ks + round_u;
        out.gamma = weight * compensated_sum(std::span<const double>(mu.data(), n));
        out.gamma_radius = weight * (y_err * s.norm() + 4.0 * (mm + 2.0) * eps * mu.cwiseAbs().sum());
    };
    fill(1.0);
    if (2.0 * out.radius.maxCoeff() <= tolerance) return out;

    // Sharper floor from the smallest eigenvalue of K_SS, less its backward error.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kss, Eigen::EigenvaluesOnly);
    const double lambda_k = es.eigenvalues()(0) - 4.0 * mm * eps * k_norm;
    if (lambda_k > 0.0) fill(1.0 + lambda_k * s.cwiseAbs2().minCoeff());
    return out;
}

}  // namespace capacitory_detail

/// Encloses the discrete capacitory potential, the fixed point of the
/// order-reversing map T(U) = clip(U[v (1 - U)]).
///
/// Starts from u_low = 0 and u_high = clip(U[v]) and sweeps
/// u_low <- T(u_high), u_high <- T(u_low), which keeps both envelopes
/// monotone. When a sweep shrinks the bracket by less than
/// `opts.min_contraction` (large potentials make T expansive and the sweep
/// settles into a 2-cycle) the bracket is intersected with the enclosure
/// produced by the symmetric direct solve.
inline CapacitoryResult solve_capacitory(const Potential& v, const KernelMatrix& k, const SolverOptions& opts = {},
                                         const BracketObserver& observer = {}) {
    require_same_grid(v.grid(), k.grid(), "solve_capacitory");
    opts.validate();
    using capacitory_detail::antitone_map;
    using capacitory_detail::sup_gap;

    const auto n = static_cast<Eigen::Index>(v.size());
    const Eigen::Map<const Eigen::VectorXd> vv(v.values().data(), n);
    const Eigen::VectorXd vvec = vv;
    const Eigen::MatrixXd& km = k.entries();

    Eigen::VectorXd lo = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd hi = (km * vvec).cwiseMax(0.0).cwiseMin(1.0);
    int iterations = 1;
    auto notify = [&] {
        if (observer) observer(iterations, std::span<const double>(lo.data(), n), std::span<const double>(hi.data(), n));
    };
    notify();

    double width = sup_gap(lo, hi);
    bool stalled = false;
    while (width > opts.tolerance && iterations < opts.max_iterations) {
        Eigen::VectorXd lo_next = antitone_map(km, vvec, hi).cwiseMax(lo);
        Eigen::VectorXd hi_next = antitone_map(km, vvec, lo).cwiseMin(hi);
        lo.swap(lo_next);
        hi.swap(hi_next);
        ++iterations;
        notify();
        const double next = sup_gap(lo, hi);
        if (next > opts.min_contraction * width) {
            width = next;
            stalled = true;
            break;
        }
        width = next;
    }

    bool direct = false;
    std::optional<std::pair<double, double>> gamma_enclosure;
    if (stalled || width > opts.tolerance) {
        if (auto enc = capacitory_detail::direct_enclosure(km, vvec, v.grid().cell_weight(), opts.tolerance)) {
            const Eigen::VectorXd lo_d = (enc->u - enc->radius).cwiseMax(0.0).cwiseMin(1.0);
            const Eigen::VectorXd hi_d = (enc->u + enc->radius).cwiseMax(0.0).cwiseMin(1.0);
            Eigen::VectorXd lo_new = lo.cwiseMax(lo_d);
            Eigen::VectorXd hi_new = hi.cwiseMin(hi_d);
            if ((lo_new.array() <= hi_new.array()).all()) {
                lo.swap(lo_new);
                hi.swap(hi_new);
                direct = true;
                gamma_enclosure = {enc->gamma - enc->gamma_radius, enc->gamma + enc->gamma_radius};
                ++iterations;
                notify();
                width = sup_gap(lo, hi);
            }
        }
    }

    const GridSpec& g = v.grid();
    std::vector<double> mu(n), one_minus_hi(n), one_minus_lo(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mid = 0.5 * (lo(i) + hi(i));
        mu[i] = vvec(i) * (1.0 - mid);
        one_minus_hi[i] = vvec(i) * (1.0 - hi(i));
        one_minus_lo[i] = vvec(i) * (1.0 - lo(i));
    }
    CapacitoryResult res{
        ScalarField(g, std::vector<double>(lo.data(), lo.data() + n)),
        ScalarField(g, std::vector<double>(hi.data(), hi.data() + n)),
        ScalarField(g, std::move(mu)),
        g.cell_weight() * compensated_sum(one_minus_hi),
        g.cell_weight() * compensated_sum(one_minus_lo),
        iterations,
        width <= opts.tolerance,
        direct,
    };
    if (gamma_enclosure) {
        // Both enclose the same discrete Gamma; keep the tighter ends.
        res.gamma_low = std::max(res.gamma_low, gamma_enclosure->first);
        res.gamma_high = std::min(res.gamma_high, gamma_enclosure->second);
    }
    return res;
}

struct ScatteringLength {
    double mid = 0.0;
    double low = 0.0;
    double high = 0.0;
    bool converged = false;
};

inline ScatteringLength scattering_length(const Potential& v, const KernelMatrix& k, const SolverOptions& opts = {}) {
    const CapacitoryResult r = solve_capacitory(v, k, opts);
    return {r.gamma_mid(), r.gamma_low, r.gamma_high, r.converged};
}

// Scaling ------------------------------------------------------------------

struct ScalingReport {
    double lhs = 0.0;             // Gamma(v_r)
    double rhs = 0.0;             // r^(alpha-d) Gamma(v)
    double relative_error = 0.0;  // |lhs - rhs| / lhs
    double potential_sup_diff = 0.0;  // sup_i |U_{v_r}(x_i / r) - U_v(x_i)|
    double bracket_width = 0.0;   // combined Gamma bracket width, scaled like lhs
};

/// Compares Gamma(v_r) with r^(alpha-d) Gamma(v), v_r(x) = r^alpha v(r x).
/// `k_scaled` must live on the grid produced by scale_potential(v, r).
inline ScalingReport scaling_check(const Potential& v, double r, const KernelMatrix& k, const KernelMatrix& k_scaled,
                                   const SolverOptions& opts = {}) {
    const Potential vr = scale_potential(v, r);
    require_same_grid(vr.grid(), k_scaled.grid(), "scaling_check (scaled grid)");
    const CapacitoryResult base = solve_capacitory(v, k, opts);
    const CapacitoryResult scaled = solve_capacitory(vr, k_scaled, opts);
    const double factor = std::pow(r, v.grid().alpha() - v.grid().dim());
    ScalingReport rep;
    rep.lhs = scaled.gamma_mid();
    rep.rhs = factor * base.gamma_mid();
    rep.relative_error = rep.lhs == rep.rhs ? 0.0 : std::abs(rep.lhs - rep.rhs) / std::abs(rep.lhs);
    const ScalarField ub = base.u_mid(), us = scaled.u_mid();
    for (std::size_t i = 0; i < ub.size(); ++i) rep.potential_sup_diff = std::max(rep.potential_sup_diff, std::abs(us[i] - ub[i]));
    rep.bracket_width = scaled.bracket_width() + factor * base.bracket_width();
    return rep;
}

inline ScalingReport scaling_check(const Potential& v, double r, const SolverOptions& opts = {}, unsigned threads = 1) {
    const KernelMatrix k = assemble_riesz(v.grid(), threads);
    const KernelMatrix ks = assemble_riesz(scale_potential(v, r).grid(), threads);
    return scaling_check(v, r, k, ks, opts);
}

// Small-potential expansion ----------------------------------------------------

struct EpsilonRow {
    double epsilon = 0.0;
    double gamma_over_eps = 0.0;  // Gamma(eps v) / eps, bracket midpoint
    double deficit = 0.0;         // ||v||_1 - Gamma(eps v) / eps
    double bracket = 0.0;         // bracket width / eps
};

struct EpsilonExpansion {
    std::vector<EpsilonRow> rows;  // ascending epsilon
    double norm_l1 = 0.0;
    double norm_lp = 0.0;
    double p = 2.0;
    double q = 2.0;
    double slope = std::numeric_limits<double>::quiet_NaN();  // of log deficit vs log eps
};

/// Least-squares slope of y against x.
inline double fit_slope(std::span<const double> x, std::span<const double> y) {
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

inline EpsilonExpansion epsilon_expansion(const Potential& v, double p, std::vector<double> epsilons, const KernelMatrix& k,
                                          const SolverOptions& opts = {}) {
    if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("epsilon_expansion needs 1 < p < infinity");
    for (double e : epsilons)
        if (!(e > 0.0)) throw InvalidArgument("epsilon values must be positive");
    std::sort(epsilons.begin(), epsilons.end());
    EpsilonExpansion out;
    out.norm_l1 = v.norm_l1();
    out.norm_lp = v.norm_lp(p);
    out.p = p;
    out.q = p / (p - 1.0);
    std::vector<double> lx, ly;
    for (double e : epsilons) {
        const CapacitoryResult r = solve_capacitory(v.scaled(e), k, opts);
        EpsilonRow row{e, r.gamma_mid() / e, out.norm_l1 - r.gamma_mid() / e, r.bracket_width() / e};
        if (row.deficit > 0.0) {
            lx.push_back(std::log(e));
            ly.push_back(std::log(row.deficit));
        }
        out.rows.push_back(row);
    }
    out.slope = fit_slope(lx, ly);
    return out;
}

// Capacity -----------------------------------------------------------------------

struct EquilibriumMeasure {
    ScalarField density;  // per unit volume, zero off the set
    double capacity = 0.0;
};

/// Solves U[mu] = 1 on the cells of the set (cells where `set` is positive).
inline EquilibriumMeasure equilibrium_measure(const Potential& set, const KernelMatrix& k) {
    require_same_grid(set.grid(), k.grid(), "equilibrium_capacity");
    std::vector<Eigen::Index> cells;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set[i] > 0.0) cells.push_back(static_cast<Eigen::Index>(i));
    if (cells.empty()) throw InvalidArgument("equilibrium_capacity needs a nonempty set");
    const auto m = static_cast<Eigen::Index>(cells.size());
    Eigen::MatrixXd kss(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) kss(a, b) = k.entries()(cells[a], cells[b]);
    // K carries the cell weight, so the solution is the density itself.
    Eigen::VectorXd density;
    Eigen::LLT<Eigen::MatrixXd> llt(kss);
    if (llt.info() == Eigen::Success) {
        density = llt.solve(Eigen::VectorXd::Ones(m));
    } else {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kss);
        if (!lu.isInvertible()) throw NonConvergence("equilibrium system is singular");
        density = lu.solve(Eigen::VectorXd::Ones(m));
    }
    EquilibriumMeasure out{ScalarField(set.grid()), 0.0};
    std::vector<double> mass(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        out.density[static_cast<std::size_t>(cells[a])] = density(a);
        mass[a] = density(a);
    }
    out.capacity = set.grid().cell_weight() * compensated_sum(mass);
    return out;
}

inline double equilibrium_capacity(const Potential& set, const KernelMatrix& k) {
    return equilibrium_measure(set, k).capacity;
}

struct CapacityRow {
    double multiplier = 0.0;
    double gamma_low = 0.0;
    double gamma_high = 0.0;
    double gamma_mid() const { return 0.5 * (gamma_low + gamma_high); }
};

struct CapacitySweep {
    std::vector<CapacityRow> rows;
    bool nondecreasing = true;  // midpoints, up to the bracket widths
    double capacity_low() const { return rows.empty() ? 0.0 : rows.back().gamma_low; }
    double capacity_high() const { return rows.empty() ? 0.0 : rows.back().gamma_high; }
};

/// Gamma(M 1_K) for increasing M; approaches Cap(K) from below.
inline CapacitySweep capacity_sweep(const Potential& set, const std::vector<double>& multipliers, const KernelMatrix& k,
                                    const SolverOptions& opts = {}) {
    for (std::size_t i = 1; i < multipliers.size(); ++i)
        if (!(multipliers[i] > multipliers[i - 1])) throw InvalidArgument("capacity_sweep multipliers must increase");
    std::vector<double> mask(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) mask[i] = set[i] > 0.0 ? 1.0 : 0.0;
    const Potential indicator(set.grid(), std::move(mask));
    CapacitySweep out;
    for (double m : multipliers) {
        const CapacitoryResult r = solve_capacitory(indicator.scaled(m), k, opts);
        if (!out.rows.empty() && r.gamma_high < out.rows.back().gamma_low) out.nondecreasing = false;
        out.rows.push_back({m, r.gamma_low, r.gamma_high});
    }
    return out;
}

/// Discrete C(B) = max_j sum_{i in B} K(i, j), the constant in
/// integral_B U[mu] <= C(B) * total mass of mu.
inline double region_potential_constant(const KernelMatrix& k, std::span<const bool> region) {
    if (region.size() != k.size()) throw GridMismatch("region mask size");
    double best = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) {
        CompensatedSum acc;
        for (std::size_t i = 0; i < k.size(); ++i)
            if (region[i]) acc.add(k(i, j));
        best = std::max(best, acc.value());
    }
    return best;
}

// Self-consistency ----------------------------------------------------------------

struct ConsistencyReport {
    double potential_residual = 0.0;  // sup |u_mid - U[mu]|
    double energy = 0.0;              // integral U_v d mu_v
    double gamma = 0.0;               // integral d mu_v
    double energy_slack = 0.0;        // integral (1 - U_v) d mu_v  (= gamma - energy)
    double algebraic_gap = 0.0;       // |energy + integral v (1-U)^2 - gamma|
    double ulp_gamma = 0.0;           // spacing of doubles at gamma
    double lower_bound_slack = 0.0;   // min_x [U_v(x) - c Gamma_low diam(hull)^(alpha-d)]
};

/// Residuals of U_v = U[mu_v], integral U_v d mu_v <= Gamma(v), and the pointwise
/// lower bound U_v(x) >= c Gamma diam(hull(supp v, x))^(alpha-d).
inline ConsistencyReport consistency_check(const CapacitoryResult& res, const Potential& v, const KernelMatrix& k) {
    require_same_grid(v.grid(), k.grid(), "consistency_check");
    require_same_grid(res.mu.grid(), k.grid(), "consistency_check");
    ConsistencyReport rep;
    const ScalarField u = res.u_mid();
    const ScalarField ku = apply_riesz(k, res.mu);
    for (std::size_t i = 0; i < u.size(); ++i) rep.potential_residual = std::max(rep.potential_residual, std::abs(u[i] - ku[i]));

    const GridSpec& g = v.grid();
    const double w = g.cell_weight();
    CompensatedSum energy, gamma, quad, slack;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double m = res.mu[i];
        energy.add(u[i] * m);
        gamma.add(m);
        slack.add((1.0 - u[i]) * m);
        quad.add(v[i] * (1.0 - u[i]) * (1.0 - u[i]));
    }
    rep.energy = w * energy.value();
    rep.gamma = w * gamma.value();
    rep.energy_slack = w * slack.value();
    CompensatedSum lhs;
    lhs.add(rep.energy);
    lhs.add(w * quad.value());
    rep.algebraic_gap = std::abs(lhs.value() - rep.gamma);
    rep.ulp_gamma = std::nextafter(rep.gamma, std::numeric_limits<double>::infinity()) - rep.gamma;

    const auto supp = v.support_box();
    if (!supp) return rep;
    const double c = k.constant();
    const double expo = g.alpha() - g.dim();
    double slack_min = std::numeric_limits<double>::infinity();
    std::vector<double> x(g.dim());
    for (std::size_t i = 0; i < u.size(); ++i) {
        g.center(i, x);
        const double diam = supp->hull_with(x).diameter();
        slack_min = std::min(slack_min, res.u_low[i] - c * res.gamma_low * std::pow(diam, expo));
    }
    rep.lower_bound_slack = slack_min;
    return rep;
}

}  // namespace scatlen
