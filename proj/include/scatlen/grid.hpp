#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "scatlen/error.hpp"
#include "scatlen/numeric.hpp"

namespace scatlen {

/// Axis-aligned box, lower[k] < upper[k] on every axis.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    int dim() const noexcept { return static_cast<int>(lower.size()); }

    double side(int k) const { return upper[k] - lower[k]; }

    double volume() const {
        double v = 1.0;
        for (int k = 0; k < dim(); ++k) v *= side(k);
        return v;
    }

    double diameter() const {
        double s = 0.0;
        for (int k = 0; k < dim(); ++k) s += side(k) * side(k);
        return std::sqrt(s);
    }

    bool contains(std::span<const double> x) const {
        for (int k = 0; k < dim(); ++k)
            if (x[k] < lower[k] || x[k] > upper[k]) return false;
        return true;
    }

    bool contains(const Box& other) const {
        for (int k = 0; k < dim(); ++k)
            if (other.lower[k] < lower[k] || other.upper[k] > upper[k]) return false;
        return true;
    }

    /// Box holding both this box and the point x.
    Box hull_with(std::span<const double> x) const {
        Box b = *this;
        for (int k = 0; k < dim(); ++k) {
            b.lower[k] = std::min(b.lower[k], x[k]);
            b.upper[k] = std::max(b.upper[k], x[k]);
        }
        return b;
    }

    /// Euclidean distance from x to the nearest and to the farthest point of the box.
    std::pair<double, double> distance_range(std::span<const double> x) const {
        double near = 0.0, far = 0.0;
        for (int k = 0; k < dim(); ++k) {
            const double below = lower[k] - x[k];
            const double above = x[k] - upper[k];
            const double gap = std::max({below, above, 0.0});
            const double reach = std::max(std::abs(x[k] - lower[k]), std::abs(x[k] - upper[k]));
            near += gap * gap;
            far += reach * reach;
        }
        return {std::sqrt(near), std::sqrt(far)};
    }

    bool operator==(const Box&) const = default;
};

/// Uniform cell-centred lattice on a box in R^d, carrying the stability index
/// alpha of the process it is used with. Cells are ordered lexicographically
/// with the last axis varying fastest.
class GridSpec {
public:
    GridSpec(int dim, double alpha, Box box, std::size_t points_per_axis)
        : dim_(dim), alpha_(alpha), box_(std::move(box)), n_(points_per_axis) {
        if (dim_ < 1) throw InvalidArgument("grid dimension must be at least 1");
        if (!(alpha_ > 0.0 && alpha_ < 2.0))
            throw InvalidArgument("alpha must lie in (0, 2), got " + std::to_string(alpha_));
        if (!(static_cast<double>(dim_) > alpha_))
            throw InvalidArgument("dimension must exceed alpha (d > alpha), got d=" +
                                  std::to_string(dim_) + " alpha=" + std::to_string(alpha_));
        if (n_ < 2) throw InvalidArgument("points_per_axis must be at least 2");
        if (box_.dim() != dim_ || static_cast<int>(box_.upper.size()) != dim_)
            throw InvalidArgument("box corners must have one coordinate per axis");
        for (int k = 0; k < dim_; ++k) {
            if (!(box_.upper[k] > box_.lower[k]) || !std::isfinite(box_.side(k)))
                throw InvalidArgument("degenerate box on axis " + std::to_string(k));
        }
        size_ = 1;
        for (int k = 0; k < dim_; ++k) size_ *= n_;
    }

    int dim() const noexcept { return dim_; }
    double alpha() const noexcept { return alpha_; }
    const Box& box() const noexcept { return box_; }
    std::size_t points_per_axis() const noexcept { return n_; }
    std::size_t size() const noexcept { return size_; }

    double spacing(int k) const { return box_.side(k) / static_cast<double>(n_); }

    double cell_weight() const {
        double w = 1.0;
        for (int k = 0; k < dim_; ++k) w *= spacing(k);
        return w;
    }

    /// Index of cell i along axis k.
    std::size_t axis_index(std::size_t i, int k) const {
        std::size_t stride = 1;
        for (int j = dim_ - 1; j > k; --j) stride *= n_;
        return (i / stride) % n_;
    }

    double center_coord(std::size_t i, int k) const {
        return box_.lower[k] + (static_cast<double>(axis_index(i, k)) + 0.5) * spacing(k);
    }

    void center(std::size_t i, std::span<double> out) const {
        for (int k = 0; k < dim_; ++k) out[k] = center_coord(i, k);
    }

    std::vector<double> center(std::size_t i) const {
        std::vector<double> x(dim_);
        center(i, x);
        return x;
    }

    /// All centres, flattened (cell-major).
    std::vector<double> centers() const {
        std::vector<double> xs(size_ * dim_);
        for (std::size_t i = 0; i < size_; ++i)
            center(i, std::span<double>(xs.data() + i * dim_, dim_));
        return xs;
    }

    Box cell_box(std::size_t i) const {
        Box b{std::vector<double>(dim_), std::vector<double>(dim_)};
        for (int k = 0; k < dim_; ++k) {
            const double lo = box_.lower[k] + static_cast<double>(axis_index(i, k)) * spacing(k);
            b.lower[k] = lo;
            b.upper[k] = lo + spacing(k);
        }
        return b;
    }

    /// Cell containing x, or nullopt outside the box. Points on the upper face
    /// belong to the last cell.
    std::optional<std::size_t> locate(std::span<const double> x) const {
        std::size_t idx = 0;
        for (int k = 0; k < dim_; ++k) {
            if (!(x[k] >= box_.lower[k] && x[k] <= box_.upper[k])) return std::nullopt;
            auto a = static_cast<std::size_t>((x[k] - box_.lower[k]) / spacing(k));
            if (a >= n_) a = n_ - 1;
            idx = idx * n_ + a;
        }
        return idx;
    }

    bool operator==(const GridSpec&) const = default;

private:
    int dim_;
    double alpha_;
    Box box_;
    std::size_t n_;
    std::size_t size_ = 0;
};

inline GridSpec build_grid(int dim, double alpha, Box box, std::size_t points_per_axis) {
    return GridSpec(dim, alpha, std::move(box), points_per_axis);
}

/// Cube [lo, hi]^d.
inline Box cube(int dim, double lo, double hi) {
    return Box{std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
}

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!(a == b)) throw GridMismatch(std::string("grid mismatch in ") + what);
}

/// Real-valued grid function.
class ScalarField {
public:
    explicit ScalarField(GridSpec grid) : grid_(std::move(grid)), values_(grid_.size(), 0.0) {}

    ScalarField(GridSpec grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw InvalidArgument("field has " + std::to_string(values_.size()) +
                                  " values for a grid of " + std::to_string(grid_.size()));
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

private:
    GridSpec grid_;
    std::vector<double> values_;
};

/// Nonnegative piecewise-constant potential on a grid (value of cell i on the
/// whole cell, zero outside the grid box).
class Potential {
public:
    Potential(GridSpec grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size())
            throw InvalidArgument("potential has " + std::to_string(values_.size()) +
                                  " values for a grid of " + std::to_string(grid_.size()));
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
                throw NegativePotential("potential value at cell " + std::to_string(i) +
                                        " is negative or not finite");
        }
    }

    static Potential zero(const GridSpec& grid) { return Potential(grid, std::vector<double>(grid.size(), 0.0)); }

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }

    bool is_zero() const {
        for (double v : values_)
            if (v != 0.0) return false;
        return true;
    }

    double norm_l1() const { return grid_.cell_weight() * compensated_sum(values_); }

    double norm_lp(double p) const {
        if (!(p >= 1.0)) throw InvalidArgument("L^p norm needs p >= 1");
        CompensatedSum acc;
        for (double v : values_) acc.add(std::pow(v, p));
        return std::pow(grid_.cell_weight() * acc.value(), 1.0 / p);
    }

    double norm_sup() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, v);
        return m;
    }

    /// Bounding box of the cells where the potential is positive.
    std::optional<Box> support_box() const {
        std::optional<Box> out;
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (values_[i] <= 0.0) continue;
            Box c = grid_.cell_box(i);
            if (!out) {
                out = c;
                continue;
            }
            for (int k = 0; k < grid_.dim(); ++k) {
                out->lower[k] = std::min(out->lower[k], c.lower[k]);
                out->upper[k] = std::max(out->upper[k], c.upper[k]);
            }
        }
        return out;
    }

    /// Piecewise-constant evaluation at an arbitrary point.
    double value_at(std::span<const double> x) const {
        auto idx = grid_.locate(x);
        return idx ? values_[*idx] : 0.0;
    }

    Potential scaled(double factor) const {
        if (!(factor >= 0.0)) throw NegativePotential("potential multiplier must be nonnegative");
        std::vector<double> out(values_);
        for (double& v : out) v *= factor;
        return Potential(grid_, std::move(out));
    }

    /// Pointwise min(v, cap).
    Potential truncated(double cap) const {
        std::vector<double> out(values_);
        for (double& v : out) v = std::min(v, cap);
        return Potential(grid_, std::move(out));
    }

    ScalarField as_field() const { return ScalarField(grid_, values_); }

    friend Potential operator+(const Potential& a, const Potential& b) {
        require_same_grid(a.grid_, b.grid_, "potential sum");
        std::vector<double> out(a.values_);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values_[i];
        return Potential(a.grid_, std::move(out));
    }

private:
    GridSpec grid_;
    std::vector<double> values_;
};

// Potential shape algebra ---------------------------------------------------

class PotentialSpec;

struct GaussianShape {
    std::vector<double> center;
    double width = 1.0;
    double amplitude = 1.0;
};

struct BoxIndicatorShape {
    Box box;
    double amplitude = 1.0;
};

struct BallIndicatorShape {
    std::vector<double> center;
    double radius = 1.0;
    double amplitude = 1.0;
};

struct SumShape {
    std::vector<PotentialSpec> terms;
};

struct ScaledShape {
    double factor = 1.0;
    std::vector<PotentialSpec> inner;  // exactly one element
};

/// Named potential shapes closed under sums and nonnegative multiples.
/// Indicators are closed sets evaluated at cell centres.
class PotentialSpec {
public:
    using Node = std::variant<GaussianShape, BoxIndicatorShape, BallIndicatorShape, SumShape, ScaledShape>;

    PotentialSpec(Node node) : node_(std::move(node)) {}

    static PotentialSpec gaussian(std::vector<double> center, double width, double amplitude) {
        return PotentialSpec(GaussianShape{std::move(center), width, amplitude});
    }
    static PotentialSpec box_indicator(Box box, double amplitude) {
        return PotentialSpec(BoxIndicatorShape{std::move(box), amplitude});
    }
    static PotentialSpec ball_indicator(std::vector<double> center, double radius, double amplitude) {
        return PotentialSpec(BallIndicatorShape{std::move(center), radius, amplitude});
    }
    static PotentialSpec sum(std::vector<PotentialSpec> terms) { return PotentialSpec(SumShape{std::move(terms)}); }
    static PotentialSpec scaled(double factor, PotentialSpec inner) {
        return PotentialSpec(ScaledShape{factor, {std::move(inner)}});
    }

    const Node& node() const noexcept { return node_; }

    /// Throws on negative amplitudes/factors, nonpositive widths and radii, or
    /// coordinates whose dimension does not match.
    void validate(int dim) const {
        std::visit(
            [dim](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                auto check_amp = [](double a) {
                    if (!(a >= 0.0) || !std::isfinite(a))
                        throw NegativePotential("potential amplitude must be nonnegative");
                };
                if constexpr (std::is_same_v<T, GaussianShape>) {
                    check_amp(s.amplitude);
                    if (static_cast<int>(s.center.size()) != dim) throw InvalidArgument("gaussian centre dimension");
                    if (!(s.width > 0.0)) throw InvalidArgument("gaussian width must be positive");
                } else if constexpr (std::is_same_v<T, BoxIndicatorShape>) {
                    check_amp(s.amplitude);
                    if (s.box.dim() != dim || static_cast<int>(s.box.upper.size()) != dim)
                        throw InvalidArgument("indicator box dimension");
                } else if constexpr (std::is_same_v<T, BallIndicatorShape>) {
                    check_amp(s.amplitude);
                    if (static_cast<int>(s.center.size()) != dim) throw InvalidArgument("ball centre dimension");
                    if (!(s.radius > 0.0)) throw InvalidArgument("ball radius must be positive");
                } else if constexpr (std::is_same_v<T, SumShape>) {
                    for (const auto& t : s.terms) t.validate(dim);
                } else {
                    check_amp(s.factor);
                    if (s.inner.size() != 1) throw InvalidArgument("scaled shape needs one operand");
                    s.inner.front().validate(dim);
                }
            },
            node_);
    }

    double operator()(std::span<const double> x) const {
        return std::visit(
            [x](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, GaussianShape>) {
                    double r2 = 0.0;
                    for (std::size_t k = 0; k < s.center.size(); ++k) r2 += (x[k] - s.center[k]) * (x[k] - s.center[k]);
                    return s.amplitude * std::exp(-r2 / (2.0 * s.width * s.width));
                } else if constexpr (std::is_same_v<T, BoxIndicatorShape>) {
                    return s.box.contains(x) ? s.amplitude : 0.0;
                } else if constexpr (std::is_same_v<T, BallIndicatorShape>) {
                    double r2 = 0.0;
                    for (std::size_t k = 0; k < s.center.size(); ++k) r2 += (x[k] - s.center[k]) * (x[k] - s.center[k]);
                    return r2 <= s.radius * s.radius ? s.amplitude : 0.0;
                } else if constexpr (std::is_same_v<T, SumShape>) {
                    double acc = 0.0;
                    for (const auto& t : s.terms) acc += t(x);
                    return acc;
                } else {
                    return s.factor * s.inner.front()(x);
                }
            },
            node_);
    }

private:
    Node node_;
};

inline Potential eval_potential(const PotentialSpec& spec, const GridSpec& grid) {
    spec.validate(grid.dim());
    std::vector<double> values(grid.size());
    std::vector<double> x(grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.center(i, x);
        values[i] = spec(x);
    }
    return Potential(grid, std::move(values));
}

/// Box scaled by 1/r about the origin.
inline Box shrink_box(const Box& box, double r) {
    Box b = box;
    for (double& x : b.lower) x /= r;
    for (double& x : b.upper) x /= r;
    return b;
}

/// v_r(x) = r^alpha v(r x), realised on the grid whose box is box/r with the
/// same lattice, so the new centres are the old centres divided by r.
inline Potential scale_potential(const Potential& v, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("scale factor must be positive");
    const GridSpec& g = v.grid();
    GridSpec scaled_grid(g.dim(), g.alpha(), shrink_box(g.box(), r), g.points_per_axis());
    const double amp = std::pow(r, g.alpha());
    std::vector<double> values(v.values().begin(), v.values().end());
    for (double& x : values) x *= amp;
    return Potential(std::move(scaled_grid), std::move(values));
}

/// Same piecewise-constant function on the grid with `factor` times as many
/// cells per axis.
inline Potential prolong(const Potential& v, std::size_t factor) {
    if (factor < 1) throw InvalidArgument("prolongation factor must be positive");
    const GridSpec& g = v.grid();
    GridSpec fine(g.dim(), g.alpha(), g.box(), g.points_per_axis() * factor);
    std::vector<double> values(fine.size());
    for (std::size_t i = 0; i < fine.size(); ++i) {
        std::size_t parent = 0;
        for (int k = 0; k < g.dim(); ++k) parent = parent * g.points_per_axis() + fine.axis_index(i, k) / factor;
        values[i] = v[parent];
    }
    return Potential(std::move(fine), std::move(values));
}

/// Midpoint quadrature: sum of values times the common cell weight.
inline double integrate(const ScalarField& f) { return f.grid().cell_weight() * compensated_sum(f.values()); }
inline double integrate(const Potential& v) { return v.grid().cell_weight() * compensated_sum(v.values()); }

}  // namespace scatlen
