#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace hjb {

using Point = Eigen::Vector2d;
using Index = Eigen::Index;

enum class PointClass : std::uint8_t { Interior, Boundary, ExtensionRing, Outside };

constexpr std::string_view to_string(PointClass c) {
    switch (c) {
    case PointClass::Interior: return "interior";
    case PointClass::Boundary: return "boundary";
    case PointClass::ExtensionRing: return "ring";
    case PointClass::Outside: return "outside";
    }
    return "outside";
}

/// Uniform Cartesian grid on the square [-L, L]^2 with L = R + b/2 + dx,
/// masked against the ball B_R(0).
///
/// Classification:
///  - Interior:      |x| < R - dx/2
///  - Boundary:      | |x| - R | <= dx/2, plus every point beyond that band
///                   that is a 9-point stencil neighbour of an Interior
///                   point, so Interior stencils never leave the closed ball
///  - ExtensionRing: remaining points with R < |x| <= R + b/2
///  - Outside:       everything else
class Grid {
public:
    Grid(double radius, double margin, int n_per_axis);

    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] double dx() const { return dx_; }
    [[nodiscard]] double radius() const { return radius_; }
    [[nodiscard]] double margin() const { return margin_; }
    [[nodiscard]] double half_width() const { return half_width_; }
    [[nodiscard]] Index size() const { return static_cast<Index>(n_) * n_; }

    /// Row-major flat index: i runs along x1, j along x2, j fastest.
    [[nodiscard]] Index index(int i, int j) const { return static_cast<Index>(i) * n_ + j; }
    [[nodiscard]] int i_of(Index k) const { return static_cast<int>(k / n_); }
    [[nodiscard]] int j_of(Index k) const { return static_cast<int>(k % n_); }
    [[nodiscard]] double coord(int i) const { return -half_width_ + i * dx_; }
    [[nodiscard]] Point point(Index k) const { return {coord(i_of(k)), coord(j_of(k))}; }

    [[nodiscard]] PointClass mask(Index k) const { return mask_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] bool in_closed_ball(Index k) const {
        auto c = mask(k);
        return c == PointClass::Interior || c == PointClass::Boundary;
    }

    /// Flat indices of the Interior points, in increasing order; position in
    /// this list is the unknown number used by the linear solvers.
    [[nodiscard]] const std::vector<Index>& interior() const { return interior_; }
    [[nodiscard]] Index unknown(Index k) const { return unknown_[static_cast<std::size_t>(k)]; }
    [[nodiscard]] Index interior_count() const { return static_cast<Index>(interior_.size()); }

    [[nodiscard]] bool same_layout(const Grid& other) const;

private:
    double radius_;
    double margin_;
    int n_;
    double half_width_;
    double dx_;
    std::vector<PointClass> mask_;
    std::vector<Index> interior_;
    std::vector<Index> unknown_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Grid-sampled real function. Values at Outside points are zero.
struct ScalarField {
    GridPtr grid;
    Eigen::VectorXd values;

    ScalarField() = default;
    explicit ScalarField(GridPtr g) : grid(std::move(g)), values(Eigen::VectorXd::Zero(grid->size())) {}
    ScalarField(GridPtr g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {}

    [[nodiscard]] double operator[](Index k) const { return values[k]; }
    double& operator[](Index k) { return values[k]; }

    /// Sup norm over Interior and Boundary points.
    [[nodiscard]] double ball_sup_norm() const;
    /// Values at the Interior points, in unknown order.
    [[nodiscard]] Eigen::VectorXd interior_values() const;
    /// Field that is `v` on the Interior and zero everywhere else.
    static ScalarField from_interior(GridPtr g, const Eigen::VectorXd& v);
};

struct VectorField {
    GridPtr grid;
    Eigen::MatrixX2d values;

    explicit VectorField(GridPtr g) : grid(std::move(g)), values(Eigen::MatrixX2d::Zero(grid->size(), 2)) {}
    [[nodiscard]] Point at(Index k) const { return values.row(k).transpose(); }
};

/// f at every point except Outside ones, which stay zero.
template <typename F>
ScalarField sample(GridPtr grid, F&& f) {
    ScalarField out(grid);
    for (Index k = 0; k < grid->size(); ++k)
        if (grid->mask(k) != PointClass::Outside) out[k] = f(grid->point(k));
    return out;
}

/// Sup-norm distance over Interior and Boundary points.
double ball_sup_distance(const ScalarField& a, const ScalarField& b);

/// Discrete gradient. Central differences at Interior points, except that a
/// point with a Boundary neighbour along an axis uses the second-order
/// one-sided formula pointing away from it (when two points are available on
/// that side). Boundary points get one-sided differences towards the ball;
/// all other points get zero.
VectorField gradient(const ScalarField& f);

/// How first-order terms are differenced. With no direction, central
/// differences are used; otherwise, per axis, forward differences when the
/// direction component is positive, backward when negative, central when zero.
struct Upwinding {
    std::optional<Point> direction;

    static Upwinding central() { return {}; }
    static Upwinding against(const Point& d) { return {d}; }
};

/// First differences at Interior points following `upwinding`, i.e. the same
/// differences the drift part of a LocalOperator uses; zero elsewhere.
VectorField upwind_gradient(const ScalarField& f, const Upwinding& upwinding);

/// Second-order operator 1/2 tr(sigma D^2 f) + <drift, Df>.
struct LocalOperator {
    Eigen::Matrix2d sigma;
    Point drift;
    Upwinding upwinding;
};

/// 3x3 stencil weights, entry (a+1, b+1) multiplying f(x + (a, b) dx).
using Stencil = std::array<std::array<double, 3>, 3>;

/// Positive-coefficient stencil for the operator. Throws
/// MonotonicityViolation if |sigma_12| > min(sigma_11, sigma_22).
Stencil local_stencil(const LocalOperator& op, double dx);

/// Applies the operator at every Interior point; zero elsewhere.
ScalarField apply_local_operator(const ScalarField& f, const LocalOperator& op);

/// Sparse matrix of (diag_shift * Id - op) restricted to the Interior
/// unknowns, with the Boundary values taken as zero.
Eigen::SparseMatrix<double> assemble_shifted_operator(const Grid& grid, const LocalOperator& op,
                                                      double diag_shift);

/// Multilinear interpolation; zero outside the box.
double interpolate(const ScalarField& f, const Point& x);

/// Multilinear interpolation of a vector field using only corners in the
/// closed ball, with weights renormalised over those corners.
Point interpolate_in_ball(const VectorField& f, const Point& x);

}  // namespace hjb
