#pragma once

#include "hjb/grid.hpp"
#include "hjb/model.hpp"

#include <iosfwd>
#include <vector>

namespace hjb {

/// Extension of fields on the closed ball to compactly supported fields:
///   E(w)(x) = w(x)                      for x in the closed ball,
///   E(w)(x) = chi(|x|) w(2R x/|x| - x)  on the ring R < |x| <= R + b/2,
///   E(w)(x) = 0                         beyond.
/// chi is the quintic smoothstep falling from 1 at R to 0 at R + b/2, and the
/// reflected value is a convex combination of closed-ball grid values, so
/// sup |E(w)| <= sup_ball |w|.
class ExtensionOperator {
public:
    ExtensionOperator(double radius, double margin, double A0);

    [[nodiscard]] double cutoff(double r) const;
    [[nodiscard]] Point reflect(const Point& x) const;

    /// Throws ExtensionBoundViolated if sup |E(w)| > 2 A0 sup_ball |w|.
    [[nodiscard]] ScalarField extend(const ScalarField& w) const;

    [[nodiscard]] double A0() const { return A0_; }

private:
    double radius_;
    double margin_;
    double A0_;
};

/// Nodes and nonnegative weights for nu(dz) = kappa(z) dz, plus the same rule
/// folded onto the grid lattice: since every target x is a grid point, the
/// multilinear interpolation of E(w) at x + z_j spreads w_j over four fixed
/// lattice offsets, and the whole sum becomes a discrete convolution.
struct NonlocalQuadrature {
    struct Tap {
        int di;
        int dj;
        double weight;
    };

    std::vector<Point> nodes;
    std::vector<double> weights;
    std::vector<Tap> taps;   // lattice kernel for the grid it was built on
    double dx = 0.0;

    [[nodiscard]] double mass() const;
    [[nodiscard]] double abs_first_moment() const;
    [[nodiscard]] Point first_moment() const;
    [[nodiscard]] bool empty() const { return nodes.empty(); }
};

/// Uses the same polar rule as build_model, so the masses agree exactly.
NonlocalQuadrature build_quadrature(const LevyModel& model, const Grid& grid);

/// Writes `z1,z2,weight` rows.
void write_quadrature_csv(const NonlocalQuadrature& quad, std::ostream& os);

/// sum_j w_j interp(w_ext, x + z_j); zero contribution outside the box.
double nonlocal_apply(const ScalarField& w_ext, const NonlocalQuadrature& quad, const Point& x);

/// nonlocal_apply at every Interior point (zero elsewhere), via the lattice
/// kernel.
ScalarField nonlocal_apply(const ScalarField& w_ext, const NonlocalQuadrature& quad);

/// nonlocal_apply(x) - nu0 w(x) - <grad_w(x), sum_j w_j z_j>.
double nonlocal_compensated(const ScalarField& w_ext, const VectorField& grad_w, const NonlocalQuadrature& quad,
                            Index k);

/// nonlocal_compensated at every Interior point.
ScalarField nonlocal_compensated(const ScalarField& w_ext, const VectorField& grad_w,
                                 const NonlocalQuadrature& quad);

}  // namespace hjb
