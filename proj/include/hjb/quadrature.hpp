#pragma once

#include "hjb/grid.hpp"

#include <span>
#include <vector>

namespace hjb {

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
struct GaussLegendre {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};
GaussLegendre gauss_legendre(int n);

/// Product rule on the disc |z| <= outer: Gauss-Legendre in r on each
/// segment between consecutive breakpoints, periodic trapezoid in angle.
/// Weights include the Jacobian r and integrate area, so a density integral
/// is sum_j weight_j * kappa(node_j).
struct PolarRule {
    std::vector<Point> nodes;
    std::vector<double> weights;
};

struct PolarResolution {
    int radial = 64;   // total radial nodes, spread over segments by length
    int angular = 64;
};

PolarRule polar_rule(double outer, std::span<const double> breakpoints, PolarResolution res);

}  // namespace hjb
