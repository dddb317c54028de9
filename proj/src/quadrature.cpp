#include "hjb/quadrature.hpp"

#include "hjb/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hjb {

GaussLegendre gauss_legendre(int n) {
    if (n < 1) throw Error(ErrorKind::InvalidConfig, "Gauss-Legendre order must be positive");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double beta = k / std::sqrt(4.0 * k * k - 1.0);
        jacobi(k, k - 1) = beta;
        jacobi(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussLegendre gl;
    gl.nodes = es.eigenvalues();
    gl.weights = 2.0 * es.eigenvectors().row(0).transpose().array().square();
    return gl;
}

PolarRule polar_rule(double outer, std::span<const double> breakpoints, PolarResolution res) {
    if (!(outer > 0.0) || res.radial < 1 || res.angular < 1)
        throw Error(ErrorKind::InvalidConfig, "polar rule needs a positive radius and node counts");

    std::vector<double> cuts{0.0, outer};
    for (double b : breakpoints)
        if (b > 0.0 && b < outer) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return std::abs(a - b) < 1e-14; }),
               cuts.end());

    std::vector<double> radii;
    std::vector<double> rweights;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s];
        const double b = cuts[s + 1];
        const int m = std::max(4, static_cast<int>(std::lround(res.radial * (b - a) / outer)));
        const GaussLegendre gl = gauss_legendre(m);
        for (int i = 0; i < m; ++i) {
            const double r = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[i];
            radii.push_back(r);
            rweights.push_back(0.5 * (b - a) * gl.weights[i] * r);
        }
    }

    PolarRule rule;
    const double dtheta = 2.0 * std::numbers::pi / res.angular;
    rule.nodes.reserve(radii.size() * static_cast<std::size_t>(res.angular));
    rule.weights.reserve(rule.nodes.capacity());
    for (int t = 0; t < res.angular; ++t) {
        const double theta = (t + 0.5) * dtheta;
        const Point dir(std::cos(theta), std::sin(theta));
        for (std::size_t i = 0; i < radii.size(); ++i) {
            rule.nodes.emplace_back(radii[i] * dir);
            rule.weights.push_back(rweights[i] * dtheta);
        }
    }
    return rule;
}

}  // namespace hjb
