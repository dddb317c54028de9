#include "hjb/extension.hpp"

#include "hjb/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

namespace hjb {

ExtensionOperator::ExtensionOperator(double radius, double margin, double A0)
    : radius_(radius), margin_(margin), A0_(A0) {}

double ExtensionOperator::cutoff(double r) const {
    if (r <= radius_) return 1.0;
    const double t = (r - radius_) / (0.5 * margin_);
    if (t >= 1.0) return 0.0;
    return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

Point ExtensionOperator::reflect(const Point& x) const {
    const double r = x.norm();
    return (2.0 * radius_ / r - 1.0) * x;
}

namespace {

// Multilinear interpolation from the closed-ball corners only.
double interpolate_ball(const ScalarField& w, const Point& x) {
    const Grid& g = *w.grid;
    const double sx = (x[0] + g.half_width()) / g.dx();
    const double sy = (x[1] + g.half_width()) / g.dx();
    const int i0 = std::clamp(static_cast<int>(std::floor(sx)), 0, g.n() - 2);
    const int j0 = std::clamp(static_cast<int>(std::floor(sy)), 0, g.n() - 2);
    const double fx = sx - i0;
    const double fy = sy - j0;
    double acc = 0.0;
    double total = 0.0;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const Index k = g.index(i0 + a, j0 + b);
            if (!g.in_closed_ball(k)) continue;
            const double wt = (a ? fx : 1.0 - fx) * (b ? fy : 1.0 - fy);
            acc += wt * w[k];
            total += wt;
        }
    }
    return total > 0.0 ? acc / total : 0.0;
}

}  // namespace

ScalarField ExtensionOperator::extend(const ScalarField& w) const {
    const Grid& g = *w.grid;
    ScalarField out(w.grid);
    double sup_ball = 0.0;
    double sup_out = 0.0;
    for (Index k = 0; k < g.size(); ++k) {
        switch (g.mask(k)) {
        case PointClass::Interior:
        case PointClass::Boundary:
            out[k] = w[k];
            sup_ball = std::max(sup_ball, std::abs(w[k]));
            break;
        case PointClass::ExtensionRing: {
            const Point x = g.point(k);
            out[k] = cutoff(x.norm()) * interpolate_ball(w, reflect(x));
            break;
        }
        case PointClass::Outside: break;
        }
        sup_out = std::max(sup_out, std::abs(out[k]));
    }
    if (sup_out > 2.0 * A0_ * sup_ball * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "sup |E(w)| = " << sup_out << " exceeds 2 A0 sup |w| = " << 2.0 * A0_ * sup_ball;
        throw Error(ErrorKind::ExtensionBoundViolated, os.str());
    }
    return out;
}

double NonlocalQuadrature::mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

double NonlocalQuadrature::abs_first_moment() const {
    double s = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) s += weights[j] * nodes[j].norm();
    return s;
}

Point NonlocalQuadrature::first_moment() const {
    Point s = Point::Zero();
    for (std::size_t j = 0; j < nodes.size(); ++j) s += weights[j] * nodes[j];
    return s;
}

NonlocalQuadrature build_quadrature(const LevyModel& model, const Grid& grid) {
    NonlocalQuadrature quad;
    quad.dx = grid.dx();
    if (model.kappa.empty()) return quad;

    const auto breaks = model.kappa.breakpoints();
    const PolarRule rule = polar_rule(model.jump_support_radius, breaks, model.quadrature.resolution);
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const double w = rule.weights[j] * model.kappa(rule.nodes[j]);
        if (w == 0.0) continue;
        quad.nodes.push_back(rule.nodes[j]);
        quad.weights.push_back(w);
    }

    std::map<std::pair<int, int>, double> kernel;
    for (std::size_t j = 0; j < quad.nodes.size(); ++j) {
        const double sx = quad.nodes[j][0] / quad.dx;
        const double sy = quad.nodes[j][1] / quad.dx;
        const int i0 = static_cast<int>(std::floor(sx));
        const int j0 = static_cast<int>(std::floor(sy));
        const double fx = sx - i0;
        const double fy = sy - j0;
        const double w = quad.weights[j];
        kernel[{i0, j0}] += w * (1.0 - fx) * (1.0 - fy);
        kernel[{i0 + 1, j0}] += w * fx * (1.0 - fy);
        kernel[{i0, j0 + 1}] += w * (1.0 - fx) * fy;
        kernel[{i0 + 1, j0 + 1}] += w * fx * fy;
    }
    quad.taps.reserve(kernel.size());
    for (const auto& [off, w] : kernel)
        if (w != 0.0) quad.taps.push_back({off.first, off.second, w});
    return quad;
}

void write_quadrature_csv(const NonlocalQuadrature& quad, std::ostream& os) {
    char buf[96];
    os << "z1,z2,weight\n";
    for (std::size_t j = 0; j < quad.nodes.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", quad.nodes[j][0], quad.nodes[j][1], quad.weights[j]);
        os << buf;
    }
}

double nonlocal_apply(const ScalarField& w_ext, const NonlocalQuadrature& quad, const Point& x) {
    double acc = 0.0;
    for (std::size_t j = 0; j < quad.nodes.size(); ++j) acc += quad.weights[j] * interpolate(w_ext, x + quad.nodes[j]);
    return acc;
}

ScalarField nonlocal_apply(const ScalarField& w_ext, const NonlocalQuadrature& quad) {
    const Grid& g = *w_ext.grid;
    if (!quad.empty() && std::abs(quad.dx - g.dx()) > 1e-14 * g.dx())
        throw Error(ErrorKind::InvalidConfig, "quadrature kernel was built for a different grid");
    ScalarField out(w_ext.grid);
    const int n = g.n();
    const double* v = w_ext.values.data();
    for (Index k : g.interior()) {
        const int i = g.i_of(k);
        const int j = g.j_of(k);
        double acc = 0.0;
        for (const auto& t : quad.taps) {
            const int a = i + t.di;
            const int b = j + t.dj;
            if (a < 0 || b < 0 || a >= n || b >= n) continue;
            acc += t.weight * v[static_cast<Index>(a) * n + b];
        }
        out[k] = acc;
    }
    return out;
}

double nonlocal_compensated(const ScalarField& w_ext, const VectorField& grad_w, const NonlocalQuadrature& quad,
                            Index k) {
    const Point x = w_ext.grid->point(k);
    return nonlocal_apply(w_ext, quad, x) - quad.mass() * w_ext[k] - grad_w.at(k).dot(quad.first_moment());
}

ScalarField nonlocal_compensated(const ScalarField& w_ext, const VectorField& grad_w,
                                 const NonlocalQuadrature& quad) {
    ScalarField out = nonlocal_apply(w_ext, quad);
    const double nu0 = quad.mass();
    const Point m = quad.first_moment();
    for (Index k : w_ext.grid->interior()) out[k] -= nu0 * w_ext[k] + grad_w.at(k).dot(m);
    return out;
}

}  // namespace hjb
