#include "hjb/grid.hpp"

#include "hjb/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hjb {

Grid::Grid(double radius, double margin, int n_per_axis)
    : radius_(radius), margin_(margin), n_(n_per_axis) {
    if (!(radius > 0.0) || !(margin > 0.0))
        throw Error(ErrorKind::InvalidConfig, "grid needs R > 0 and b > 0");
    if (n_per_axis < 9)
        throw Error(ErrorKind::InvalidConfig, "grid needs at least 9 points per axis");

    // L = R + b/2 + dx and dx = 2L / (n - 1).
    dx_ = 2.0 * (radius + 0.5 * margin) / (n_ - 3);
    half_width_ = radius + 0.5 * margin + dx_;

    const auto total = static_cast<std::size_t>(size());
    mask_.assign(total, PointClass::Outside);
    std::vector<double> rad(total);
    for (Index k = 0; k < size(); ++k) rad[static_cast<std::size_t>(k)] = point(k).norm();

    const double half = 0.5 * dx_;
    for (std::size_t k = 0; k < total; ++k) {
        const double r = rad[k];
        if (r < radius - half)
            mask_[k] = PointClass::Interior;
        else if (r <= radius + half)
            mask_[k] = PointClass::Boundary;
        else if (r <= radius + 0.5 * margin)
            mask_[k] = PointClass::ExtensionRing;
    }
    // Close the Interior stencils: any neighbour of an Interior point that is
    // not yet in the closed ball becomes Boundary.
    for (std::size_t k = 0; k < total; ++k) {
        if (mask_[k] != PointClass::Interior) continue;
        const int i = i_of(static_cast<Index>(k));
        const int j = j_of(static_cast<Index>(k));
        for (int a = -1; a <= 1; ++a) {
            for (int b = -1; b <= 1; ++b) {
                auto nb = static_cast<std::size_t>(index(i + a, j + b));
                if (mask_[nb] == PointClass::ExtensionRing || mask_[nb] == PointClass::Outside)
                    mask_[nb] = PointClass::Boundary;
            }
        }
    }

    unknown_.assign(total, -1);
    for (std::size_t k = 0; k < total; ++k) {
        if (mask_[k] == PointClass::Interior) {
            unknown_[k] = static_cast<Index>(interior_.size());
            interior_.push_back(static_cast<Index>(k));
        }
    }
}

bool Grid::same_layout(const Grid& other) const {
    return n_ == other.n_ && radius_ == other.radius_ && margin_ == other.margin_;
}

double ScalarField::ball_sup_norm() const {
    double m = 0.0;
    for (Index k = 0; k < grid->size(); ++k)
        if (grid->in_closed_ball(k)) m = std::max(m, std::abs(values[k]));
    return m;
}

Eigen::VectorXd ScalarField::interior_values() const {
    const auto& idx = grid->interior();
    Eigen::VectorXd v(static_cast<Index>(idx.size()));
    for (std::size_t u = 0; u < idx.size(); ++u) v[static_cast<Index>(u)] = values[idx[u]];
    return v;
}

ScalarField ScalarField::from_interior(GridPtr g, const Eigen::VectorXd& v) {
    ScalarField out(g);
    const auto& idx = g->interior();
    for (std::size_t u = 0; u < idx.size(); ++u) out[idx[u]] = v[static_cast<Index>(u)];
    return out;
}

double ball_sup_distance(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (Index k = 0; k < a.grid->size(); ++k)
        if (a.grid->in_closed_ball(k)) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

namespace {

bool valid(const Grid& g, int i, int j) { return i >= 0 && j >= 0 && i < g.n() && j < g.n(); }

bool in_ball(const Grid& g, int i, int j) { return valid(g, i, j) && g.in_closed_ball(g.index(i, j)); }

PointClass class_at(const Grid& g, int i, int j) {
    return valid(g, i, j) ? g.mask(g.index(i, j)) : PointClass::Outside;
}

double axis_derivative(const ScalarField& f, int i, int j, int axis) {
    const Grid& g = *f.grid;
    const int di = axis == 0 ? 1 : 0;
    const int dj = axis == 0 ? 0 : 1;
    auto val = [&](int s) { return f[g.index(i + s * di, j + s * dj)]; };
    const double inv2h = 0.5 / g.dx();
    const PointClass self = g.mask(g.index(i, j));
    const PointClass plus = class_at(g, i + di, j + dj);
    const PointClass minus = class_at(g, i - di, j - dj);
    const bool plus2 = in_ball(g, i + 2 * di, j + 2 * dj);
    const bool minus2 = in_ball(g, i - 2 * di, j - 2 * dj);

    if (self == PointClass::Interior) {
        if (plus == PointClass::Boundary && minus == PointClass::Interior && minus2)
            return (3.0 * val(0) - 4.0 * val(-1) + val(-2)) * inv2h;
        if (minus == PointClass::Boundary && plus == PointClass::Interior && plus2)
            return (-3.0 * val(0) + 4.0 * val(1) - val(2)) * inv2h;
        return (val(1) - val(-1)) * inv2h;
    }
    // Boundary point: difference towards the ball.
    if (minus == PointClass::Interior && minus2)
        return (3.0 * val(0) - 4.0 * val(-1) + val(-2)) * inv2h;
    if (plus == PointClass::Interior && plus2)
        return (-3.0 * val(0) + 4.0 * val(1) - val(2)) * inv2h;
    const bool pin = in_ball(g, i + di, j + dj);
    const bool min = in_ball(g, i - di, j - dj);
    if (pin && min) return (val(1) - val(-1)) * inv2h;
    if (min) return (val(0) - val(-1)) / g.dx();
    if (pin) return (val(1) - val(0)) / g.dx();
    return 0.0;
}

}  // namespace

VectorField gradient(const ScalarField& f) {
    const Grid& g = *f.grid;
    VectorField out(f.grid);
    for (Index k = 0; k < g.size(); ++k) {
        if (!g.in_closed_ball(k)) continue;
        const int i = g.i_of(k);
        const int j = g.j_of(k);
        out.values(k, 0) = axis_derivative(f, i, j, 0);
        out.values(k, 1) = axis_derivative(f, i, j, 1);
    }
    return out;
}

VectorField upwind_gradient(const ScalarField& f, const Upwinding& upwinding) {
    const Grid& g = *f.grid;
    VectorField out(f.grid);
    const double dx = g.dx();
    for (Index k : g.interior()) {
        const int i = g.i_of(k);
        const int j = g.j_of(k);
        for (int axis = 0; axis < 2; ++axis) {
            const Index plus = axis == 0 ? g.index(i + 1, j) : g.index(i, j + 1);
            const Index minus = axis == 0 ? g.index(i - 1, j) : g.index(i, j - 1);
            const double dir = upwinding.direction ? (*upwinding.direction)[axis] : 0.0;
            if (dir > 0.0)
                out.values(k, axis) = (f[plus] - f[k]) / dx;
            else if (dir < 0.0)
                out.values(k, axis) = (f[k] - f[minus]) / dx;
            else
                out.values(k, axis) = 0.5 * (f[plus] - f[minus]) / dx;
        }
    }
    return out;
}

Stencil local_stencil(const LocalOperator& op, double dx) {
    const double s11 = op.sigma(0, 0);
    const double s22 = op.sigma(1, 1);
    const double s12 = 0.5 * (op.sigma(0, 1) + op.sigma(1, 0));
    const double c = std::abs(s12);
    if (c > std::min(s11, s22)) {
        std::ostringstream os;
        os << "|sigma_12| / min(sigma_11, sigma_22) = " << c / std::min(s11, s22) << " > 1";
        throw Error(ErrorKind::MonotonicityViolation, os.str());
    }
    const double inv = 1.0 / (dx * dx);
    Stencil w{};
    auto at = [&](int a, int b) -> double& { return w[static_cast<std::size_t>(a + 1)][static_cast<std::size_t>(b + 1)]; };

    at(1, 0) += 0.5 * (s11 - c) * inv;
    at(-1, 0) += 0.5 * (s11 - c) * inv;
    at(0, 1) += 0.5 * (s22 - c) * inv;
    at(0, -1) += 0.5 * (s22 - c) * inv;
    if (s12 > 0.0) {
        at(1, 1) += 0.5 * c * inv;
        at(-1, -1) += 0.5 * c * inv;
    } else if (s12 < 0.0) {
        at(-1, 1) += 0.5 * c * inv;
        at(1, -1) += 0.5 * c * inv;
    }
    at(0, 0) += (c - s11 - s22) * inv;

    for (int axis = 0; axis < 2; ++axis) {
        const double v = op.drift[axis];
        if (v == 0.0) continue;
        auto cell = [&](int s) -> double& { return axis == 0 ? at(s, 0) : at(0, s); };
        const double dir = op.upwinding.direction ? (*op.upwinding.direction)[axis] : 0.0;
        if (dir > 0.0) {
            cell(1) += v / dx;
            cell(0) -= v / dx;
        } else if (dir < 0.0) {
            cell(0) += v / dx;
            cell(-1) -= v / dx;
        } else {
            cell(1) += 0.5 * v / dx;
            cell(-1) -= 0.5 * v / dx;
        }
    }
    return w;
}

ScalarField apply_local_operator(const ScalarField& f, const LocalOperator& op) {
    const Grid& g = *f.grid;
    const Stencil w = local_stencil(op, g.dx());
    ScalarField out(f.grid);
    for (Index k : g.interior()) {
        const int i = g.i_of(k);
        const int j = g.j_of(k);
        double acc = 0.0;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                acc += w[static_cast<std::size_t>(a + 1)][static_cast<std::size_t>(b + 1)] * f[g.index(i + a, j + b)];
        out[k] = acc;
    }
    return out;
}

Eigen::SparseMatrix<double> assemble_shifted_operator(const Grid& g, const LocalOperator& op, double diag_shift) {
    const Stencil w = local_stencil(op, g.dx());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(g.interior_count()) * 9);
    for (Index k : g.interior()) {
        const Index row = g.unknown(k);
        const int i = g.i_of(k);
        const int j = g.j_of(k);
        for (int a = -1; a <= 1; ++a) {
            for (int b = -1; b <= 1; ++b) {
                const Index col = g.unknown(g.index(i + a, j + b));
                if (col < 0) continue;
                double v = -w[static_cast<std::size_t>(a + 1)][static_cast<std::size_t>(b + 1)];
                if (a == 0 && b == 0) v += diag_shift;
                trips.emplace_back(row, col, v);
            }
        }
    }
    Eigen::SparseMatrix<double> m(g.interior_count(), g.interior_count());
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

namespace {

struct Cell {
    int i0, j0;
    double fx, fy;
};

std::optional<Cell> locate(const Grid& g, const Point& x) {
    const double sx = (x[0] + g.half_width()) / g.dx();
    const double sy = (x[1] + g.half_width()) / g.dx();
    const double top = g.n() - 1;
    if (!(sx >= 0.0 && sy >= 0.0 && sx <= top && sy <= top)) return std::nullopt;
    int i0 = std::min(static_cast<int>(std::floor(sx)), g.n() - 2);
    int j0 = std::min(static_cast<int>(std::floor(sy)), g.n() - 2);
    return Cell{i0, j0, sx - i0, sy - j0};
}

}  // namespace

double interpolate(const ScalarField& f, const Point& x) {
    const Grid& g = *f.grid;
    auto cell = locate(g, x);
    if (!cell) return 0.0;
    const auto [i0, j0, fx, fy] = *cell;
    return (1 - fx) * (1 - fy) * f[g.index(i0, j0)] + fx * (1 - fy) * f[g.index(i0 + 1, j0)] +
           (1 - fx) * fy * f[g.index(i0, j0 + 1)] + fx * fy * f[g.index(i0 + 1, j0 + 1)];
}

Point interpolate_in_ball(const VectorField& f, const Point& x) {
    const Grid& g = *f.grid;
    auto cell = locate(g, x);
    if (!cell) return Point::Zero();
    const auto [i0, j0, fx, fy] = *cell;
    Point acc = Point::Zero();
    double total = 0.0;
    const std::array<std::array<double, 2>, 2> wt{{{(1 - fx) * (1 - fy), (1 - fx) * fy}, {fx * (1 - fy), fx * fy}}};
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const Index k = g.index(i0 + a, j0 + b);
            if (!g.in_closed_ball(k)) continue;
            const double w = wt[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            acc += w * f.at(k);
            total += w;
        }
    }
    return total > 1e-12 ? Point(acc / total) : Point::Zero();
}

}  // namespace hjb
