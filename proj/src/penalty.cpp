#include "hjb/penalty.hpp"

#include "hjb/quadrature.hpp"

namespace hjb::detail {

namespace {

constexpr int kOrder = 96;

double bump(double s) {
    if (s <= 0.0 || s >= 2.0) return 0.0;
    return std::exp(-1.0 / (s * (2.0 - s)));
}

struct SmoothTables {
    GaussLegendre gl = gauss_legendre(kOrder);
    double scale = 0.0;  // 1 / int_0^2 bump

    SmoothTables() {
        double total = 0.0;
        for (int i = 0; i < kOrder; ++i) total += gl.weights[i] * bump(1.0 + gl.nodes[i]);
        scale = 1.0 / total;
    }
};

const SmoothTables& tables() {
    static const SmoothTables t;
    return t;
}

}  // namespace

double smooth_psi_prime(double s) {
    const auto& t = tables();
    double acc = 0.0;
    for (int i = 0; i < kOrder; ++i) acc += t.gl.weights[i] * bump(0.5 * s * (1.0 + t.gl.nodes[i]));
    return 0.5 * s * acc * t.scale;
}

double smooth_psi(double s) {
    const auto& t = tables();
    double acc = 0.0;
    for (int i = 0; i < kOrder; ++i) {
        const double x = 0.5 * s * (1.0 + t.gl.nodes[i]);
        acc += t.gl.weights[i] * (s - x) * bump(x);
    }
    return 0.5 * s * acc * t.scale;
}

}  // namespace hjb::detail
