#pragma once

#include <cmath>

namespace oracle {

/// Piecewise blend and its rescaling, written out independently of the
/// library.
inline double psi(double s) { return s <= 0.0 ? 0.0 : (s >= 2.0 ? s - 1.0 : 0.25 * s * s); }
inline double psi_eps(double r, double eps) { return psi((r - 1.0) / eps); }

/// sup_{t >= 0} { a t - psi_eps(t^2) } by golden-section search; the
/// objective is concave in t.
inline double legendre_radial(double a, double eps) {
    auto phi = [&](double t) { return a * t - psi_eps(t * t, eps); };
    double lo = 0.0;
    double hi = 2.0 + eps * a;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo);
    double x2 = lo + g * (hi - lo);
    double f1 = phi(x1);
    double f2 = phi(x2);
    while (hi - lo > 1e-13) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = phi(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = phi(x1);
        }
    }
    return std::max(phi(0.5 * (lo + hi)), 0.0);
}

}  // namespace oracle
