#pragma once

#include "hjb/grid.hpp"

#include <cmath>
#include <string_view>

namespace hjb {

/// Base function psi. Piecewise is the C^1 blend
///   psi(s) = 0 (s <= 0), s^2/4 (0 <= s <= 2), s - 1 (s >= 2);
/// Smooth replaces the middle piece by the double integral of a normalised
/// C^inf bump supported on [0, 2], which keeps psi(s) = s - 1 for s >= 2.
enum class Blend { Piecewise, Smooth };

constexpr std::string_view to_string(Blend b) { return b == Blend::Piecewise ? "piecewise" : "smooth"; }

struct PenaltySpec {
    double epsilon = 0.5;
    Blend blend = Blend::Piecewise;
};

namespace detail {

// psi'(s) and psi(s) of the smooth blend for 0 < s < 2.
double smooth_psi_prime(double s);
double smooth_psi(double s);

}  // namespace detail

template <typename Scalar>
Scalar psi(Scalar s, Blend blend = Blend::Piecewise) {
    if (s <= Scalar(0)) return Scalar(0);
    if (s >= Scalar(2)) return s - Scalar(1);
    if (blend == Blend::Smooth) return Scalar(detail::smooth_psi(static_cast<double>(s)));
    return s * s / Scalar(4);
}

template <typename Scalar>
Scalar psi_prime(Scalar s, Blend blend = Blend::Piecewise) {
    if (s <= Scalar(0)) return Scalar(0);
    if (s >= Scalar(2)) return Scalar(1);
    if (blend == Blend::Smooth) return Scalar(detail::smooth_psi_prime(static_cast<double>(s)));
    return s / Scalar(2);
}

/// psi_eps(r) = psi((r - 1) / eps)
template <typename Scalar>
Scalar psi_eps(Scalar r, const PenaltySpec& p) {
    return psi((r - Scalar(1)) / Scalar(p.epsilon), p.blend);
}

/// d/dr psi_eps(r) = psi'((r - 1) / eps) / eps
template <typename Scalar>
Scalar psi_eps_prime(Scalar r, const PenaltySpec& p) {
    return psi_prime((r - Scalar(1)) / Scalar(p.epsilon), p.blend) / Scalar(p.epsilon);
}

/// l_eps(eta) = sup_zeta { <eta, zeta> - psi_eps(|zeta|^2) } as a function of
/// |eta|. The maximiser is parallel to eta with length t solving
/// 2 t psi_eps'(t^2) = |eta|; beyond t^2 = 1 + 2 eps the penalty is affine and
/// the supremum has a closed form.
template <typename Scalar>
Scalar legendre_radial(Scalar norm_eta, const PenaltySpec& p) {
    using std::sqrt;
    const Scalar eps(p.epsilon);
    if (norm_eta <= Scalar(0)) return Scalar(0);
    if (eps * eps * norm_eta * norm_eta / Scalar(4) >= Scalar(1) + Scalar(2) * eps)
        return eps * norm_eta * norm_eta / Scalar(4) + Scalar(1) / eps + Scalar(1);

    Scalar lo(1);
    Scalar hi = sqrt(Scalar(1) + Scalar(2) * eps);
    while (hi - lo > Scalar(1e-12)) {
        const Scalar mid = (lo + hi) / Scalar(2);
        if (Scalar(2) * mid * psi_eps_prime(mid * mid, p) < norm_eta)
            lo = mid;
        else
            hi = mid;
    }
    const Scalar t = (lo + hi) / Scalar(2);
    return norm_eta * t - psi_eps(t * t, p);
}

inline double legendre(const Point& eta, const PenaltySpec& p) { return legendre_radial(eta.norm(), p); }

/// eta* = 2 psi_eps'(|p|^2) p; zero on the closed dead zone |p| <= 1.
inline Point optimal_control(const Point& grad_u, const PenaltySpec& p) {
    const double g = grad_u.squaredNorm();
    if (g <= 1.0) return Point::Zero();
    return 2.0 * psi_eps_prime(g, p) * grad_u;
}

/// l_eps(eta*) at eta* = optimal_control(grad_u), from the duality identity
/// <p, eta*> - l_eps(eta*) = psi_eps(|p|^2).
inline double control_cost(const Point& grad_u, const PenaltySpec& p) {
    const double g = grad_u.squaredNorm();
    if (g <= 1.0) return 0.0;
    return 2.0 * psi_eps_prime(g, p) * g - psi_eps(g, p);
}

}  // namespace hjb
