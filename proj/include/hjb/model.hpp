#pragma once

#include "hjb/grid.hpp"
#include "hjb/quadrature.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace hjb {

// Jump density families. Each is a finite measure nu(dz) = kappa(z) dz on
// R^2 \ {0}; `density` is the constant factor in front of the profile.

struct NoJumps {};

/// kappa = density on r_inner <= |z| <= r_outer.
struct UniformAnnulus {
    double density;
    double r_inner;
    double r_outer;
};

/// kappa = density * exp(-|z - mean|^2 / (2 std^2)) on |z| <= truncation.
struct TruncatedGaussian {
    double density;
    Point mean;
    double std_dev;
    double truncation;
};

/// kappa = density * exp(-|z| / length), cut where the relative tail mass
/// drops below 1e-8.
struct RadialExponential {
    double density;
    double length;
};

class JumpDensity {
public:
    using Family = std::variant<NoJumps, UniformAnnulus, TruncatedGaussian, RadialExponential>;

    JumpDensity() = default;
    JumpDensity(Family f) : family_(std::move(f)) {}  // NOLINT(google-explicit-constructor)
    template <typename F>
        requires std::is_constructible_v<Family, F> && (!std::is_same_v<std::decay_t<F>, Family>)
    JumpDensity(F f) : family_(std::move(f)) {}  // NOLINT(google-explicit-constructor)

    [[nodiscard]] double operator()(const Point& z) const;
    [[nodiscard]] bool empty() const { return std::holds_alternative<NoJumps>(family_); }
    [[nodiscard]] double support_radius() const;
    /// Radii where the density or its derivatives are discontinuous.
    [[nodiscard]] std::vector<double> breakpoints() const;
    /// Upper bound of kappa, for rejection sampling.
    [[nodiscard]] double upper_bound() const;
    [[nodiscard]] JumpDensity scaled(double factor) const;
    [[nodiscard]] std::string name() const;
    [[nodiscard]] const Family& family() const { return family_; }

private:
    Family family_ = NoJumps{};
};

/// Density scale giving an annulus of total mass `mass`.
double annulus_density_for_mass(double mass, double r_inner, double r_outer);

struct QuadratureOptions {
    PolarResolution resolution{};
    double relative_tolerance = 1e-8;
};

struct RawLevyParams {
    Point gamma = Point::Zero();
    Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity();
    JumpDensity kappa;
    QuadratureOptions quadrature{};
};

struct LevyModel {
    Point gamma;
    Eigen::Matrix2d sigma;
    JumpDensity kappa;
    QuadratureOptions quadrature;

    double nu0 = 0.0;          // nu(R^*)
    double nu1 = 0.0;          // int |z| nu(dz)
    Point first_moment;        // int z nu(dz)
    Point gamma_tilde;         // gamma - first_moment
    double jump_support_radius = 0.0;
    double nu0_error = 0.0;    // |rule - doubled rule|
    double nu1_error = 0.0;
    double theta = 0.0;        // smallest eigenvalue of sigma
    double Theta = 0.0;        // largest eigenvalue of sigma
};

/// Computes the derived jump quantities with the polar product rule that the
/// nonlocal quadrature also uses. Throws NonPositiveDefinite for an
/// indefinite sigma and DivergentMeasure when the rule and its doubling
/// disagree beyond the relative tolerance.
LevyModel build_model(const RawLevyParams& raw);

/// nu(B_radius(0)) by the polar rule with an extra breakpoint at `radius`.
double ball_mass(const LevyModel& model, double radius);

// Source families for h.

struct ConstantSource {
    double value;
};
/// h = c0 + c2 |x|^2
struct QuadraticSource {
    double c0;
    double c2;
};
/// h = base + amplitude * exp(-|x - center|^2 / (2 width^2))
struct BumpSource {
    double base;
    double amplitude;
    Point center;
    double width;
};
using SourceTerm = std::variant<ConstantSource, QuadraticSource, BumpSource>;

struct SourceJet {
    double value;
    Point grad;
    Eigen::Matrix2d hess;
};
SourceJet evaluate_source(const SourceTerm& h, const Point& x);
std::string source_name(const SourceTerm& h);

struct ProblemParams {
    double R = 1.0;
    double b = 0.2;
    double q = 5.0;
    double A0 = 1.5;
    int d = 2;
    SourceTerm source = ConstantSource{1.0};
    /// Declared bound on ||h||_{C^2}; when absent the computed norm is used.
    std::optional<double> C0;
};

struct ProblemSpec {
    double R;
    double b;
    double q;
    double q_prime;          // q + nu0
    double A0;
    int d;
    SourceTerm source;
    ScalarField h;           // sampled on the closed ball and the ring
    double C0;               // declared (or computed) bound on ||h||_{C^2}
    double h_c2_norm;        // computed sum of sup norms of h and its derivatives
    double theta;
    double Theta;
    double nu_ball;          // nu(B_{R + b/2}(0))

    [[nodiscard]] const GridPtr& grid() const { return h.grid; }
    /// 2 A0 nu(B_{R+b/2}) / q'
    [[nodiscard]] double contraction_factor() const { return 2.0 * A0 * nu_ball / q_prime; }
};

ProblemSpec build_problem(const ProblemParams& params, const LevyModel& model, GridPtr grid);

struct HypothesisCheck {
    std::string name;
    bool passed;
    double margin;
    std::string detail;
};

struct ValidationReport {
    std::vector<HypothesisCheck> checks;

    [[nodiscard]] bool all_passed() const;
    [[nodiscard]] const HypothesisCheck& find(const std::string& name) const;
};

/// Reports (H1)-(H4); never throws on a failed hypothesis.
ValidationReport validate_hypotheses(const LevyModel& model, const ProblemSpec& spec);

}  // namespace hjb
