#include "hjb/model.hpp"

#include "hjb/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace hjb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kTailFraction = 1e-8;

// Smallest x with exp(-x) (1 + x) <= kTailFraction.
double exponential_cutoff() {
    double lo = 0.0;
    double hi = 100.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (std::exp(-mid) * (1.0 + mid) > kTailFraction)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

}  // namespace

double JumpDensity::operator()(const Point& z) const {
    return std::visit(
        overloaded{
            [](const NoJumps&) { return 0.0; },
            [&](const UniformAnnulus& a) {
                const double r = z.norm();
                return (r >= a.r_inner && r <= a.r_outer) ? a.density : 0.0;
            },
            [&](const TruncatedGaussian& g) {
                if (z.norm() > g.truncation) return 0.0;
                return g.density * std::exp(-(z - g.mean).squaredNorm() / (2.0 * g.std_dev * g.std_dev));
            },
            [&](const RadialExponential& e) {
                const double r = z.norm();
                if (r > exponential_cutoff() * e.length) return 0.0;
                return e.density * std::exp(-r / e.length);
            },
        },
        family_);
}

double JumpDensity::support_radius() const {
    return std::visit(overloaded{
                          [](const NoJumps&) { return 0.0; },
                          [](const UniformAnnulus& a) { return a.r_outer; },
                          [](const TruncatedGaussian& g) { return g.truncation; },
                          [](const RadialExponential& e) { return exponential_cutoff() * e.length; },
                      },
                      family_);
}

std::vector<double> JumpDensity::breakpoints() const {
    return std::visit(overloaded{
                          [](const NoJumps&) { return std::vector<double>{}; },
                          [](const UniformAnnulus& a) { return std::vector<double>{a.r_inner, a.r_outer}; },
                          [](const TruncatedGaussian& g) { return std::vector<double>{g.truncation}; },
                          [](const RadialExponential&) { return std::vector<double>{}; },
                      },
                      family_);
}

double JumpDensity::upper_bound() const {
    return std::visit(overloaded{
                          [](const NoJumps&) { return 0.0; },
                          [](const UniformAnnulus& a) { return a.density; },
                          [](const TruncatedGaussian& g) { return g.density; },
                          [](const RadialExponential& e) { return e.density; },
                      },
                      family_);
}

JumpDensity JumpDensity::scaled(double factor) const {
    return std::visit(overloaded{
                          [](const NoJumps& n) -> JumpDensity { return n; },
                          [&](UniformAnnulus a) -> JumpDensity {
                              a.density *= factor;
                              return a;
                          },
                          [&](TruncatedGaussian g) -> JumpDensity {
                              g.density *= factor;
                              return g;
                          },
                          [&](RadialExponential e) -> JumpDensity {
                              e.density *= factor;
                              return e;
                          },
                      },
                      family_);
}

std::string JumpDensity::name() const {
    return std::visit(overloaded{
                          [](const NoJumps&) { return std::string("none"); },
                          [](const UniformAnnulus&) { return std::string("uniform_annulus"); },
                          [](const TruncatedGaussian&) { return std::string("truncated_gaussian"); },
                          [](const RadialExponential&) { return std::string("radial_exponential"); },
                      },
                      family_);
}

double annulus_density_for_mass(double mass, double r_inner, double r_outer) {
    return mass / (std::numbers::pi * (r_outer * r_outer - r_inner * r_inner));
}

namespace {

struct Moments {
    double mass = 0.0;
    double abs_first = 0.0;
    Point first = Point::Zero();
};

Moments integrate_moments(const JumpDensity& kappa, const std::vector<double>& breaks, double outer,
                          PolarResolution res) {
    const PolarRule rule = polar_rule(outer, breaks, res);
    Moments m;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        const Point& z = rule.nodes[j];
        const double k = kappa(z);
        if (k < 0.0) throw Error(ErrorKind::InvalidConfig, "jump density is negative");
        const double w = rule.weights[j] * k;
        m.mass += w;
        m.abs_first += w * z.norm();
        m.first += w * z;
    }
    return m;
}

bool close(double a, double b, double rel_tol) {
    return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b)) + 1e-300;
}

}  // namespace

LevyModel build_model(const RawLevyParams& raw) {
    if ((raw.sigma - raw.sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw Error(ErrorKind::InvalidConfig, "sigma must be symmetric");

    LevyModel model;
    model.gamma = raw.gamma;
    model.sigma = raw.sigma;
    model.kappa = raw.kappa;
    model.quadrature = raw.quadrature;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(raw.sigma);
    model.theta = es.eigenvalues().minCoeff();
    model.Theta = es.eigenvalues().maxCoeff();
    if (!(model.theta > 0.0)) {
        std::ostringstream os;
        os << "sigma has eigenvalue " << model.theta;
        throw Error(ErrorKind::NonPositiveDefinite, os.str());
    }

    model.first_moment = Point::Zero();
    model.gamma_tilde = raw.gamma;
    if (raw.kappa.empty()) return model;

    model.jump_support_radius = raw.kappa.support_radius();
    const auto breaks = raw.kappa.breakpoints();
    const PolarResolution base = raw.quadrature.resolution;
    const PolarResolution fine{2 * base.radial, 2 * base.angular};
    const Moments m = integrate_moments(raw.kappa, breaks, model.jump_support_radius, base);
    const Moments mf = integrate_moments(raw.kappa, breaks, model.jump_support_radius, fine);

    model.nu0 = m.mass;
    model.nu1 = m.abs_first;
    model.first_moment = m.first;
    model.gamma_tilde = raw.gamma - m.first;
    model.nu0_error = std::abs(m.mass - mf.mass);
    model.nu1_error = std::abs(m.abs_first - mf.abs_first);

    const double tol = raw.quadrature.relative_tolerance;
    if (!std::isfinite(m.mass) || !std::isfinite(m.abs_first) || !close(m.mass, mf.mass, tol) ||
        !close(m.abs_first, mf.abs_first, tol)) {
        std::ostringstream os;
        os << "quadrature of kappa did not converge: nu0 " << m.mass << " vs " << mf.mass << ", nu1 "
           << m.abs_first << " vs " << mf.abs_first;
        throw Error(ErrorKind::DivergentMeasure, os.str());
    }
    return model;
}

double ball_mass(const LevyModel& model, double radius) {
    if (model.kappa.empty()) return 0.0;
    auto breaks = model.kappa.breakpoints();
    breaks.push_back(radius);
    const PolarRule rule = polar_rule(model.jump_support_radius, breaks, model.quadrature.resolution);
    double mass = 0.0;
    for (std::size_t j = 0; j < rule.nodes.size(); ++j)
        if (rule.nodes[j].norm() < radius) mass += rule.weights[j] * model.kappa(rule.nodes[j]);
    return mass;
}

SourceJet evaluate_source(const SourceTerm& h, const Point& x) {
    return std::visit(overloaded{
                          [](const ConstantSource& c) {
                              return SourceJet{c.value, Point::Zero(), Eigen::Matrix2d::Zero()};
                          },
                          [&](const QuadraticSource& s) {
                              return SourceJet{s.c0 + s.c2 * x.squaredNorm(), 2.0 * s.c2 * x,
                                               2.0 * s.c2 * Eigen::Matrix2d::Identity()};
                          },
                          [&](const BumpSource& s) {
                              const Point y = x - s.center;
                              const double w2 = s.width * s.width;
                              const double g = s.amplitude * std::exp(-y.squaredNorm() / (2.0 * w2));
                              const Eigen::Matrix2d hess =
                                  g * (y * y.transpose() / (w2 * w2) - Eigen::Matrix2d::Identity() / w2);
                              return SourceJet{s.base + g, Point(-g * y / w2), hess};
                          },
                      },
                      h);
}

std::string source_name(const SourceTerm& h) {
    return std::visit(overloaded{
                          [](const ConstantSource&) { return std::string("constant"); },
                          [](const QuadraticSource&) { return std::string("quadratic"); },
                          [](const BumpSource&) { return std::string("bump"); },
                      },
                      h);
}

ProblemSpec build_problem(const ProblemParams& params, const LevyModel& model, GridPtr grid) {
    if (params.d != 2) throw Error(ErrorKind::InvalidConfig, "only d = 2 is supported");
    if (!(params.q > 0.0)) throw Error(ErrorKind::InvalidConfig, "discount q must be positive");
    if (grid->radius() != params.R || grid->margin() != params.b)
        throw Error(ErrorKind::InvalidConfig, "grid does not match R and b");

    ScalarField h(grid);
    double sup_h = 0.0;
    std::array<double, 5> sup_d{};  // d1, d2, d11, d12, d22
    for (Index k = 0; k < grid->size(); ++k) {
        const PointClass c = grid->mask(k);
        if (c == PointClass::Outside) continue;
        const SourceJet jet = evaluate_source(params.source, grid->point(k));
        h[k] = jet.value;
        if (!grid->in_closed_ball(k)) continue;
        sup_h = std::max(sup_h, std::abs(jet.value));
        sup_d[0] = std::max(sup_d[0], std::abs(jet.grad[0]));
        sup_d[1] = std::max(sup_d[1], std::abs(jet.grad[1]));
        sup_d[2] = std::max(sup_d[2], std::abs(jet.hess(0, 0)));
        sup_d[3] = std::max(sup_d[3], std::abs(jet.hess(0, 1)));
        sup_d[4] = std::max(sup_d[4], std::abs(jet.hess(1, 1)));
    }
    double norm = sup_h;
    for (double s : sup_d) norm += s;

    ProblemSpec spec{
        .R = params.R,
        .b = params.b,
        .q = params.q,
        .q_prime = params.q + model.nu0,
        .A0 = params.A0,
        .d = params.d,
        .source = params.source,
        .h = std::move(h),
        .C0 = params.C0.value_or(norm),
        .h_c2_norm = norm,
        .theta = model.theta,
        .Theta = model.Theta,
        .nu_ball = ball_mass(model, params.R + 0.5 * params.b),
    };
    return spec;
}

bool ValidationReport::all_passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

const HypothesisCheck& ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw Error(ErrorKind::InvalidConfig, "no hypothesis named " + name);
}

ValidationReport validate_hypotheses(const LevyModel& model, const ProblemSpec& spec) {
    ValidationReport report;
    const Grid& g = *spec.grid();

    double min_h = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < g.size(); ++k)
        if (g.in_closed_ball(k)) min_h = std::min(min_h, spec.h[k]);
    {
        std::ostringstream os;
        os << "min h = " << min_h << ", ||h||_C2 = " << spec.h_c2_norm << ", C0 = " << spec.C0;
        const bool ok = min_h >= 0.0 && spec.h_c2_norm <= spec.C0 * (1.0 + 1e-12);
        report.checks.push_back({"H1", ok, std::min(min_h, spec.C0 - spec.h_c2_norm), os.str()});
    }
    {
        std::ostringstream os;
        os << "nu0 = " << model.nu0 << ", nu1 = " << model.nu1;
        const bool ok = std::isfinite(model.nu0) && std::isfinite(model.nu1) && model.nu0 >= 0.0;
        report.checks.push_back({"H2", ok, model.nu0, os.str()});
    }
    {
        std::ostringstream os;
        os << "theta = " << model.theta << ", Theta = " << model.Theta;
        report.checks.push_back({"H3", model.theta > 0.0, model.theta, os.str()});
    }
    {
        const double margin = spec.q_prime - 2.0 * spec.A0 * spec.nu_ball;
        std::ostringstream os;
        os << "q' = " << spec.q_prime << ", 2 A0 nu(B_{R+b/2}) = " << 2.0 * spec.A0 * spec.nu_ball
           << ", A0 = " << spec.A0;
        const bool ok = margin > 0.0 && spec.A0 > 1.0 && spec.A0 < 2.0;
        report.checks.push_back({"H4", ok, margin, os.str()});
    }
    return report;
}

}  // namespace hjb
