#include "hjb/solver.hpp"

#include "hjb/error.hpp"

#include <Eigen/SparseLU>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace hjb {

Discretization::Discretization(ProblemSpec spec, LevyModel model, NonlocalQuadrature quad)
    : spec_(std::move(spec)),
      model_(std::move(model)),
      quad_(std::move(quad)),
      ext_(spec_.R, spec_.b, spec_.A0) {
    const Upwinding up = Upwinding::against(model_.gamma_tilde);
    l_prime_ = LocalOperator{model_.sigma, model_.gamma_tilde, up};
    l_raw_ = LocalOperator{model_.sigma, model_.gamma, up};
    base_ = assemble_shifted_operator(*grid(), l_prime_, spec_.q_prime);
    base_.makeCompressed();
}

ScalarField Discretization::nonlocal(const ScalarField& w) const {
    if (quad_.empty()) return ScalarField(w.grid);
    return nonlocal_apply(ext_.extend(w), quad_);
}

ScalarField Discretization::linear_residual(const ScalarField& u, const ScalarField& f) const {
    ScalarField out = shifted_operator(*this, u);
    for (Index k : grid()->interior()) out[k] -= f[k];
    return out;
}

ScalarField shifted_operator(const Discretization& disc, const ScalarField& f) {
    const ScalarField lf = apply_local_operator(disc.extension().extend(f), disc.l_prime());
    const ScalarField nl = disc.nonlocal(f);
    ScalarField out(disc.grid());
    const double qp = disc.spec().q_prime;
    for (Index k : disc.grid()->interior()) out[k] = qp * f[k] - lf[k] - nl[k];
    return out;
}

ScalarField compensated_operator(const Discretization& disc, const ScalarField& f) {
    const ScalarField f_ext = disc.extension().extend(f);
    const ScalarField lf = apply_local_operator(f_ext, disc.l_raw());
    ScalarField out(disc.grid());
    const double q = disc.spec().q;
    if (disc.quadrature().empty()) {
        for (Index k : disc.grid()->interior()) out[k] = q * f[k] - lf[k];
        return out;
    }
    const VectorField grad = upwind_gradient(f_ext, disc.upwinding());
    const ScalarField comp = nonlocal_compensated(f_ext, grad, disc.quadrature());
    for (Index k : disc.grid()->interior()) out[k] = q * f[k] - lf[k] - comp[k];
    return out;
}

InnerProblem make_inner_problem(const Discretization& disc, const PenaltySpec& penalty, ScalarField w) {
    InnerProblem prob{&disc, penalty, std::move(w), ScalarField(disc.grid())};
    const ScalarField nl = disc.nonlocal(prob.w);
    const ScalarField& h = disc.spec().h;
    for (Index k : disc.grid()->interior()) prob.h_tilde[k] = h[k] + nl[k];
    return prob;
}

namespace {

struct AxisDiffs {
    double back;   // D-_a u
    double fwd;    // D+_a u
};

AxisDiffs axis_diffs(const ScalarField& u, Index k, int axis) {
    const Grid& g = *u.grid;
    const Index step = axis == 0 ? g.n() : 1;
    return {(u[k] - u[k - step]) / g.dx(), (u[k + step] - u[k]) / g.dx()};
}

double upwind_slope(const AxisDiffs& d) { return std::max({d.back, -d.fwd, 0.0}); }

// Signed control per Interior unknown: eta_a > 0 is paired with the backward
// difference, eta_a < 0 with the forward one.
struct Policy {
    Eigen::MatrixX2d eta;
    Eigen::VectorXd cost;
};

Policy greedy_policy(const ScalarField& u, const PenaltySpec& pen) {
    const Grid& g = *u.grid;
    Policy p{Eigen::MatrixX2d::Zero(g.interior_count(), 2), Eigen::VectorXd::Zero(g.interior_count())};
    for (Index row = 0; row < g.interior_count(); ++row) {
        const Index k = g.interior()[static_cast<std::size_t>(row)];
        const AxisDiffs dx = axis_diffs(u, k, 0);
        const AxisDiffs dy = axis_diffs(u, k, 1);
        const double G = std::pow(upwind_slope(dx), 2) + std::pow(upwind_slope(dy), 2);
        if (G <= 1.0) continue;
        const double c = 2.0 * psi_eps_prime(G, pen);
        const AxisDiffs d[2] = {dx, dy};
        for (int a = 0; a < 2; ++a) {
            if (d[a].back >= -d[a].fwd && d[a].back > 0.0)
                p.eta(row, a) = c * d[a].back;
            else if (-d[a].fwd > 0.0)
                p.eta(row, a) = c * d[a].fwd;
        }
        p.cost[row] = c * G - psi_eps(G, pen);
    }
    return p;
}

Policy blend_policies(const Policy& a, const Policy& b, const PenaltySpec& pen) {
    Policy p{0.5 * (a.eta + b.eta), Eigen::VectorXd::Zero(a.cost.size())};
    for (Index row = 0; row < p.eta.rows(); ++row) p.cost[row] = legendre(Point(p.eta.row(row).transpose()), pen);
    return p;
}

Eigen::SparseMatrix<double> policy_matrix(const Discretization& disc, const Policy& p) {
    const Grid& g = *disc.grid();
    Eigen::SparseMatrix<double> m = disc.base_matrix();
    const double inv = 1.0 / g.dx();
    for (Index row = 0; row < g.interior_count(); ++row) {
        const Index k = g.interior()[static_cast<std::size_t>(row)];
        for (int a = 0; a < 2; ++a) {
            const double e = p.eta(row, a);
            if (e == 0.0) continue;
            const Index step = a == 0 ? g.n() : 1;
            const Index nb = e > 0.0 ? k - step : k + step;
            m.coeffRef(row, row) += std::abs(e) * inv;
            const Index col = g.unknown(nb);
            if (col >= 0) m.coeffRef(row, col) -= std::abs(e) * inv;
        }
    }
    return m;
}

double sup_interior(const ScalarField& f) {
    double m = 0.0;
    for (Index k : f.grid->interior()) m = std::max(m, std::abs(f[k]));
    return m;
}

ScalarField pinned(const ScalarField& f) { return ScalarField::from_interior(f.grid, f.interior_values()); }

}  // namespace

double discrete_gradient_sq(const ScalarField& u, Index k) {
    return std::pow(upwind_slope(axis_diffs(u, k, 0)), 2) + std::pow(upwind_slope(axis_diffs(u, k, 1)), 2);
}

ScalarField inner_residual(const InnerProblem& prob, const ScalarField& u) {
    const Discretization& disc = *prob.disc;
    const Eigen::VectorXd au = disc.base_matrix() * u.interior_values();
    ScalarField out = ScalarField::from_interior(disc.grid(), au);
    for (Index k : disc.grid()->interior())
        out[k] += psi_eps(discrete_gradient_sq(u, k), prob.penalty) - prob.h_tilde[k];
    return out;
}

ScalarField solve_inner(const InnerProblem& prob, const ScalarField& warm_start, const SolverOptions& opts,
                        InnerReport* report) {
    const Discretization& disc = *prob.disc;
    const GridPtr& grid = disc.grid();
    InnerReport local;
    InnerReport& rep = report ? *report : local;
    rep = InnerReport{};

    ScalarField u = pinned(warm_start);
    double res = sup_interior(inner_residual(prob, u));
    rep.residuals.push_back(res);

    Eigen::VectorXd rhs_base = prob.h_tilde.interior_values();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool analysed = false;
    auto solve_policy = [&](const Policy& p) {
        const Eigen::SparseMatrix<double> m = policy_matrix(disc, p);
        if (!analysed) {
            lu.analyzePattern(m);
            analysed = true;
        }
        lu.factorize(m);
        if (lu.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "policy matrix factorisation failed");
        const Eigen::VectorXd x = lu.solve(rhs_base + p.cost);
        return ScalarField::from_interior(grid, x);
    };

    std::optional<Policy> previous;
    while (res > opts.inner_residual_target) {
        if (rep.iterations >= opts.inner_max_iterations) {
            std::ostringstream os;
            os << "policy iteration hit " << opts.inner_max_iterations << " iterations, residual " << res;
            throw Error(ErrorKind::NoConvergence, os.str());
        }
        Policy p = greedy_policy(u, prob.penalty);
        ScalarField next = solve_policy(p);
        double next_res = sup_interior(inner_residual(prob, next));
        if (next_res > res && previous) {
            p = blend_policies(*previous, p, prob.penalty);
            next = solve_policy(p);
            next_res = sup_interior(inner_residual(prob, next));
            ++rep.dampings;
        }
        const double update = ball_sup_distance(next, u);
        u = std::move(next);
        res = next_res;
        previous = std::move(p);
        ++rep.iterations;
        rep.residuals.push_back(res);
        spdlog::trace("policy iteration {}: residual {:.3e}, update {:.3e}", rep.iterations, res, update);
        if (update <= opts.inner_update_floor) break;
    }
    rep.final_residual = res;
    if (res > opts.inner_exit_residual) {
        std::ostringstream os;
        os << "policy iteration stalled with residual " << res;
        throw Error(ErrorKind::NoConvergence, os.str());
    }
    return u;
}

std::pair<ScalarField, SolveReport> outer_fixed_point(const Discretization& disc, const PenaltySpec& penalty,
                                                      const ScalarField& w0, const SolverOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep;
    rep.epsilon = penalty.epsilon;
    rep.contraction_bound = disc.spec().contraction_factor();

    ScalarField w = pinned(w0);
    int strikes = 0;
    for (int k = 1;; ++k) {
        InnerReport ir;
        const InnerProblem prob = make_inner_problem(disc, penalty, w);
        ScalarField u = solve_inner(prob, w, opts, &ir);
        rep.inner.push_back(std::move(ir));
        const double delta = ball_sup_distance(u, w);
        if (!rep.deltas.empty() && rep.deltas.back() > 0.0) {
            const double ratio = delta / rep.deltas.back();
            rep.ratios.push_back(ratio);
            strikes = ratio > rep.contraction_bound + opts.ratio_slack ? strikes + 1 : 0;
            if (strikes >= opts.ratio_patience) {
                std::ostringstream os;
                os << "measured ratio " << ratio << " exceeds " << rep.contraction_bound << " + "
                   << opts.ratio_slack << " for " << strikes << " iterations";
                throw Error(ErrorKind::ContractionViolated, os.str());
            }
        }
        rep.deltas.push_back(delta);
        w = std::move(u);
        rep.outer_iterations = k;
        spdlog::debug("eps {:.5g} outer {}: delta {:.3e}, {} policy steps", penalty.epsilon, k, delta,
                      rep.inner.back().iterations);
        if (delta <= opts.outer_tolerance || disc.quadrature().empty()) break;
        if (k >= opts.outer_max_iterations) {
            std::ostringstream os;
            os << "outer iteration hit " << k << " iterations, delta " << delta;
            throw Error(ErrorKind::NoConvergence, os.str());
        }
    }

    const InnerProblem check = make_inner_problem(disc, penalty, w);
    rep.fixed_point_gap = ball_sup_distance(solve_inner(check, w, opts), w);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.u = w;
    return {std::move(w), std::move(rep)};
}

std::vector<double> default_schedule(int count) {
    std::vector<double> s;
    for (int k = 1; k <= count; ++k) s.push_back(std::ldexp(1.0, -k));
    return s;
}

ContinuationResult continuation(const Discretization& disc, const std::vector<double>& eps_schedule, Blend blend,
                                const SolverOptions& opts, const ScalarField* w0) {
    if (eps_schedule.empty()) throw Error(ErrorKind::InvalidConfig, "empty eps schedule");
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
        const double e = eps_schedule[i];
        if (!(e > 0.0 && e < 1.0) || (i > 0 && !(e < eps_schedule[i - 1])))
            throw Error(ErrorKind::InvalidConfig, "eps schedule must be strictly decreasing in (0, 1)");
    }
    ContinuationResult out;
    out.u = w0 ? *w0 : ScalarField(disc.grid());
    for (double eps : eps_schedule) {
        const PenaltySpec pen{eps, blend};
        try {
            auto [u, rep] = outer_fixed_point(disc, pen, out.u, opts);
            measure_report(rep, disc, blend);
            spdlog::info("eps {:.5g}: {} outer iterations, max ratio {:.3f}, max |Du| {:.4f}, {:.1f} s", eps,
                         rep.outer_iterations,
                         rep.ratios.empty() ? 0.0 : *std::max_element(rep.ratios.begin(), rep.ratios.end()),
                         rep.gradient_max, rep.seconds);
            out.u = std::move(u);
            out.reports.push_back(std::move(rep));
        } catch (const Error& e) {
            std::ostringstream os;
            os << "eps = " << eps << ": " << e.what();
            throw Error(e.kind(), os.str());
        }
    }
    return out;
}

ScalarField solve_linear(const Discretization& disc, const SolverOptions& opts, LinearReport* report) {
    const GridPtr& grid = disc.grid();
    const ScalarField& h = disc.spec().h;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(disc.base_matrix());
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::SingularSystem, "q' - L' is singular");

    ScalarField eta(grid);
    LinearReport local;
    LinearReport& rep = report ? *report : local;
    rep = LinearReport{};
    rep.residual = sup_interior(disc.linear_residual(eta, h));
    while (rep.residual > opts.linear_tolerance) {
        if (rep.iterations >= opts.linear_max_iterations) {
            std::ostringstream os;
            os << "linear fixed point stalled with residual " << rep.residual;
            throw Error(ErrorKind::SingularSystem, os.str());
        }
        const ScalarField nl = disc.nonlocal(eta);
        Eigen::VectorXd rhs = h.interior_values() + nl.interior_values();
        eta = ScalarField::from_interior(grid, lu.solve(rhs));
        rep.residual = sup_interior(disc.linear_residual(eta, h));
        ++rep.iterations;
    }
    return eta;
}

BarrierResult barrier(const Discretization& disc) {
    const ProblemSpec& spec = disc.spec();
    const Grid& g = *disc.grid();
    const double R2 = spec.R * spec.R;
    double best = -std::numeric_limits<double>::infinity();
    for (double K = 1.0; K <= 1024.0; K *= 2.0) {
        if (K * R2 > 700.0) break;
        ScalarField eta1(disc.grid());
        for (Index k : g.interior()) eta1[k] = std::exp(K * R2) - std::exp(K * g.point(k).squaredNorm());
        const ScalarField lhs = compensated_operator(disc, eta1);
        double margin = std::numeric_limits<double>::infinity();
        for (Index k : g.interior())
            margin = std::min(margin, lhs[k] - spec.C0 * (1.0 + g.point(k).squaredNorm()));
        spdlog::debug("barrier K6 = {}: min margin {:.4e}", K, margin);
        best = std::max(best, margin);
        if (margin >= 0.0) return {disc.extension().extend(eta1), K, margin};
    }
    std::ostringstream os;
    os << "no K6 <= 1024 gives a nonnegative margin (best " << best << ")";
    throw Error(ErrorKind::BarrierNotFound, os.str());
}

HjbResiduals hjb_residuals(const ScalarField& u, const Discretization& disc) {
    HjbResiduals out{disc.linear_residual(u, disc.spec().h), ScalarField(disc.grid()), ScalarField(disc.grid())};
    const VectorField grad = gradient(u);
    for (Index k : disc.grid()->interior()) {
        out.r2[k] = discrete_gradient_sq(u, k) - 1.0;
        out.r2_central[k] = grad.at(k).squaredNorm() - 1.0;
    }
    return out;
}

void measure_report(SolveReport& report, const Discretization& disc, Blend blend) {
    const Grid& g = *disc.grid();
    const VectorField grad = gradient(report.u);
    const PenaltySpec pen{report.epsilon, blend};
    report.gradient_max = 0.0;
    report.penalty_max_half = 0.0;
    for (Index k : g.interior()) {
        report.gradient_max = std::max(report.gradient_max, grad.at(k).norm());
        if (g.point(k).norm() <= 0.5 * g.radius())
            report.penalty_max_half =
                std::max(report.penalty_max_half, psi_eps(discrete_gradient_sq(report.u, k), pen));
    }
}

void check_bounds(SolveReport& report, const ScalarField& eta, const ScalarField& eta1) {
    const Grid& g = *report.u.grid;
    double min_u = std::numeric_limits<double>::infinity();
    double over_eta = -std::numeric_limits<double>::infinity();
    double over_eta1 = -std::numeric_limits<double>::infinity();
    for (Index k = 0; k < g.size(); ++k) {
        if (!g.in_closed_ball(k)) continue;
        min_u = std::min(min_u, report.u[k]);
        over_eta = std::max(over_eta, report.u[k] - eta[k]);
        over_eta1 = std::max(over_eta1, report.u[k] - eta1[k]);
    }
    report.bounds.clear();
    report.bounds.push_back({"nonnegativity", min_u >= -1e-9, min_u, "min u over the closed ball"});
    report.bounds.push_back({"k5_dominance", over_eta <= 1e-7, over_eta, "max (u - eta) over the closed ball"});
    report.bounds.push_back(
        {"barrier_dominance", over_eta1 <= 1e-7, over_eta1, "max (u - eta1) over the closed ball"});
}

double relative_spread(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*hi <= 0.0) return 0.0;
    return (*hi - *lo) / *hi;
}

}  // namespace hjb
