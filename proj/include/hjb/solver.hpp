#pragma once

#include "hjb/extension.hpp"
#include "hjb/grid.hpp"
#include "hjb/model.hpp"
#include "hjb/penalty.hpp"

#include <Eigen/SparseCore>

#include <string>
#include <utility>
#include <vector>

namespace hjb {

struct SolverOptions {
    double outer_tolerance = 1e-8;
    int outer_max_iterations = 200;
    double ratio_slack = 0.05;
    int ratio_patience = 3;
    int inner_max_iterations = 200;
    double inner_residual_target = 1e-10;
    double inner_update_floor = 1e-13;
    double inner_exit_residual = 1e-7;
    double linear_tolerance = 1e-9;
    int linear_max_iterations = 500;
};

/// Everything fixed by (spec, model, quadrature) on one grid: the extension,
/// the local operators and the assembled q' Id - L'.
///
/// Every first-order term is differenced against the direction of the
/// compensated drift gamma~: L' (drift gamma~), L (drift gamma) and the
/// gradient inside the compensated nonlocal term. The two operator splits
/// then coincide on the grid up to roundoff.
class Discretization {
public:
    Discretization(ProblemSpec spec, LevyModel model, NonlocalQuadrature quad);

    [[nodiscard]] const ProblemSpec& spec() const { return spec_; }
    [[nodiscard]] const LevyModel& model() const { return model_; }
    [[nodiscard]] const NonlocalQuadrature& quadrature() const { return quad_; }
    [[nodiscard]] const GridPtr& grid() const { return spec_.grid(); }
    [[nodiscard]] const ExtensionOperator& extension() const { return ext_; }
    [[nodiscard]] const LocalOperator& l_prime() const { return l_prime_; }
    [[nodiscard]] const LocalOperator& l_raw() const { return l_raw_; }
    [[nodiscard]] const Upwinding& upwinding() const { return l_prime_.upwinding; }
    /// q' Id - L' on the Interior unknowns.
    [[nodiscard]] const Eigen::SparseMatrix<double>& base_matrix() const { return base_; }

    /// I E(w) at Interior points.
    [[nodiscard]] ScalarField nonlocal(const ScalarField& w) const;
    /// (q' - L' - I E) u - f at Interior points.
    [[nodiscard]] ScalarField linear_residual(const ScalarField& u, const ScalarField& f) const;

private:
    ProblemSpec spec_;
    LevyModel model_;
    NonlocalQuadrature quad_;
    ExtensionOperator ext_;
    LocalOperator l_prime_;
    LocalOperator l_raw_;
    Eigen::SparseMatrix<double> base_;
};

/// The frozen problem q' u - L' u + psi_eps(|Du|^2) = h + I E(w).
struct InnerProblem {
    const Discretization* disc;
    PenaltySpec penalty;
    ScalarField w;
    ScalarField h_tilde;
};

InnerProblem make_inner_problem(const Discretization& disc, const PenaltySpec& penalty, ScalarField w);

struct InnerReport {
    int iterations = 0;
    int dampings = 0;
    std::vector<double> residuals;   // sup norm of the nonlinear residual, per iterate
    double final_residual = 0.0;
};

/// Monotone discrete Hamiltonian at Interior point k:
///   G = sum_a max(D-_a u, -D+_a u, 0)^2,
/// the upwind estimate of |Du|^2 that the scheme penalises.
double discrete_gradient_sq(const ScalarField& u, Index k);

/// q' u - L' u + psi_eps(G) - h_tilde at Interior points.
ScalarField inner_residual(const InnerProblem& prob, const ScalarField& u);

/// Howard policy iteration on the sup form of the penalty term. Each step
/// freezes eta = 2 psi_eps'(G) (upwind gradient) and solves the linear
/// monotone problem with l_eps(eta) as extra source. Throws NoConvergence
/// after the iteration cap or if the exit residual exceeds 1e-7.
ScalarField solve_inner(const InnerProblem& prob, const ScalarField& warm_start, const SolverOptions& opts = {},
                        InnerReport* report = nullptr);

struct BoundCheck {
    std::string name;
    bool passed;
    double value;
    std::string detail;
};

struct SolveReport {
    double epsilon = 0.0;
    double contraction_bound = 0.0;   // 2 A0 nu(B_{R+b/2}) / q'
    int outer_iterations = 0;
    std::vector<double> deltas;       // ||w_{k+1} - w_k|| over the closed ball
    std::vector<double> ratios;       // deltas[k] / deltas[k-1]
    std::vector<InnerReport> inner;
    double fixed_point_gap = 0.0;     // ||solve_inner(u) - u|| at exit
    double seconds = 0.0;
    ScalarField u;

    double gradient_max = 0.0;        // max |Du| (central) over Interior
    double penalty_max_half = 0.0;    // max psi_eps(G) over Interior with |x| <= R/2
    std::vector<BoundCheck> bounds;
};

/// T_eps iteration w_{k+1} = solve_inner(h + I E(w_k)). Throws
/// ContractionViolated when the measured ratio exceeds the contraction bound
/// plus slack for `ratio_patience` consecutive iterations.
std::pair<ScalarField, SolveReport> outer_fixed_point(const Discretization& disc, const PenaltySpec& penalty,
                                                      const ScalarField& w0, const SolverOptions& opts = {});

struct ContinuationResult {
    ScalarField u;
    std::vector<SolveReport> reports;
};

/// Solves along a strictly decreasing eps schedule, warm-starting each solve
/// from the previous one. Errors are rethrown with the eps that raised them.
ContinuationResult continuation(const Discretization& disc, const std::vector<double>& eps_schedule,
                                Blend blend = Blend::Piecewise, const SolverOptions& opts = {},
                                const ScalarField* w0 = nullptr);

/// eps_k = 2^-k, k = 1..count.
std::vector<double> default_schedule(int count = 8);

struct LinearReport {
    int iterations = 0;
    double residual = 0.0;
};

/// eta solving (q' - L' - I E) eta = h, by the same fixed point on the
/// nonlocal term with one sparse LU of q' - L'.
ScalarField solve_linear(const Discretization& disc, const SolverOptions& opts = {}, LinearReport* report = nullptr);

struct BarrierResult {
    ScalarField eta1;
    double K6 = 0.0;
    double min_margin = 0.0;   // min over Interior of (q - L - I') eta1 - C0 (1 + |x|^2)
};

/// eta1 = exp(K6 R^2) - exp(K6 |x|^2) on the Interior, zero on Boundary,
/// extended by E on the ring. Doubling search over K6 = 1, 2, ..., 2^10.
BarrierResult barrier(const Discretization& disc);

/// (q - L - I' E) f at Interior points, with the compensator gradient taken
/// with the solver's upwinding.
ScalarField compensated_operator(const Discretization& disc, const ScalarField& f);
/// (q' - L' - I E) f at Interior points.
ScalarField shifted_operator(const Discretization& disc, const ScalarField& f);

struct HjbResiduals {
    ScalarField r1;   // q' u - L' u - I E(u) - h
    ScalarField r2;   // G(u) - 1 with the upwind G the scheme penalizes
    ScalarField r2_central;  // |Du|^2 - 1 with the centred gradient
};
HjbResiduals hjb_residuals(const ScalarField& u, const Discretization& disc);

/// Fills gradient_max, penalty_max_half for a finished report.
void measure_report(SolveReport& report, const Discretization& disc, Blend blend);

/// Per-eps checks: nonnegativity, K5 dominance u <= eta, barrier dominance
/// u <= eta1.
void check_bounds(SolveReport& report, const ScalarField& eta, const ScalarField& eta1);

/// (max - min) / max of the values; 0 when all are zero.
double relative_spread(const std::vector<double>& values);

}  // namespace hjb
