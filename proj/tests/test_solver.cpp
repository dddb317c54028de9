#include "hjb/error.hpp"
#include "hjb/solver.hpp"

#include "radial_ode.hpp"
#include "support.hpp"

#include <Eigen/SparseLU>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace hjb;
using hjb::testing::plain_config;
using hjb::testing::small_reference;

namespace {

double sup_interior(const ScalarField& f) {
    double s = 0.0;
    for (Index k : f.grid->interior()) s = std::max(s, std::abs(f[k]));
    return s;
}

ScalarField constant_field(const GridPtr& g, double c) {
    ScalarField f(g);
    for (Index k : g->interior()) f[k] = c;
    return f;
}

ErrorKind kind_of(auto&& f, std::string* message = nullptr) {
    try {
        f();
    } catch (const Error& e) {
        if (message) *message = e.what();
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::InvalidConfig;
}

// Solve of (q' - L') u = f on the Interior, the penalty-free inner problem.
ScalarField linear_inner(const Discretization& d, const ScalarField& f) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(d.base_matrix());
    return ScalarField::from_interior(d.grid(), lu.solve(f.interior_values()));
}

}  // namespace

TEST(SolveLinear, ZeroSource) {
    const Problem p = prepare(plain_config(5.0, ConstantSource{0.0}, 33));
    EXPECT_EQ(solve_linear(*p.disc).ball_sup_norm(), 0.0);
}

TEST(SolveLinear, ResidualOnReference) {
    const Problem p = small_reference(65);
    LinearReport rep;
    const ScalarField eta = solve_linear(*p.disc, {}, &rep);
    EXPECT_LE(rep.residual, 1e-9);
    ScalarField r = shifted_operator(*p.disc, eta);
    for (Index k : eta.grid->interior()) r[k] -= p.spec.h[k];
    EXPECT_LE(sup_interior(r), 1e-9);
    for (Index k = 0; k < eta.grid->size(); ++k)
        if (eta.grid->mask(k) == PointClass::Boundary) { EXPECT_EQ(eta[k], 0.0); }
}

TEST(SolveLinear, RadialOracle) {
    const Problem p = prepare(plain_config(5.0, ConstantSource{1.0}, 129));
    const ScalarField eta = solve_linear(*p.disc);
    const oracle::RadialSolution ref = oracle::solve_radial({.q = 5.0, .h = 1.0, .penalized = false});
    const Grid& g = *p.spec.grid();
    EXPECT_NEAR(eta[g.index(g.n() / 2, g.n() / 2)], ref.at(0.0), 2e-3);
    double err = 0.0;
    for (Index k : g.interior()) err = std::max(err, std::abs(eta[k] - ref.at(g.point(k).norm())));
    EXPECT_LE(err, 5e-3);
}

// h = 3 makes the constraint active near the sphere; the gap to the 1-D
// penalized solve is dominated by the snapped boundary and halves with dx.
TEST(Continuation, ActiveRadialOracleFirstOrder) {
    const double eps = 1.0 / 64;
    const oracle::RadialSolution ref = oracle::solve_radial({.q = 5.0, .h = 3.0, .epsilon = eps});
    auto error = [&](int n) {
        const Problem p = prepare(plain_config(5.0, ConstantSource{3.0}, n));
        const ContinuationResult c = continuation(*p.disc, default_schedule(6));
        const Grid& g = *p.spec.grid();
        double err = 0.0;
        for (Index k = 0; k < g.size(); ++k) {
            if (g.in_closed_ball(k)) err = std::max(err, std::abs(c.u[k] - ref.at(std::min(g.point(k).norm(), 1.0))));
        }
        return err;
    };
    const double coarse = error(65);
    const double fine = error(129);
    EXPECT_LT(fine, 0.6 * coarse);
    EXPECT_LT(fine, 1e-2);
}

TEST(SolveInner, ZeroSourceGivesZero) {
    const Problem p = small_reference(33);
    InnerProblem prob = make_inner_problem(*p.disc, {0.25}, ScalarField(p.spec.grid()));
    prob.h_tilde = ScalarField(p.spec.grid());
    EXPECT_EQ(solve_inner(prob, ScalarField(p.spec.grid())).ball_sup_norm(), 0.0);
}

TEST(SolveInner, InactivePenaltyReducesToLinearSolve) {
    const Problem p = small_reference(49);
    InnerProblem prob = make_inner_problem(*p.disc, {0.125}, ScalarField(p.spec.grid()));
    prob.h_tilde = constant_field(p.spec.grid(), 0.5);
    InnerReport rep;
    const ScalarField u = solve_inner(prob, ScalarField(p.spec.grid()), {}, &rep);
    const VectorField du = gradient(u);
    for (Index k : u.grid->interior()) ASSERT_LT(du.at(k).norm(), 1.0);
    EXPECT_LE(ball_sup_distance(u, linear_inner(*p.disc, prob.h_tilde)), 1e-9);
    EXPECT_LE(rep.final_residual, 1e-7);
}

TEST(SolveInner, ActivePenaltyResidualAndHistory) {
    const Problem p = small_reference(49);
    InnerProblem prob = make_inner_problem(*p.disc, {1.0 / 64}, ScalarField(p.spec.grid()));
    prob.h_tilde = constant_field(p.spec.grid(), 6.0);
    InnerReport rep;
    const ScalarField u = solve_inner(prob, ScalarField(p.spec.grid()), {}, &rep);
    EXPECT_LE(rep.final_residual, 1e-7);
    EXPECT_LE(sup_interior(inner_residual(prob, u)), 1e-7);
    EXPECT_EQ(static_cast<int>(rep.residuals.size()), rep.iterations + 1);
    double gmax = 0.0;
    for (Index k : u.grid->interior()) gmax = std::max(gmax, discrete_gradient_sq(u, k));
    EXPECT_GT(gmax, 1.0);  // the constraint binds
}

TEST(SolveInner, SmoothBlendConverges) {
    const Problem p = small_reference(41);
    InnerProblem prob = make_inner_problem(*p.disc, {1.0 / 32, Blend::Smooth}, ScalarField(p.spec.grid()));
    prob.h_tilde = constant_field(p.spec.grid(), 6.0);
    InnerReport rep;
    (void)solve_inner(prob, ScalarField(p.spec.grid()), {}, &rep);
    EXPECT_LE(rep.final_residual, 1e-7);
}

TEST(SolveInner, MonotoneInSource) {
    const Problem p = small_reference(41);
    const GridPtr& g = p.spec.grid();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 4.0);
    for (int t = 0; t < 3; ++t) {
        ScalarField lo(g);
        ScalarField hi(g);
        for (Index k : g->interior()) {
            lo[k] = u(rng);
            hi[k] = lo[k] + u(rng) * 0.5;
        }
        InnerProblem a = make_inner_problem(*p.disc, {1.0 / 16}, ScalarField(g));
        InnerProblem b = a;
        a.h_tilde = lo;
        b.h_tilde = hi;
        const ScalarField ua = solve_inner(a, ScalarField(g));
        const ScalarField ub = solve_inner(b, ScalarField(g));
        EXPECT_LE((ua.values - ub.values).maxCoeff(), 1e-9);
    }
}

TEST(SolveInner, IterationCap) {
    const Problem p = small_reference(41);
    InnerProblem prob = make_inner_problem(*p.disc, {1.0 / 64}, ScalarField(p.spec.grid()));
    prob.h_tilde = constant_field(p.spec.grid(), 6.0);
    SolverOptions o;
    o.inner_max_iterations = 1;
    EXPECT_EQ(kind_of([&] { (void)solve_inner(prob, ScalarField(p.spec.grid()), o); }), ErrorKind::NoConvergence);
}

TEST(OuterFixedPoint, NoJumpsTakesOneCorrection) {
    const Problem p = prepare(plain_config(5.0, ConstantSource{1.0}, 41));
    const auto [u, rep] = outer_fixed_point(*p.disc, {0.25}, ScalarField(p.spec.grid()));
    EXPECT_EQ(rep.outer_iterations, 1);
    EXPECT_TRUE(rep.ratios.empty());
    EXPECT_LE(rep.fixed_point_gap, 1e-8);
}

TEST(OuterFixedPoint, ReferenceContracts) {
    const Problem p = small_reference(49);
    const double rho = p.spec.contraction_factor();
    EXPECT_NEAR(rho, 0.5, 1e-12);
    const auto [u, rep] = outer_fixed_point(*p.disc, {0.5}, ScalarField(p.spec.grid()));
    ASSERT_FALSE(rep.deltas.empty());
    const int bound = static_cast<int>(std::ceil(std::log(1e-8 / rep.deltas.front()) / std::log(rho))) + 2;
    EXPECT_LE(rep.outer_iterations, bound);
    EXPECT_EQ(rep.ratios.size(), static_cast<std::size_t>(rep.outer_iterations - 1));
    for (double r : rep.ratios) EXPECT_LE(r, rho + 0.05);
    EXPECT_LE(rep.deltas.back(), 1e-8);
    EXPECT_LE(rep.fixed_point_gap, 1e-8);
}

TEST(OuterFixedPoint, FlagsRatiosAboveTheBound) {
    const Problem p = small_reference(33);
    SolverOptions o;
    o.ratio_slack = -0.55;  // any positive ratio now exceeds the bound
    EXPECT_EQ(kind_of([&] { (void)outer_fixed_point(*p.disc, {0.5}, ScalarField(p.spec.grid()), o); }),
              ErrorKind::ContractionViolated);
}

TEST(OuterFixedPoint, UniqueFromDifferentStarts) {
    const Problem p = small_reference(41);
    const ScalarField eta = solve_linear(*p.disc);
    const auto a = outer_fixed_point(*p.disc, {0.0625}, ScalarField(p.spec.grid()));
    const auto b = outer_fixed_point(*p.disc, {0.0625}, eta);
    EXPECT_LE(ball_sup_distance(a.first, b.first), 1e-7);
}

TEST(Continuation, DegenerateStaysZero) {
    const Problem p = prepare(plain_config(5.0, ConstantSource{0.0}, 33));
    const ContinuationResult res = continuation(*p.disc, default_schedule(8));
    ASSERT_EQ(res.reports.size(), 8u);
    for (const auto& r : res.reports) {
        EXPECT_EQ(r.u.ball_sup_norm(), 0.0);
        EXPECT_EQ(r.outer_iterations, 1);
    }
}

TEST(Continuation, RejectsBadSchedules) {
    const Problem p = small_reference(33);
    for (const std::vector<double>& s :
         {std::vector<double>{}, std::vector<double>{0.5, 0.5}, std::vector<double>{0.25, 0.5}, std::vector<double>{1.0}})
        EXPECT_EQ(kind_of([&] { (void)continuation(*p.disc, s); }), ErrorKind::InvalidConfig);
}

TEST(Continuation, ErrorsCarryEpsilon) {
    const Problem p = small_reference(33);
    Config c = p.config;
    c.problem.source = ConstantSource{6.0};
    const Problem q = prepare(c);
    SolverOptions o;
    o.inner_max_iterations = 1;
    std::string msg;
    EXPECT_EQ(kind_of([&] { (void)continuation(*q.disc, {0.5, 0.25}, Blend::Piecewise, o); }, &msg),
              ErrorKind::NoConvergence);
    EXPECT_NE(msg.find("eps = 0.5"), std::string::npos) << msg;
}

// A source strong enough that the constraint binds along the whole schedule.
class ActiveContinuation : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        Config c = hjb::testing::reference_config();
        c.grid_n = 49;
        c.problem.source = ConstantSource{3.0};
        problem_ = new Problem(prepare(c));
        result_ = new ContinuationResult(continuation(*problem_->disc, default_schedule(6)));
    }
    static void TearDownTestSuite() {
        delete result_;
        delete problem_;
    }
    static Problem* problem_;
    static ContinuationResult* result_;
};
Problem* ActiveContinuation::problem_ = nullptr;
ContinuationResult* ActiveContinuation::result_ = nullptr;

TEST_F(ActiveContinuation, ExcessGradientShrinks) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& r : result_->reports) {
        double excess = 0.0;
        for (Index k : r.u.grid->interior()) excess = std::max(excess, discrete_gradient_sq(r.u, k) - 1.0);
        EXPECT_LE(excess, 1.1 * prev) << "eps " << r.epsilon;
        prev = excess;
    }
}

// The differences can grow for the first halvings while the active set
// forms (0.0168 then 0.0177 here); past their peak they must decrease.
TEST_F(ActiveContinuation, CauchyDifferencesDecrease) {
    const auto& rs = result_->reports;
    std::vector<double> d;
    for (std::size_t i = 1; i < rs.size(); ++i) d.push_back(ball_sup_distance(rs[i].u, rs[i - 1].u));
    const auto peak = std::max_element(d.begin(), d.end());
    EXPECT_LE(peak - d.begin(), 1);
    for (auto it = peak + 1; it != d.end(); ++it) EXPECT_LT(*it, *(it - 1));
    EXPECT_LT(d.back(), 0.5 * *peak);
}

TEST_F(ActiveContinuation, BoundsHold) {
    const ScalarField eta = solve_linear(*problem_->disc);
    const BarrierResult bar = barrier(*problem_->disc);
    for (auto r : result_->reports) {
        check_bounds(r, eta, bar.eta1);
        for (const auto& b : r.bounds) EXPECT_TRUE(b.passed) << b.name << " " << b.value << " eps " << r.epsilon;
        EXPECT_LE(r.fixed_point_gap, 1e-8);
    }
}

TEST_F(ActiveContinuation, ResidualsAtFinestEps) {
    const SolveReport& last = result_->reports.back();
    const HjbResiduals res = hjb_residuals(last.u, *problem_->disc);
    const double tol = 2.0 * (last.epsilon + problem_->spec.grid()->dx());
    for (Index k : last.u.grid->interior()) {
        EXPECT_LE(res.r1[k], tol);
        if (res.r2[k] <= -0.05) { EXPECT_LE(std::abs(res.r1[k]), tol); }
        // r1 is minus the penalty
        EXPECT_NEAR(res.r1[k], -psi_eps(res.r2[k] + 1.0, {last.epsilon}), 1e-6);
    }
}

TEST(Barrier, ShapeAndMargin) {
    const Problem p = small_reference(49);
    const BarrierResult bar = barrier(*p.disc);
    const Grid& g = *p.spec.grid();
    EXPECT_GE(bar.min_margin, 0.0);
    EXPECT_EQ(bar.K6, std::exp2(std::round(std::log2(bar.K6))));
    for (Index k = 0; k < g.size(); ++k) {
        if (g.mask(k) == PointClass::Boundary) { EXPECT_EQ(bar.eta1[k], 0.0); }
        if (g.mask(k) == PointClass::Interior) { EXPECT_GT(bar.eta1[k], 0.0); }
    }
    const ScalarField lhs = compensated_operator(*p.disc, bar.eta1);
    for (Index k : g.interior()) EXPECT_GE(lhs[k] - p.spec.C0 * (1 + g.point(k).squaredNorm()), 0.0);
}

TEST(Barrier, NotFoundForHugeSource) {
    Config c = hjb::testing::reference_config();
    c.grid_n = 33;
    c.problem.C0 = 1e300;
    const Problem p = prepare(c);
    EXPECT_EQ(kind_of([&] { (void)barrier(*p.disc); }), ErrorKind::BarrierNotFound);
}

TEST(OperatorSplit, AgreeOnRandomSmoothFields) {
    const Problem p = small_reference(65);
    const GridPtr& g = p.spec.grid();
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int t = 0; t < 20; ++t) {
        const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        const ScalarField f = sample(g, [&](const Point& x) {
            return a * std::sin(b * x[0] + c) * std::cos(d * x[1]) + (1.0 - x.squaredNorm()) * a * b;
        });
        const ScalarField s = shifted_operator(*p.disc, f);
        const ScalarField cmp = compensated_operator(*p.disc, f);
        for (Index k : g->interior()) EXPECT_NEAR(s[k], cmp[k], 1e-10);
    }
}

TEST(Helpers, RelativeSpreadAndSchedule) {
    EXPECT_EQ(relative_spread({0.0, 0.0}), 0.0);
    EXPECT_DOUBLE_EQ(relative_spread({1.0, 0.9, 0.95}), 0.1 / 1.0);
    const auto s = default_schedule(8);
    ASSERT_EQ(s.size(), 8u);
    EXPECT_EQ(s.front(), 0.5);
    EXPECT_EQ(s.back(), 1.0 / 256);
}
