#include "hjb/error.hpp"
#include "hjb/simulate.hpp"
#include "hjb/solver.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

using namespace hjb;

namespace {

Problem plain_problem(double q, double h, int n = 33) {
    Config c = hjb::testing::plain_config(q, ConstantSource{h}, n);
    return prepare(std::move(c));
}

}  // namespace

TEST(Increment, DiffusionMeanAndCovariance) {
    RawLevyParams raw;
    raw.gamma = Point(0.3, -0.1);
    raw.sigma << 1.0, 0.2, 0.2, 0.8;
    const LevyModel m = build_model(raw);
    const JumpSampler jumps(m);
    const double dt = 0.01;
    const int n = 1000000;
    Rng rng(7);
    Point sum = Point::Zero();
    Eigen::Matrix2d sq = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
        const Point d = sample_levy_increment(m, jumps, dt, rng);
        sum += d;
        sq += d * d.transpose();
    }
    const Point mean = sum / n;
    const Eigen::Matrix2d cov = sq / n - mean * mean.transpose();
    for (int a = 0; a < 2; ++a) {
        const double se = std::sqrt(raw.sigma(a, a) * dt / n);
        EXPECT_NEAR(mean[a], raw.gamma[a] * dt, 4 * se);
        for (int c = 0; c < 2; ++c) {
            // Var of a product of Gaussians: (s_aa s_cc + s_ac^2) dt^2
            const double var = (raw.sigma(a, a) * raw.sigma(c, c) + raw.sigma(a, c) * raw.sigma(a, c)) * dt * dt;
            EXPECT_NEAR(cov(a, c), raw.sigma(a, c) * dt, 4 * std::sqrt(var / n));
        }
    }
}

TEST(Increment, JumpCountIsPoisson) {
    RawLevyParams raw;
    raw.sigma = 1e-12 * Eigen::Matrix2d::Identity();
    raw.kappa = UniformAnnulus{annulus_density_for_mass(4.0, 0.1, 0.5), 0.1, 0.5};
    const LevyModel m = build_model(raw);
    const JumpSampler jumps(m);
    const double dt = 0.25;  // nu0 dt = 1
    Rng rng(8);
    const int n = 200000;
    int zero = 0;
    double radius_sum = 0.0;
    int single = 0;
    for (int i = 0; i < n; ++i) {
        const Point d = sample_levy_increment(m, jumps, dt, rng);
        if (d.norm() < 1e-4) ++zero;
        const Point j = jumps.draw(rng);
        EXPECT_GE(j.norm(), 0.1);
        EXPECT_LE(j.norm(), 0.5);
        radius_sum += j.norm();
        ++single;
    }
    const double p0 = std::exp(-1.0);
    EXPECT_NEAR(static_cast<double>(zero) / n, p0, 4 * std::sqrt(p0 * (1 - p0) / n));
    // Mean radius of the uniform annulus law is nu1 / nu0.
    EXPECT_NEAR(radius_sum / single, m.nu1 / m.nu0, 1e-3);
}

TEST(Increment, RejectsNonPositiveStep) {
    const LevyModel m = build_model(RawLevyParams{});
    const JumpSampler jumps(m);
    Rng rng(1);
    EXPECT_THROW((void)sample_levy_increment(m, jumps, 0.0, rng), Error);
}

TEST(JumpSampler, StallsOnPeakedDensity) {
    LevyModel m;
    m.kappa = TruncatedGaussian{1.0, Point::Zero(), 0.005, 0.6};
    m.nu0 = 2.0 * std::numbers::pi * 0.005 * 0.005;
    m.jump_support_radius = 0.6;
    try {
        const JumpSampler s(m);
        ADD_FAILURE() << "no error, acceptance " << s.acceptance_rate();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RejectionStall);
    }
}

TEST(Simulate, ZeroSourceGivesZero) {
    const Problem p = plain_problem(2.0, 0.0);
    const ScalarField u = ScalarField(p.spec.grid());
    PathConfig cfg;
    cfg.n_paths = 200;
    const CostEstimate e = simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg);
    EXPECT_EQ(e.mean, 0.0);
    EXPECT_EQ(e.std_error, 0.0);
}

TEST(Simulate, DeterministicAcrossRunsAndThreads) {
    const Problem p = hjb::testing::small_reference(33);
    const ScalarField u = ScalarField(p.spec.grid());
    PathConfig cfg;
    cfg.n_paths = 400;
    cfg.dt = 5e-3;
    const CostEstimate a = simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg);
    const CostEstimate b = simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg);
    cfg.threads = 2;
    const CostEstimate c = simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.mean, c.mean);
    EXPECT_EQ(a.std_error, c.std_error);
    EXPECT_EQ(a.exit_fraction, c.exit_fraction);
    cfg.seed += 1;
    EXPECT_NE(simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg).mean, a.mean);
}

TEST(Simulate, ShortHorizonIsTheDiscountedSum) {
    // No path can reach the boundary in ten steps, so every path pays
    // h dt sum_n e^{-q n dt} exactly.
    const double q = 3.0;
    const Problem p = plain_problem(q, 2.0);
    const ScalarField u = ScalarField(p.spec.grid());
    PathConfig cfg;
    cfg.n_paths = 50;
    cfg.dt = 1e-3;
    cfg.t_max = 0.01;
    const CostEstimate e = simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg, ZeroPolicy{});
    double expected = 0.0;
    for (int n = 0; n < 10; ++n) expected += 2.0 * cfg.dt * std::exp(-q * n * cfg.dt);
    EXPECT_NEAR(e.mean, expected, 1e-14);
    EXPECT_EQ(e.exit_fraction, 0.0);
}

TEST(Simulate, CostDecreasesWithDiscount) {
    PathConfig cfg;
    cfg.n_paths = 500;
    cfg.dt = 2e-3;
    cfg.t_max = 1.0;
    double prev = 1e300;
    for (double q : {1.0, 2.0, 4.0, 8.0}) {
        const Problem p = plain_problem(q, 1.0);
        const ScalarField u = ScalarField(p.spec.grid());
        const double v = simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg, ZeroPolicy{}).mean;
        EXPECT_LT(v, prev) << "q " << q;
        prev = v;
    }
}

TEST(Simulate, ConstantPushPaysItsCost) {
    const Problem p = plain_problem(2.0, 0.0);
    const ScalarField u = ScalarField(p.spec.grid());
    PathConfig cfg;
    cfg.n_paths = 20;
    cfg.dt = 1e-3;
    cfg.t_max = 0.005;
    const Point eta(6.0, 0.0);
    const CostEstimate e = simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg, ConstantPush{eta});
    double expected = 0.0;
    for (int n = 0; n < 5; ++n) expected += 7.5 * cfg.dt * std::exp(-2.0 * n * cfg.dt);
    EXPECT_NEAR(e.mean, expected, 1e-12);
    EXPECT_EQ(policy_name(ConstantPush{eta}), "constant_push");
    EXPECT_EQ(policy_name(FeedbackPolicy{}), "feedback");
    EXPECT_EQ(policy_name(ZeroPolicy{}), "zero");
}

TEST(Simulate, FeedbackNoWorseThanZeroControl) {
    Config c = hjb::testing::reference_config();
    c.grid_n = 49;
    c.problem.source = ConstantSource{3.0};
    const Problem p = prepare(std::move(c));
    const PenaltySpec pen{0.5};
    const ScalarField u = outer_fixed_point(*p.disc, pen, ScalarField(p.spec.grid())).first;
    PathConfig cfg;
    cfg.n_paths = 4000;
    cfg.dt = 2e-3;
    const CostEstimate fb = simulate_value(u, p.spec, p.model, pen, cfg, FeedbackPolicy{});
    const CostEstimate zero = simulate_value(u, p.spec, p.model, pen, cfg, ZeroPolicy{});
    EXPECT_LE(fb.mean, zero.mean + 3 * std::hypot(fb.std_error, zero.std_error));
}

TEST(Simulate, RejectsBadPathConfig) {
    const Problem p = plain_problem(2.0, 1.0);
    const ScalarField u = ScalarField(p.spec.grid());
    PathConfig cfg;
    cfg.n_paths = 1;
    EXPECT_THROW((void)simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg), Error);
    cfg.n_paths = 10;
    cfg.start = Point(1.0, 0.0);
    EXPECT_THROW((void)simulate_value(u, p.spec, p.model, PenaltySpec{0.5}, cfg), Error);
}

TEST(PathTrace, AtMostOneHundredPaths) {
    const Problem p = plain_problem(2.0, 1.0);
    const ScalarField u = ScalarField(p.spec.grid());
    PathConfig cfg;
    cfg.n_paths = 500;
    cfg.dt = 1e-3;
    cfg.t_max = 0.003;
    std::ostringstream os;
    write_path_trace(u, p.spec, p.model, PenaltySpec{0.5}, cfg, ZeroPolicy{}, 250, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "path,step,t,x1,x2");
    int rows = 0;
    int last_path = -1;
    while (std::getline(is, line)) {
        ++rows;
        last_path = std::stoi(line.substr(0, line.find(',')));
    }
    EXPECT_EQ(last_path, 99);
    EXPECT_EQ(rows, 100 * 4);
}

TEST(PathRng, DependsOnSeedAndIndexOnly) {
    Rng a = path_rng(5, 17);
    Rng b = path_rng(5, 17);
    Rng c = path_rng(5, 18);
    Rng d = path_rng(6, 17);
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
    EXPECT_NE(x, d());
}
