#pragma once

#include "hjb/grid.hpp"
#include "hjb/model.hpp"
#include "hjb/penalty.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>

namespace hjb {

using Rng = std::mt19937_64;

/// Draws jumps from kappa / nu0 by rejection from the uniform law on the
/// support disc.
class JumpSampler {
public:
    /// Throws RejectionStall if the expected acceptance rate is below 1e-3.
    explicit JumpSampler(const LevyModel& model);

    [[nodiscard]] Point draw(Rng& rng) const;
    [[nodiscard]] double acceptance_rate() const { return acceptance_; }

private:
    const LevyModel* model_;
    double bound_ = 0.0;
    double radius_ = 0.0;
    double acceptance_ = 1.0;
};

/// Y_{t+dt} - Y_t: N(0, sigma dt) + gamma~ dt + a Poisson(nu0 dt) number of
/// jumps.
Point sample_levy_increment(const LevyModel& model, const JumpSampler& jumps, double dt, Rng& rng);

struct FeedbackPolicy {};
struct ZeroPolicy {};
struct ConstantPush {
    Point eta;
};
using ControlPolicy = std::variant<FeedbackPolicy, ZeroPolicy, ConstantPush>;
std::string policy_name(const ControlPolicy& p);

struct PathConfig {
    double dt = 1e-3;
    int n_paths = 100000;
    double t_max = 0.0;          // 0 selects -ln(1e-6) / q
    std::uint64_t seed = 20240611;
    Point start = Point::Zero();
    int threads = 1;
};

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_paths = 0;
    double exit_fraction = 0.0;  // paths leaving the ball before t_max
};

/// Discounted cost int e^{-qs} (h(X_s) + l_eps(rho'_s)) ds up to the first
/// step with |X| >= R, for X = x + Y - rho under the given policy. Path i
/// draws from its own generator seeded by (seed, i), so the estimate does
/// not depend on the thread count.
CostEstimate simulate_value(const ScalarField& u_eps, const ProblemSpec& spec, const LevyModel& model,
                            const PenaltySpec& penalty, const PathConfig& cfg,
                            const ControlPolicy& policy = FeedbackPolicy{});

/// Positions along the first `count` paths (at most 100) of the same run, as
/// `path,step,t,x1,x2` rows.
void write_path_trace(const ScalarField& u_eps, const ProblemSpec& spec, const LevyModel& model,
                      const PenaltySpec& penalty, const PathConfig& cfg, const ControlPolicy& policy, int count,
                      std::ostream& os);

/// Generator for path `index` of a run seeded with `seed`.
Rng path_rng(std::uint64_t seed, std::uint64_t index);

}  // namespace hjb
