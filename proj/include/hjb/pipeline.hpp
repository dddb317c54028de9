#pragma once

#include "hjb/config.hpp"
#include "hjb/model.hpp"
#include "hjb/simulate.hpp"
#include "hjb/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hjb {

enum class Stage { Validate, Solve, Verify, Simulate, All };

namespace exit_code {
constexpr int ok = 0;
constexpr int hypotheses = 1;
constexpr int solver = 2;
constexpr int verification = 3;
constexpr int monte_carlo = 4;
constexpr int usage = 5;
}  // namespace exit_code

struct RunConfig {
    std::filesystem::path config_path;
    std::filesystem::path out_dir = "out";
    Stage stage = Stage::All;
    std::optional<std::vector<double>> eps_schedule;
    std::optional<int> grid_n;
    std::optional<int> paths;
    std::optional<std::uint64_t> seed;
    bool check_only = false;
    int threads = 1;
    int trace_paths = 0;   // per-path CSV for this many paths (at most 100)
};

/// Everything derived from a configuration before any solve.
struct Problem {
    Config config;
    LevyModel model;
    ProblemSpec spec;
    ValidationReport validation;
    std::shared_ptr<const Discretization> disc;
};

Problem prepare(Config cfg);

struct VerificationResult {
    std::vector<BoundCheck> checks;
    ScalarField eta;
    ScalarField eta1;
    double K5 = 0.0;
    double K6 = 0.0;
    double barrier_margin = 0.0;
    double tolerance = 0.0;
    HjbResiduals residuals;

    [[nodiscard]] bool passed() const;
};

/// Bound checks for every report (filled in place), uniformity across eps,
/// final residuals, contraction and fixed-point consistency, and the
/// uniqueness comparison from w0 = 0 and w0 = eta.
VerificationResult verify(const Problem& problem, std::vector<SolveReport>& reports);

struct MonteCarloRow {
    Point start;
    double u = 0.0;
    CostEstimate feedback;
    std::vector<std::pair<std::string, CostEstimate>> comparisons;
    bool consistent = false;        // |V - u| <= 3 SE + allowance
    bool feedback_optimal = false;  // feedback <= every comparison + 3 combined SE
};

std::vector<MonteCarloRow> monte_carlo(const Problem& problem, const ScalarField& u_eps, int threads);

/// Runs the selected stages, writing artifacts under cfg.out_dir; returns the
/// process exit status.
int run(const RunConfig& cfg);

}  // namespace hjb
