#pragma once

#include "hjb/model.hpp"
#include "hjb/penalty.hpp"
#include "hjb/simulate.hpp"
#include "hjb/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hjb {

struct SimulationSettings {
    double epsilon = 0.5;                 // which u^eps the paths are compared against
    double dt = 1e-3;
    int paths = 100000;
    double t_max = 0.0;                   // 0 selects -ln(1e-6) / q
    std::uint64_t seed = 20240611;
    std::vector<Point> starts{Point(0.0, 0.0), Point(0.3, 0.0), Point(0.0, -0.5)};
    std::vector<ControlPolicy> comparisons{ZeroPolicy{}};
    double allowance = 0.05;              // |V - u| <= 3 SE + allowance
};

struct VerificationSettings {
    double uniqueness_epsilon = 0.0625;
    double slack_band = 0.05;             // complementarity region r2 <= -band
    double residual_factor = 2.0;         // tol = factor (eps + dx)
    double gradient_spread = 0.10;
    double penalty_spread = 0.25;
};

struct Config {
    ProblemParams problem;
    RawLevyParams levy;
    int grid_n = 129;
    std::vector<double> eps_schedule = default_schedule();
    Blend blend = Blend::Piecewise;
    SolverOptions solver;
    SimulationSettings simulation;
    VerificationSettings verification;
    std::string echo;                     // normalised JSON of the input document
};

/// Parses TOML (default) or JSON (when the text starts with '{').
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);

}  // namespace hjb
