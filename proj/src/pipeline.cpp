#include "hjb/pipeline.hpp"

#include "hjb/error.hpp"
#include "hjb/io.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace hjb {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

std::string eps_tag(double eps) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", eps);
    return buf;
}

json grid_json(const Grid& g) {
    return {{"n_per_axis", g.n()},     {"dx", g.dx()},
            {"half_width", g.half_width()}, {"R", g.radius()},
            {"b", g.margin()},         {"interior_points", g.interior_count()}};
}

json point_json(const Point& x) { return json::array({x[0], x[1]}); }

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json validation_json(const Problem& p) {
    json checks = json::array();
    for (const auto& c : p.validation.checks)
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"margin", c.margin}, {"detail", c.detail}});
    return {{"all_passed", p.validation.all_passed()},
            {"checks", checks},
            {"derived",
             {{"nu0", p.model.nu0},
              {"nu1", p.model.nu1},
              {"nu0_error", p.model.nu0_error},
              {"nu1_error", p.model.nu1_error},
              {"gamma_tilde", point_json(p.model.gamma_tilde)},
              {"first_moment", point_json(p.model.first_moment)},
              {"jump_support_radius", p.model.jump_support_radius},
              {"q_prime", p.spec.q_prime},
              {"nu_ball", p.spec.nu_ball},
              {"contraction_factor", p.spec.contraction_factor()},
              {"theta", p.model.theta},
              {"Theta", p.model.Theta},
              {"C0", p.spec.C0},
              {"h_c2_norm", p.spec.h_c2_norm}}}};
}

json bounds_json(const std::vector<BoundCheck>& checks) {
    json out = json::array();
    for (const auto& c : checks)
        out.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}, {"detail", c.detail}});
    return out;
}

json report_json(const SolveReport& r, const Grid& g) {
    json inner = json::array();
    for (const auto& i : r.inner)
        inner.push_back({{"iterations", i.iterations},
                         {"dampings", i.dampings},
                         {"final_residual", i.final_residual},
                         {"residuals", i.residuals}});
    return {{"epsilon", r.epsilon},
            {"grid", grid_json(g)},
            {"contraction_bound", r.contraction_bound},
            {"outer_iterations", r.outer_iterations},
            {"deltas", r.deltas},
            {"ratios", r.ratios},
            {"fixed_point_gap", r.fixed_point_gap},
            {"seconds", r.seconds},
            {"gradient_max", r.gradient_max},
            {"penalty_max_half_ball", r.penalty_max_half},
            {"bounds", bounds_json(r.bounds)},
            {"inner", inner}};
}

SolveReport read_report(const fs::path& json_path, const fs::path& field_path, const GridPtr& grid) {
    std::ifstream in(json_path);
    if (!in) throw Error(ErrorKind::MissingArtifact, "missing report " + json_path.string());
    const json j = json::parse(in);
    SolveReport r;
    r.epsilon = j.at("epsilon").get<double>();
    r.contraction_bound = j.at("contraction_bound").get<double>();
    r.outer_iterations = j.at("outer_iterations").get<int>();
    r.deltas = j.at("deltas").get<std::vector<double>>();
    r.ratios = j.at("ratios").get<std::vector<double>>();
    r.fixed_point_gap = j.at("fixed_point_gap").get<double>();
    r.seconds = j.at("seconds").get<double>();
    r.u = read_field_csv(field_path, grid);
    return r;
}

int exit_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NoConvergence:
    case ErrorKind::ContractionViolated:
    case ErrorKind::SingularSystem:
    case ErrorKind::ExtensionBoundViolated: return exit_code::solver;
    case ErrorKind::BarrierNotFound: return exit_code::verification;
    case ErrorKind::RejectionStall: return exit_code::monte_carlo;
    case ErrorKind::MissingArtifact: return exit_code::usage;
    default: return exit_code::hypotheses;
    }
}

class Manifest {
public:
    Manifest(const RunConfig& run, const Problem& p) {
        doc_["program"] = {{"name", "hjb"}, {"version", kVersion}};
        doc_["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                            {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) +
                                           "." + std::to_string(SPDLOG_VER_PATCH)},
                            {"compiler", __VERSION__}};
        doc_["config_file"] = run.config_path.string();
        doc_["config"] = json::parse(p.config.echo);
        doc_["effective"] = {{"grid_n", p.config.grid_n},
                             {"eps_schedule", p.config.eps_schedule},
                             {"blend", std::string(to_string(p.config.blend))},
                             {"paths", p.config.simulation.paths},
                             {"seed", p.config.simulation.seed},
                             {"threads", run.threads}};
        doc_["grid"] = grid_json(*p.spec.grid());
        doc_["stages"] = json::array();
        path_ = run.out_dir / "manifest.json";
    }

    void stage(const std::string& name, double seconds, int status, const std::vector<std::string>& artifacts) {
        doc_["stages"].push_back({{"stage", name}, {"seconds", seconds}, {"status", status}, {"artifacts", artifacts}});
        write_json(doc_, path_);
    }

    void flush() { write_json(doc_, path_); }

private:
    json doc_;
    fs::path path_;
};

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Problem prepare(Config cfg) {
    Problem p;
    p.model = build_model(cfg.levy);
    auto grid = std::make_shared<const Grid>(cfg.problem.R, cfg.problem.b, cfg.grid_n);
    p.spec = build_problem(cfg.problem, p.model, grid);
    p.validation = validate_hypotheses(p.model, p.spec);
    p.disc = std::make_shared<const Discretization>(p.spec, p.model, build_quadrature(p.model, *grid));
    p.config = std::move(cfg);
    return p;
}

bool VerificationResult::passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

VerificationResult verify(const Problem& problem, std::vector<SolveReport>& reports) {
    if (reports.empty()) throw Error(ErrorKind::MissingArtifact, "nothing to verify");
    const Discretization& disc = *problem.disc;
    const Config& cfg = problem.config;
    const Grid& g = *disc.grid();
    VerificationResult out;

    LinearReport lin;
    out.eta = solve_linear(disc, cfg.solver, &lin);
    out.K5 = out.eta.ball_sup_norm();
    out.checks.push_back({"linear_residual", lin.residual <= cfg.solver.linear_tolerance, lin.residual,
                          "sup |(q' - L' - I E) eta - h|"});

    const BarrierResult bar = barrier(disc);
    out.eta1 = bar.eta1;
    out.K6 = bar.K6;
    out.barrier_margin = bar.min_margin;
    out.checks.push_back({"barrier_inequality", bar.min_margin >= 0.0, bar.min_margin,
                          "min over Interior of (q - L - I') eta1 - C0 (1 + |x|^2), K6 = " + std::to_string(bar.K6)});

    std::vector<double> grads;
    std::vector<double> pens;
    double worst_ratio = 0.0;
    double worst_gap = 0.0;
    std::vector<BoundCheck> merged;
    for (auto& r : reports) {
        measure_report(r, disc, cfg.blend);
        check_bounds(r, out.eta, out.eta1);
        grads.push_back(r.gradient_max);
        pens.push_back(r.penalty_max_half);
        for (double x : r.ratios) worst_ratio = std::max(worst_ratio, x);
        worst_gap = std::max(worst_gap, r.fixed_point_gap);
        for (const auto& b : r.bounds) {
            auto it = std::find_if(merged.begin(), merged.end(), [&](const BoundCheck& m) { return m.name == b.name; });
            if (it == merged.end()) {
                merged.push_back(b);
                continue;
            }
            it->passed = it->passed && b.passed;
            it->value = b.name == "nonnegativity" ? std::min(it->value, b.value) : std::max(it->value, b.value);
        }
    }
    for (auto& m : merged) {
        m.detail += ", worst over the schedule";
        out.checks.push_back(m);
    }

    const double rho = disc.spec().contraction_factor();
    out.checks.push_back({"contraction_rate", worst_ratio <= rho + cfg.solver.ratio_slack, worst_ratio,
                          "max measured outer ratio vs " + std::to_string(rho) + " + slack"});
    out.checks.push_back({"fixed_point_consistency", worst_gap <= cfg.solver.outer_tolerance, worst_gap,
                          "max ||solve_inner(u) - u|| at exit"});

    const double gspread = relative_spread(grads);
    out.checks.push_back({"gradient_uniform", gspread < cfg.verification.gradient_spread, gspread,
                          "relative spread of max |Du| across eps"});
    const double pspread = relative_spread(pens);
    out.checks.push_back({"penalty_uniform", pspread < cfg.verification.penalty_spread, pspread,
                          "relative spread of max psi_eps over B_{R/2} across eps"});

    const SolveReport& last = reports.back();
    out.tolerance = cfg.verification.residual_factor * (last.epsilon + g.dx());
    out.residuals = hjb_residuals(last.u, disc);
    double r1_max = -std::numeric_limits<double>::infinity();
    double r2_max = -std::numeric_limits<double>::infinity();
    double r2c_max = -std::numeric_limits<double>::infinity();
    double comp = 0.0;
    for (Index k : g.interior()) {
        r1_max = std::max(r1_max, out.residuals.r1[k]);
        r2c_max = std::max(r2c_max, out.residuals.r2_central[k]);
        r2_max = std::max(r2_max, out.residuals.r2[k]);
        if (out.residuals.r2[k] <= -cfg.verification.slack_band) comp = std::max(comp, std::abs(out.residuals.r1[k]));
    }
    out.checks.push_back({"residual_r1", r1_max <= out.tolerance, r1_max, "max r1 at the final eps"});
    out.checks.push_back({"residual_r2", r2_max <= out.tolerance, r2_max,
                          fmt::format("max G(u) - 1 at the final eps (centred |Du|^2 - 1: {:.4g})", r2c_max)});
    out.checks.push_back({"complementarity", comp <= out.tolerance, comp, "max |r1| where r2 <= -band"});

    const PenaltySpec pen{cfg.verification.uniqueness_epsilon, cfg.blend};
    const auto [from_zero, rz] = outer_fixed_point(disc, pen, ScalarField(disc.grid()), cfg.solver);
    const auto [from_eta, re] = outer_fixed_point(disc, pen, out.eta, cfg.solver);
    const double gap = ball_sup_distance(from_zero, from_eta);
    out.checks.push_back({"uniqueness", gap <= 1e-7, gap, "sup distance of runs from w0 = 0 and w0 = eta"});
    return out;
}

std::vector<MonteCarloRow> monte_carlo(const Problem& problem, const ScalarField& u_eps, int threads) {
    const auto& sim = problem.config.simulation;
    const PenaltySpec pen{sim.epsilon, problem.config.blend};
    std::vector<MonteCarloRow> rows;
    for (const Point& x : sim.starts) {
        PathConfig pc;
        pc.dt = sim.dt;
        pc.n_paths = sim.paths;
        pc.t_max = sim.t_max;
        pc.seed = sim.seed;
        pc.start = x;
        pc.threads = threads;
        MonteCarloRow row;
        row.start = x;
        row.u = interpolate(u_eps, x);
        row.feedback = simulate_value(u_eps, problem.spec, problem.model, pen, pc, FeedbackPolicy{});
        row.consistent = std::abs(row.feedback.mean - row.u) <= 3.0 * row.feedback.std_error + sim.allowance;
        row.feedback_optimal = true;
        for (const auto& policy : sim.comparisons) {
            const CostEstimate c = simulate_value(u_eps, problem.spec, problem.model, pen, pc, policy);
            const double se = std::hypot(c.std_error, row.feedback.std_error);
            row.feedback_optimal = row.feedback_optimal && row.feedback.mean <= c.mean + 3.0 * se;
            row.comparisons.emplace_back(policy_name(policy), c);
        }
        spdlog::info("MC at ({:.2f}, {:.2f}): V = {:.5f} +- {:.5f}, u = {:.5f}", x[0], x[1], row.feedback.mean,
                     row.feedback.std_error, row.u);
        rows.push_back(std::move(row));
    }
    return rows;
}

int run(const RunConfig& rc) {
    Config cfg;
    try {
        cfg = load_config(rc.config_path);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_code::hypotheses;
    }
    if (rc.eps_schedule) cfg.eps_schedule = *rc.eps_schedule;
    if (rc.grid_n) cfg.grid_n = *rc.grid_n;
    if (rc.paths) cfg.simulation.paths = *rc.paths;
    if (rc.seed) cfg.simulation.seed = *rc.seed;

    std::error_code ec;
    fs::create_directories(rc.out_dir / "fields", ec);
    fs::create_directories(rc.out_dir / "reports", ec);
    if (ec) {
        spdlog::error("cannot create output directory {}: {}", rc.out_dir.string(), ec.message());
        return exit_code::usage;
    }

    Problem problem;
    try {
        problem = prepare(std::move(cfg));
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_for(e.kind());
    }
    const Config& c = problem.config;
    const GridPtr& grid = problem.spec.grid();
    Manifest manifest(rc, problem);

    auto t0 = std::chrono::steady_clock::now();
    write_json(validation_json(problem), rc.out_dir / "validation.json");
    const bool valid = problem.validation.all_passed();
    for (const auto& chk : problem.validation.checks)
        spdlog::info("{}: {} (margin {:.4g}) {}", chk.name, chk.passed ? "pass" : "FAIL", chk.margin, chk.detail);
    manifest.stage("validate", since(t0), valid ? exit_code::ok : exit_code::hypotheses, {"validation.json"});
    if (!valid) return exit_code::hypotheses;
    if (rc.check_only || rc.stage == Stage::Validate) return exit_code::ok;

    const bool all = rc.stage == Stage::All;
    std::vector<SolveReport> reports;
    auto field_path = [&](double eps) { return rc.out_dir / "fields" / ("u_eps_" + eps_tag(eps) + ".csv"); };
    auto report_path = [&](double eps) { return rc.out_dir / "reports" / ("report_eps_" + eps_tag(eps) + ".json"); };

    try {
        if (all || rc.stage == Stage::Solve) {
            t0 = std::chrono::steady_clock::now();
            std::vector<std::string> artifacts;
            try {
                ContinuationResult res = continuation(*problem.disc, c.eps_schedule, c.blend, c.solver);
                reports = std::move(res.reports);
                for (const auto& r : reports) {
                    write_field_csv(r.u, field_path(r.epsilon));
                    write_json(report_json(r, *grid), report_path(r.epsilon));
                    artifacts.push_back(fs::relative(field_path(r.epsilon), rc.out_dir).string());
                    artifacts.push_back(fs::relative(report_path(r.epsilon), rc.out_dir).string());
                }
                write_field_csv(res.u, rc.out_dir / "fields" / "u.csv");
                artifacts.emplace_back("fields/u.csv");
            } catch (const Error& e) {
                spdlog::error("{}", e.what());
                manifest.stage("solve", since(t0), exit_for(e.kind()), artifacts);
                return exit_for(e.kind());
            }
            manifest.stage("solve", since(t0), exit_code::ok, artifacts);
        }

        if (all || rc.stage == Stage::Verify) {
            t0 = std::chrono::steady_clock::now();
            if (reports.empty())
                for (double eps : c.eps_schedule) reports.push_back(read_report(report_path(eps), field_path(eps), grid));
            VerificationResult v;
            try {
                v = verify(problem, reports);
            } catch (const Error& e) {
                spdlog::error("{}", e.what());
                manifest.stage("verify", since(t0), exit_for(e.kind()), {});
                return exit_for(e.kind());
            }
            json checks = bounds_json(v.checks);
            json per_eps = json::array();
            for (const auto& r : reports)
                per_eps.push_back({{"epsilon", r.epsilon},
                                   {"gradient_max", r.gradient_max},
                                   {"penalty_max_half_ball", r.penalty_max_half},
                                   {"outer_iterations", r.outer_iterations},
                                   {"bounds", bounds_json(r.bounds)}});
            write_json({{"all_passed", v.passed()},
                        {"K5", v.K5},
                        {"K6", v.K6},
                        {"barrier_margin", v.barrier_margin},
                        {"residual_tolerance", v.tolerance},
                        {"checks", checks},
                        {"per_epsilon", per_eps}},
                       rc.out_dir / "verification.json");
            write_field_csv(v.eta, rc.out_dir / "fields" / "eta.csv");
            write_field_csv(v.eta1, rc.out_dir / "fields" / "eta1.csv");
            write_field_csv(v.residuals.r1, rc.out_dir / "fields" / "r1.csv");
            write_field_csv(v.residuals.r2, rc.out_dir / "fields" / "r2.csv");
            write_field_csv(v.residuals.r2_central, rc.out_dir / "fields" / "r2_central.csv");
            for (const auto& chk : v.checks)
                spdlog::info("{}: {} ({:.4g})", chk.name, chk.passed ? "pass" : "FAIL", chk.value);
            const int status = v.passed() ? exit_code::ok : exit_code::verification;
            manifest.stage("verify", since(t0), status,
                           {"verification.json", "fields/eta.csv", "fields/eta1.csv", "fields/r1.csv", "fields/r2.csv",
                            "fields/r2_central.csv"});
            if (status != exit_code::ok) return status;
        }

        if (all || rc.stage == Stage::Simulate) {
            t0 = std::chrono::steady_clock::now();
            const double eps = c.simulation.epsilon;
            ScalarField u_eps;
            auto it = std::find_if(reports.begin(), reports.end(),
                                   [&](const SolveReport& r) { return std::abs(r.epsilon - eps) <= 1e-15 * eps; });
            if (it != reports.end())
                u_eps = it->u;
            else
                u_eps = read_field_csv(field_path(eps), grid);

            std::vector<MonteCarloRow> rows = monte_carlo(problem, u_eps, rc.threads);
            json table = json::array();
            bool ok = true;
            for (const auto& r : rows) {
                json comps = json::array();
                for (const auto& [name, est] : r.comparisons)
                    comps.push_back({{"policy", name}, {"mean", est.mean}, {"std_error", est.std_error},
                                     {"exit_fraction", est.exit_fraction}});
                table.push_back({{"start", point_json(r.start)},
                                 {"u", r.u},
                                 {"feedback",
                                  {{"mean", r.feedback.mean},
                                   {"std_error", r.feedback.std_error},
                                   {"n_paths", r.feedback.n_paths},
                                   {"exit_fraction", r.feedback.exit_fraction}}},
                                 {"abs_difference", std::abs(r.feedback.mean - r.u)},
                                 {"allowed", 3.0 * r.feedback.std_error + c.simulation.allowance},
                                 {"consistent", r.consistent},
                                 {"comparisons", comps},
                                 {"feedback_optimal", r.feedback_optimal}});
                ok = ok && r.consistent && r.feedback_optimal;
            }
            std::vector<std::string> artifacts{"mc.json"};
            write_json({{"epsilon", eps},
                        {"dt", c.simulation.dt},
                        {"seed", c.simulation.seed},
                        {"all_passed", ok},
                        {"rows", table}},
                       rc.out_dir / "mc.json");
            if (rc.trace_paths > 0 && !c.simulation.starts.empty()) {
                PathConfig pc;
                pc.dt = c.simulation.dt;
                pc.n_paths = c.simulation.paths;
                pc.t_max = c.simulation.t_max;
                pc.seed = c.simulation.seed;
                pc.start = c.simulation.starts.front();
                std::ofstream trace(rc.out_dir / "paths.csv");
                write_path_trace(u_eps, problem.spec, problem.model, {eps, c.blend}, pc, FeedbackPolicy{},
                                 rc.trace_paths, trace);
                artifacts.emplace_back("paths.csv");
            }
            const int status = ok ? exit_code::ok : exit_code::monte_carlo;
            manifest.stage("simulate", since(t0), status, artifacts);
            if (status != exit_code::ok) return status;
        }
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return exit_for(e.kind());
    }
    return exit_code::ok;
}

}  // namespace hjb
