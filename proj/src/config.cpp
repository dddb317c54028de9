#include "hjb/config.hpp"

#include "hjb/error.hpp"

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <fstream>
#include <sstream>

namespace hjb {

namespace {

using json = nlohmann::json;

Point read_point(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::InvalidConfig, what + " must be a 2-vector");
    return {j[0].get<double>(), j[1].get<double>()};
}

Eigen::Matrix2d read_matrix(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorKind::InvalidConfig, what + " must be a 2x2 matrix");
    Eigen::Matrix2d m;
    for (int r = 0; r < 2; ++r) {
        const Point row = read_point(j[static_cast<std::size_t>(r)], what);
        m.row(r) = row.transpose();
    }
    return m;
}

SourceTerm read_source(const json& j) {
    const std::string family = j.value("family", "constant");
    if (family == "constant") return ConstantSource{j.value("value", 1.0)};
    if (family == "quadratic") return QuadraticSource{j.value("c0", 0.0), j.value("c2", 0.0)};
    if (family == "bump")
        return BumpSource{j.value("base", 0.0), j.value("amplitude", 1.0),
                          j.contains("center") ? read_point(j["center"], "source.center") : Point::Zero(),
                          j.value("width", 0.25)};
    throw Error(ErrorKind::InvalidConfig, "unknown source family '" + family + "'");
}

JumpDensity read_jumps(const json& j) {
    const std::string family = j.value("family", "none");
    if (family == "none") return NoJumps{};
    if (family == "uniform_annulus") {
        const double ri = j.value("r_inner", 0.1);
        const double ro = j.value("r_outer", 0.5);
        if (!(ri >= 0.0 && ro > ri)) throw Error(ErrorKind::InvalidConfig, "annulus needs 0 <= r_inner < r_outer");
        const double c = j.contains("mass") ? annulus_density_for_mass(j["mass"].get<double>(), ri, ro)
                                            : j.value("density", 1.0);
        return UniformAnnulus{c, ri, ro};
    }
    if (family == "truncated_gaussian")
        return TruncatedGaussian{j.value("density", 1.0),
                                 j.contains("mean") ? read_point(j["mean"], "jumps.mean") : Point::Zero(),
                                 j.value("std_dev", 0.2), j.value("truncation", 0.6)};
    if (family == "radial_exponential") return RadialExponential{j.value("density", 1.0), j.value("length", 0.05)};
    throw Error(ErrorKind::InvalidConfig, "unknown jump family '" + family + "'");
}

ControlPolicy read_policy(const json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "zero") return ZeroPolicy{};
        if (name == "feedback") return FeedbackPolicy{};
        throw Error(ErrorKind::InvalidConfig, "unknown policy '" + name + "'");
    }
    if (j.is_object() && j.contains("push")) return ConstantPush{read_point(j["push"], "policy push")};
    throw Error(ErrorKind::InvalidConfig, "policy must be \"zero\", \"feedback\" or {push = [a, b]}");
}

Config from_json(const json& doc) {
    Config cfg;
    const json empty = json::object();
    auto section = [&](const char* name) -> const json& { return doc.contains(name) ? doc[name] : empty; };

    const json& p = section("problem");
    cfg.problem.R = p.value("R", cfg.problem.R);
    cfg.problem.b = p.value("b", cfg.problem.b);
    cfg.problem.q = p.value("q", cfg.problem.q);
    cfg.problem.A0 = p.value("A0", cfg.problem.A0);
    cfg.problem.d = p.value("d", cfg.problem.d);
    if (p.contains("C0")) cfg.problem.C0 = p["C0"].get<double>();
    cfg.problem.source = read_source(section("source"));

    const json& l = section("levy");
    if (l.contains("gamma")) cfg.levy.gamma = read_point(l["gamma"], "levy.gamma");
    if (l.contains("sigma")) cfg.levy.sigma = read_matrix(l["sigma"], "levy.sigma");
    cfg.levy.kappa = read_jumps(l.contains("jumps") ? l["jumps"] : empty);

    const json& q = section("quadrature");
    cfg.levy.quadrature.resolution.radial = q.value("radial", cfg.levy.quadrature.resolution.radial);
    cfg.levy.quadrature.resolution.angular = q.value("angular", cfg.levy.quadrature.resolution.angular);
    cfg.levy.quadrature.relative_tolerance = q.value("tolerance", cfg.levy.quadrature.relative_tolerance);

    cfg.grid_n = section("grid").value("n", cfg.grid_n);

    const json& pen = section("penalty");
    if (pen.contains("schedule")) cfg.eps_schedule = pen["schedule"].get<std::vector<double>>();
    const std::string blend = pen.value("blend", "piecewise");
    if (blend == "piecewise")
        cfg.blend = Blend::Piecewise;
    else if (blend == "smooth")
        cfg.blend = Blend::Smooth;
    else
        throw Error(ErrorKind::InvalidConfig, "penalty.blend must be 'piecewise' or 'smooth'");

    const json& s = section("solver");
    cfg.solver.outer_tolerance = s.value("outer_tolerance", cfg.solver.outer_tolerance);
    cfg.solver.outer_max_iterations = s.value("outer_max_iterations", cfg.solver.outer_max_iterations);
    cfg.solver.ratio_slack = s.value("ratio_slack", cfg.solver.ratio_slack);
    cfg.solver.inner_max_iterations = s.value("inner_max_iterations", cfg.solver.inner_max_iterations);
    cfg.solver.linear_tolerance = s.value("linear_tolerance", cfg.solver.linear_tolerance);

    const json& m = section("simulation");
    auto& sim = cfg.simulation;
    sim.epsilon = m.value("epsilon", sim.epsilon);
    sim.dt = m.value("dt", sim.dt);
    sim.paths = m.value("paths", sim.paths);
    sim.t_max = m.value("t_max", sim.t_max);
    sim.seed = m.value("seed", sim.seed);
    sim.allowance = m.value("allowance", sim.allowance);
    if (m.contains("starts")) {
        sim.starts.clear();
        for (const auto& x : m["starts"]) sim.starts.push_back(read_point(x, "simulation.starts"));
    }
    if (m.contains("comparisons")) {
        sim.comparisons.clear();
        for (const auto& x : m["comparisons"]) sim.comparisons.push_back(read_policy(x));
    }

    const json& v = section("verification");
    auto& ver = cfg.verification;
    ver.uniqueness_epsilon = v.value("uniqueness_epsilon", ver.uniqueness_epsilon);
    ver.slack_band = v.value("slack_band", ver.slack_band);
    ver.residual_factor = v.value("residual_factor", ver.residual_factor);
    ver.gradient_spread = v.value("gradient_spread", ver.gradient_spread);
    ver.penalty_spread = v.value("penalty_spread", ver.penalty_spread);

    cfg.echo = doc.dump(2);
    return cfg;
}

}  // namespace

Config parse_config(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    try {
        if (first != std::string::npos && text[first] == '{') return from_json(json::parse(text));
        const toml::table tbl = toml::parse(text);
        std::ostringstream os;
        os << toml::json_formatter{tbl};
        return from_json(json::parse(os.str()));
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "TOML parse error: " << e.description() << " at line " << e.source().begin.line;
        throw Error(ErrorKind::InvalidConfig, os.str());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, std::string("config error: ") + e.what());
    }
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace hjb
