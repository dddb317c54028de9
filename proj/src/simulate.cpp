#include "hjb/simulate.hpp"

#include "hjb/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

namespace hjb {

namespace {

constexpr double kMinAcceptance = 1e-3;
constexpr int kMaxAttempts = 1000000;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

class IncrementSampler {
public:
    IncrementSampler(const LevyModel& model, const JumpSampler& jumps, double dt)
        : jumps_(jumps),
          chol_(Eigen::LLT<Eigen::Matrix2d>(model.sigma).matrixL()),
          drift_(model.gamma_tilde * dt),
          sqrt_dt_(std::sqrt(dt)),
          has_jumps_(model.nu0 > 0.0),
          poisson_(has_jumps_ ? model.nu0 * dt : 1.0) {}

    Point operator()(Rng& rng) {
        const Point xi(normal_(rng), normal_(rng));
        Point inc = drift_ + sqrt_dt_ * (chol_ * xi);
        if (has_jumps_) {
            const int count = poisson_(rng);
            for (int c = 0; c < count; ++c) inc += jumps_.draw(rng);
        }
        return inc;
    }

private:
    const JumpSampler& jumps_;
    Eigen::Matrix2d chol_;
    Point drift_;
    double sqrt_dt_;
    bool has_jumps_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::poisson_distribution<int> poisson_;
};

}  // namespace

JumpSampler::JumpSampler(const LevyModel& model) : model_(&model) {
    if (model.kappa.empty() || model.nu0 <= 0.0) return;
    bound_ = model.kappa.upper_bound();
    radius_ = model.jump_support_radius;
    acceptance_ = model.nu0 / (bound_ * std::numbers::pi * radius_ * radius_);
    if (!(acceptance_ >= kMinAcceptance)) {
        std::ostringstream os;
        os << "expected rejection acceptance rate " << acceptance_ << " is below " << kMinAcceptance;
        throw Error(ErrorKind::RejectionStall, os.str());
    }
}

Point JumpSampler::draw(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const double r = radius_ * std::sqrt(unit(rng));
        const double th = 2.0 * std::numbers::pi * unit(rng);
        const Point z(r * std::cos(th), r * std::sin(th));
        if (unit(rng) * bound_ <= model_->kappa(z)) return z;
    }
    throw Error(ErrorKind::RejectionStall, "jump rejection sampler exceeded its attempt cap");
}

Point sample_levy_increment(const LevyModel& model, const JumpSampler& jumps, double dt, Rng& rng) {
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidConfig, "dt must be positive");
    IncrementSampler sampler(model, jumps, dt);
    return sampler(rng);
}

std::string policy_name(const ControlPolicy& p) {
    return std::visit(overloaded{
                          [](const FeedbackPolicy&) { return std::string("feedback"); },
                          [](const ZeroPolicy&) { return std::string("zero"); },
                          [](const ConstantPush&) { return std::string("constant_push"); },
                      },
                      p);
}

Rng path_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

namespace {

struct PathOutcome {
    double cost = 0.0;
    bool exited = false;
};

class PathRunner {
public:
    PathRunner(const ScalarField& u_eps, const ProblemSpec& spec, const LevyModel& model, const PenaltySpec& penalty,
               const PathConfig& cfg, const ControlPolicy& policy)
        : spec_(spec), model_(model), penalty_(penalty), cfg_(cfg), grad_(gradient(u_eps)), jumps_(model) {
        if (!(cfg.dt > 0.0) || cfg.n_paths < 2)
            throw Error(ErrorKind::InvalidConfig, "need dt > 0 and at least 2 paths");
        if (cfg.start.norm() >= spec.R) throw Error(ErrorKind::InvalidConfig, "start point must lie inside the ball");
        const double t_max = cfg.t_max > 0.0 ? cfg.t_max : -std::log(1e-6) / spec.q;
        steps_ = static_cast<long>(std::ceil(t_max / cfg.dt));
        step_discount_ = std::exp(-spec.q * cfg.dt);
        if (const auto* c = std::get_if<ConstantPush>(&policy)) {
            push_ = c->eta;
            push_cost_ = legendre(push_, penalty);
        }
        feedback_ = std::holds_alternative<FeedbackPolicy>(policy);
    }

    PathOutcome run(std::uint64_t index, std::vector<Point>* trace = nullptr) const {
        IncrementSampler increment(model_, jumps_, cfg_.dt);
        Rng rng = path_rng(cfg_.seed, index);
        Point x = cfg_.start;
        PathOutcome out;
        double discount = 1.0;
        if (trace) trace->push_back(x);
        for (long n = 0; n < steps_; ++n) {
            Point eta = push_;
            double l = push_cost_;
            if (feedback_) {
                const Point p = interpolate_in_ball(grad_, x);
                eta = optimal_control(p, penalty_);
                l = control_cost(p, penalty_);
            }
            const double h = evaluate_source(spec_.source, x).value;
            out.cost += discount * (h + l) * cfg_.dt;
            discount *= step_discount_;
            x += increment(rng) - eta * cfg_.dt;
            if (trace) trace->push_back(x);
            if (x.norm() >= spec_.R) {
                out.exited = true;
                break;
            }
        }
        return out;
    }

private:
    const ProblemSpec& spec_;
    const LevyModel& model_;
    PenaltySpec penalty_;
    const PathConfig& cfg_;
    VectorField grad_;
    JumpSampler jumps_;
    long steps_ = 0;
    double step_discount_ = 1.0;
    Point push_ = Point::Zero();
    double push_cost_ = 0.0;
    bool feedback_ = false;
};

}  // namespace

CostEstimate simulate_value(const ScalarField& u_eps, const ProblemSpec& spec, const LevyModel& model,
                            const PenaltySpec& penalty, const PathConfig& cfg, const ControlPolicy& policy) {
    const PathRunner runner(u_eps, spec, model, penalty, cfg, policy);
    std::vector<PathOutcome> outcomes(static_cast<std::size_t>(cfg.n_paths));
    auto work = [&](int first, int stride) {
        for (int i = first; i < cfg.n_paths; i += stride)
            outcomes[static_cast<std::size_t>(i)] = runner.run(static_cast<std::uint64_t>(i));
    };
    const int workers = std::max(1, std::min(cfg.threads, cfg.n_paths));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
        for (auto& th : pool) th.join();
    }

    CostEstimate est;
    est.n_paths = cfg.n_paths;
    double sum = 0.0;
    int n_exit = 0;
    for (const auto& o : outcomes) {
        sum += o.cost;
        n_exit += o.exited ? 1 : 0;
    }
    est.mean = sum / cfg.n_paths;
    double ss = 0.0;
    for (const auto& o : outcomes) ss += (o.cost - est.mean) * (o.cost - est.mean);
    est.std_error = std::sqrt(ss / (cfg.n_paths - 1)) / std::sqrt(static_cast<double>(cfg.n_paths));
    est.exit_fraction = static_cast<double>(n_exit) / cfg.n_paths;
    return est;
}

void write_path_trace(const ScalarField& u_eps, const ProblemSpec& spec, const LevyModel& model,
                      const PenaltySpec& penalty, const PathConfig& cfg, const ControlPolicy& policy, int count,
                      std::ostream& os) {
    const PathRunner runner(u_eps, spec, model, penalty, cfg, policy);
    count = std::clamp(count, 0, std::min(100, cfg.n_paths));
    char buf[128];
    os << "path,step,t,x1,x2\n";
    for (int i = 0; i < count; ++i) {
        std::vector<Point> trace;
        runner.run(static_cast<std::uint64_t>(i), &trace);
        for (std::size_t n = 0; n < trace.size(); ++n) {
            std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g\n", i, n, static_cast<double>(n) * cfg.dt,
                          trace[n][0], trace[n][1]);
            os << buf;
        }
    }
}

}  // namespace hjb
