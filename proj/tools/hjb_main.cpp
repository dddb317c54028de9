// Command-line driver: validate / solve / verify / simulate / all.

#include "hjb/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <thread>

namespace {

std::vector<double> parse_schedule(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_level(spdlog::level::info);
    if (const char* lvl = std::getenv("HJB_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));

    CLI::App app{"Penalized HJB solver with Monte Carlo cross-check"};
    app.require_subcommand(1, 1);

    hjb::RunConfig rc;
    std::string schedule;
    rc.threads = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", rc.config_path, "TOML or JSON configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", rc.out_dir, "output directory")->default_val("out");
        sub->add_option("--eps-schedule", schedule, "comma separated, strictly decreasing");
        sub->add_option("--grid", rc.grid_n, "points per axis")->check(CLI::Range(9, 4097));
        sub->add_option("--paths", rc.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
        sub->add_option("--seed", rc.seed, "Monte Carlo seed");
        sub->add_option("--threads", rc.threads, "worker cap")->check(CLI::PositiveNumber);
        sub->add_flag("--check-only", rc.check_only, "validate the hypotheses and stop");
        sub->add_option("--trace-paths", rc.trace_paths, "write paths.csv for this many paths (<= 100)")
            ->check(CLI::Range(0, 100));
    };

    const std::pair<const char*, hjb::Stage> stages[] = {
        {"validate", hjb::Stage::Validate}, {"solve", hjb::Stage::Solve},       {"verify", hjb::Stage::Verify},
        {"simulate", hjb::Stage::Simulate}, {"all", hjb::Stage::All},
    };
    for (const auto& [name, stage] : stages) {
        CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
        add_common(sub);
        sub->callback([&rc, stage = stage] { rc.stage = stage; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : hjb::exit_code::usage;
    }

    try {
        if (!schedule.empty()) rc.eps_schedule = parse_schedule(schedule);
    } catch (const std::exception&) {
        spdlog::error("cannot parse --eps-schedule '{}'", schedule);
        return hjb::exit_code::usage;
    }
    return hjb::run(rc);
}
