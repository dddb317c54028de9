#pragma once

#include "hjb/config.hpp"
#include "hjb/pipeline.hpp"

#include <filesystem>
#include <string>

namespace hjb::testing {

inline std::filesystem::path source_dir() { return HJB_SOURCE_DIR; }

inline Config reference_config() { return load_config(source_dir() / "configs" / "reference.toml"); }

/// No jumps, no drift, unit diffusion.
inline Config plain_config(double q, SourceTerm h, int n) {
    Config c;
    c.problem.q = q;
    c.problem.source = std::move(h);
    c.levy.sigma = Eigen::Matrix2d::Identity();
    c.grid_n = n;
    return c;
}

inline Problem small_reference(int n) {
    Config c = reference_config();
    c.grid_n = n;
    return prepare(std::move(c));
}

/// Fresh scratch directory under the system temp directory.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("hjb_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace hjb::testing
