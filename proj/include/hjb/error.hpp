#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hjb {

enum class ErrorKind {
    InvalidConfig,
    NonPositiveDefinite,
    DivergentMeasure,
    MonotonicityViolation,
    ExtensionBoundViolated,
    SingularSystem,
    NoConvergence,
    ContractionViolated,
    BarrierNotFound,
    RejectionStall,
    HypothesisFailed,
    MissingArtifact,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NonPositiveDefinite: return "NonPositiveDefinite";
    case ErrorKind::DivergentMeasure: return "DivergentMeasure";
    case ErrorKind::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorKind::ExtensionBoundViolated: return "ExtensionBoundViolated";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ContractionViolated: return "ContractionViolated";
    case ErrorKind::BarrierNotFound: return "BarrierNotFound";
    case ErrorKind::RejectionStall: return "RejectionStall";
    case ErrorKind::HypothesisFailed: return "HypothesisFailed";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// that callers (notably the CLI) can map it to an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hjb
