#pragma once

#include <string>
#include <string_view>

#include "specstab/diagnostics.hpp"
#include "specstab/train.hpp"

namespace specstab {

// JSON reports carry "schema": "v1" and a "kind" tag. Doubles are written in
// shortest round-trip form; non-finite values become the strings "nan",
// "inf", "-inf".

std::string profile_json(const StabilityProfile& p);
std::string sensitivity_json(const SensitivityReport& r);
SensitivityReport parse_sensitivity_json(std::string_view text);
std::string serr_json(const std::vector<SerrResult>& sweep);
std::vector<SerrResult> parse_serr_json(std::string_view text);
std::string attribution_json(const AttributionDiagnostics& unstable, const AttributionDiagnostics& stable);
std::string forward_stability_json(const ForwardStabilityReport& r);
std::string attribution_stability_json(const AttributionStabilityReport& r);

/// Per-sample rows for plotting: index, ‖J‖₂, H_S, SC(1/4), SC(1/2), ACN, ‖∇θf‖₂, λ_max(H).
std::string profile_csv(const StabilityProfile& p);

}  // namespace specstab
