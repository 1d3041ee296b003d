#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "specstab/matrix.hpp"
#include "specstab/random.hpp"

namespace specstab {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct SelftestOptions {
    std::uint64_t seed = 20240917;
    std::size_t threads = 1;
};

// Invariant checks run by `specstab selftest`. Each is deterministic in the seed.
CheckResult check_jacobian_identification(const SelftestOptions& o);
CheckResult check_ntk_spectrum(const SelftestOptions& o);
CheckResult check_flow_closed_form(const SelftestOptions& o);
CheckResult check_sensitivity_bound(const SelftestOptions& o);
CheckResult check_flow_majorization(const SelftestOptions& o);
CheckResult check_entropy_majorization(const SelftestOptions& o);
CheckResult check_forward_stability(const SelftestOptions& o);
CheckResult check_step_size_guard(const SelftestOptions& o);

std::vector<CheckResult> run_selftest(const SelftestOptions& o,
                                      const std::function<void(const CheckResult&)>& on_result = {});

/// Majorization pair (a, b) with a ≻ b: a is a unit-trace Dirichlet(1)
/// spectrum of random length r ∈ [2, 16], b follows from one Robin-Hood
/// transfer of a random fraction of the gap between a richer and a poorer entry.
std::pair<Vector, Vector> robin_hood_pair(Rng& rng);

}  // namespace specstab
