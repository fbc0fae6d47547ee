#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace blockscramble {

// Analytic gradients against central differences. Errors are tensor-level:
// |a - n|_2 / max(|a|_2, |n|_2) over the sampled coordinates.
struct GradCheckOptions {
    std::size_t draws = 20;
    std::size_t coords_per_tensor = 12;
    double delta = 1e-5;
    double loss_tolerance = 1e-5;      // loss_u, loss_s on their own
    double end_to_end_tolerance = 1e-4; // full objective through the model
    std::uint64_t seed = 1;
};

struct GradCheckResult {
    std::string name;
    std::size_t draws = 0;
    std::size_t failures = 0;
    double worst_error = 0.0;
    double tolerance = 0.0;
    bool passed() const noexcept { return failures == 0; }
};

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options);

} // namespace blockscramble
