#pragma once

#include <string>
#include <vector>

namespace ablab {

struct GradCheckRow {
    std::string name;
    double max_rel_error = 0.0;
    double threshold = 0.0;
    std::size_t entries = 0;
    bool pass() const { return max_rel_error < threshold; }
};

// Finite-difference checks of every differentiable op (tolerance 1e-5) and
// of both ablation losses under each fine-tune scope (tolerance 1e-4), on a
// small randomly initialised denoiser with fixed randomness.
std::vector<GradCheckRow> op_gradcheck_suite();
std::vector<GradCheckRow> loss_gradcheck_suite();

}  // namespace ablab
