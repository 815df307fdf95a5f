#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "ablab/params.hpp"

namespace ablab {

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamHyper hyper;
    std::uint64_t step = 0;
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;

    explicit AdamState(AdamHyper h = {});
};

// Bias-corrected Adam update of every trainable parameter. Moments are
// created lazily; frozen parameters are never touched.
void adam_step(ParamSet& params, AdamState& state);

// Loss callback for gradient checks: evaluates the loss at the current
// parameter values and accumulates its analytic gradient into params' grads.
using LossFn = std::function<double(ParamSet&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
};

// Central-difference comparison over every trainable entry. The relative
// error denominator is floored at 1e-8.
GradCheckResult grad_check_detailed(const LossFn& loss_fn, ParamSet params, double step = 1e-5);
double grad_check(const LossFn& loss_fn, const ParamSet& params, double step = 1e-5);

}  // namespace ablab
