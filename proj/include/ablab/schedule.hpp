#pragma once

#include <cstddef>
#include <vector>

#include "ablab/tensor.hpp"

namespace ablab {

// Linear-beta DDPM schedule. alpha_bar[t] is the cumulative signal fraction
// Π_{s≤t}(1 − beta[s]); weight[t] is the per-timestep loss weight.
struct NoiseSchedule {
    std::size_t steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;
    std::vector<double> weight;

    // Variance of q(x_{t−1} | x_t, x_0); zero at t = 0.
    double posterior_variance(std::size_t t) const;
};

NoiseSchedule build_schedule(std::size_t steps, double beta_min, double beta_max);

// √ᾱ_t·x0 + √(1−ᾱ_t)·eps
Tensor forward_noise(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched);
// Per-row timesteps.
Tensor forward_noise(const Tensor& x0, const std::vector<std::size_t>& t, const Tensor& eps,
                     const NoiseSchedule& sched);

}  // namespace ablab
