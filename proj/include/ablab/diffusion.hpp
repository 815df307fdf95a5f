#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ablab/denoiser.hpp"
#include "ablab/optim.hpp"
#include "ablab/schedule.hpp"

namespace ablab {

// Clean samples paired with the prompt they were generated under.
struct ConditionedBatch {
    std::vector<std::size_t> prompt;
    Tensor x0;
};

// Fixed randomness for one diffusion-loss evaluation.
struct NoiseDraw {
    std::vector<std::size_t> t;
    Tensor eps;
};

NoiseDraw draw_noise(std::size_t rows, std::size_t dim, const NoiseSchedule& sched, Rng& rng);

// Σ_i w_{t_i}·mean_j (pred − target)² / n on the tape.
Var diffusion_loss(Var pred, Var target, std::span<const std::size_t> t, const NoiseSchedule& sched);

// Row-weighted mean of per-group losses; each group contributes by its row count.
Var combine_group_losses(const std::vector<Var>& losses, const std::vector<std::size_t>& rows);

// Standard ε-prediction objective for the given fixed draws.
Var standard_loss(Tape& tape, const Denoiser& model, std::span<const ConditionedBatch> batches,
                  std::span<const NoiseDraw> draws, const NoiseSchedule& sched);

// One optimisation step of the standard objective: draws t and ε for every
// row, backpropagates, and applies Adam to the trainable parameters.
double train_step_standard(Denoiser& model, AdamState& adam, std::span<const ConditionedBatch> batches,
                           const NoiseSchedule& sched, Rng& rng);

using EpsPredictor = std::function<Tensor(const Tensor& x_t, std::size_t t)>;

// Ancestral DDPM sampler: x_T ~ N(0, I), then the posterior mean using ε̂
// plus √β̃_t·z noise for every t > 0.
Tensor ddpm_sample(const EpsPredictor& predict, std::size_t dim, const NoiseSchedule& sched, std::size_t n, Rng& rng);
Tensor ddpm_sample(const Denoiser& model, std::span<const std::size_t> prompt, const NoiseSchedule& sched,
                   std::size_t n, Rng& rng);

}  // namespace ablab
