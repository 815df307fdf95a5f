#pragma once

#include <cstdint>
#include <vector>

#include "ablab/diffusion.hpp"
#include "ablab/vocabulary.hpp"

namespace ablab {

struct PretrainConfig {
    std::size_t steps = 6000;
    // Rows drawn per concept per step.
    std::size_t batch_size = 16;
    double learning_rate = 2e-3;
    // Learning rate decays linearly to this fraction by the last step.
    double final_lr_fraction = 0.1;
    // Exponential moving average of the weights; the average is returned.
    // Zero disables it.
    double ema_decay = 0.995;
    std::vector<Prompt> concepts;
    // Chance that a concept prompt is extended by one context token.
    double context_probability = 0.5;
};

// Trains a fresh denoiser on ground-truth samples of every configured concept
// with the standard objective. Deterministic in `seed`.
Denoiser pretrain_baseline(const PretrainConfig& cfg, const DenoiserConfig& arch, const Vocabulary& vocab,
                           const NoiseSchedule& sched, std::uint64_t seed, std::vector<double>* losses = nullptr);

}  // namespace ablab
