#pragma once

#include <vector>

#include "ablab/denoiser.hpp"
#include "ablab/vocabulary.hpp"

namespace ablab {

struct PromptPair {
    Prompt training;  // target tokens + context
    Prompt anchor;    // anchor tokens + the same context
};

// Context tokens compatible with both prompts: fillers and style tokens not
// already used, never synonyms, never generics standing for a concept kind.
std::vector<std::size_t> context_pool(const Vocabulary& vocab, const Prompt& target, const Prompt& anchor);

// n training pairs, cycling round-robin through the context pool.
std::vector<PromptPair> compose_prompts(const Vocabulary& vocab, const Prompt& target, const Prompt& anchor,
                                        std::size_t n);

struct AugmentationConfig {
    bool enabled = false;
    double jitter = 0.0;
    double rescale_lo = 1.0;
    double rescale_hi = 1.0;

    void validate() const;
};

// Disabled: returns the input unchanged. Enabled: adds N(0, jitter²) noise and
// multiplies each row by a scale uniform in [lo, hi].
Tensor augment(const Tensor& batch, const AugmentationConfig& cfg, Rng& rng);

// Rows of the model's token-embedding table for the prompt.
Tensor embed_prompt(const Denoiser& model, const Prompt& prompt);

}  // namespace ablab
