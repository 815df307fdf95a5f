#include "ablab/prompts.hpp"

#include <stdexcept>

namespace ablab {

std::vector<std::size_t> context_pool(const Vocabulary& vocab, const Prompt& target, const Prompt& anchor) {
    const auto has_style = [&](const Prompt& p) {
        for (auto t : p.tokens)
            if (vocab.slot(t) == TokenKind::Style) return true;
        return false;
    };
    const bool styles_ok = !has_style(target) && !has_style(anchor);
    std::vector<std::size_t> pool;
    for (const auto& tok : vocab.tokens()) {
        if (tok.kind == TokenKind::Synonym) continue;
        if (target.contains(tok.id) || anchor.contains(tok.id)) continue;
        if (vocab.is_filler(tok.id) || (styles_ok && tok.kind == TokenKind::Style)) pool.push_back(tok.id);
    }
    return pool;
}

std::vector<PromptPair> compose_prompts(const Vocabulary& vocab, const Prompt& target, const Prompt& anchor,
                                        std::size_t n) {
    validate_prompt(vocab, target);
    validate_prompt(vocab, anchor);
    if (target == anchor) throw std::invalid_argument("compose_prompts: target and anchor prompts are identical");
    for (auto t : target.tokens)
        if (vocab.is_synonym(t)) throw std::invalid_argument("compose_prompts: target prompt contains a synonym token");
    for (auto t : anchor.tokens)
        if (vocab.is_synonym(t)) throw std::invalid_argument("compose_prompts: anchor prompt contains a synonym token");
    const auto pool = context_pool(vocab, target, anchor);
    if (pool.empty())
        throw std::invalid_argument("compose_prompts: vocabulary has no context tokens compatible with \"" +
                                    prompt_text(vocab, target) + "\"");
    std::vector<PromptPair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ctx = pool[i % pool.size()];
        PromptPair p{target, anchor};
        p.training.tokens.push_back(ctx);
        p.anchor.tokens.push_back(ctx);
        out.push_back(std::move(p));
    }
    return out;
}

void AugmentationConfig::validate() const {
    if (jitter < 0) throw std::invalid_argument("augmentation jitter must be non-negative");
    if (!(rescale_lo <= 1.0 && 1.0 <= rescale_hi && rescale_lo > 0))
        throw std::invalid_argument("augmentation rescale range must satisfy 0 < lo <= 1 <= hi");
}

Tensor augment(const Tensor& batch, const AugmentationConfig& cfg, Rng& rng) {
    if (!cfg.enabled) return batch;
    cfg.validate();
    Tensor out = batch;
    const std::size_t d = out.cols();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] += cfg.jitter * standard_normal(rng);
        const double s = uniform(rng, cfg.rescale_lo, cfg.rescale_hi);
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] *= s;
    }
    return out;
}

Tensor embed_prompt(const Denoiser& model, const Prompt& prompt) {
    Tape tape(model.params());
    for (auto id : prompt.tokens)
        if (id >= model.config().vocab_size) throw std::out_of_range("embed_prompt: unknown token id " + std::to_string(id));
    return embed_tokens(tape, prompt.tokens).value();
}

}  // namespace ablab
