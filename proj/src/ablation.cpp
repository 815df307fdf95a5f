#include "ablab/ablation.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ablab {

const char* scope_name(FinetuneScope s) {
    switch (s) {
        case FinetuneScope::CrossAttention: return "cross_attention";
        case FinetuneScope::Embedding: return "embedding";
        case FinetuneScope::Full: return "full";
    }
    return "?";
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Style: return "style";
        case Variant::Instance: return "instance";
        case Variant::Memorization: return "memorization";
        case Variant::Trademark: return "trademark";
    }
    return "?";
}

const char* method_name(Method m) { return m == Method::NoiseBased ? "noise" : "model"; }

FinetuneScope parse_scope(const std::string& s) {
    if (s == "cross_attention") return FinetuneScope::CrossAttention;
    if (s == "embedding") return FinetuneScope::Embedding;
    if (s == "full") return FinetuneScope::Full;
    throw std::invalid_argument("unknown fine-tune scope '" + s + "'");
}

Variant parse_variant(const std::string& s) {
    if (s == "style") return Variant::Style;
    if (s == "instance") return Variant::Instance;
    if (s == "memorization") return Variant::Memorization;
    if (s == "trademark") return Variant::Trademark;
    throw std::invalid_argument("unknown ablation variant '" + s + "'");
}

Method parse_method(const std::string& s) {
    if (s == "noise") return Method::NoiseBased;
    if (s == "model") return Method::ModelBased;
    throw std::invalid_argument("unknown ablation method '" + s + "'");
}

std::set<std::string> scope_parameters(const Denoiser& model, FinetuneScope scope) {
    switch (scope) {
        case FinetuneScope::CrossAttention: return {pname::key, pname::value};
        case FinetuneScope::Embedding: return {pname::embedding};
        case FinetuneScope::Full: {
            auto names = model.params().names();
            return {names.begin(), names.end()};
        }
    }
    throw std::invalid_argument("unknown fine-tune scope");
}

void select_trainable(Denoiser& model, FinetuneScope scope) {
    model.params().set_trainable(scope_parameters(model, scope));
}

double default_learning_rate(FinetuneScope scope) { return scope == FinetuneScope::Full ? 1e-4 : 5e-4; }

void AblationConfig::validate(const Vocabulary& vocab) const {
    validate_prompt(vocab, target);
    validate_prompt(vocab, anchor);
    if (target == anchor) throw std::invalid_argument("ablation: target and anchor prompts must differ");
    if (batch_size == 0) throw std::invalid_argument("ablation: batch_size must be positive");
    augmentation.validate();
    if (fixed_anchor_pool && anchor_pool_size == 0) throw std::invalid_argument("ablation: anchor pool is empty");
    if (probe_interval > 0 && probe_samples < kMinScoreSamples)
        throw std::invalid_argument("ablation: probe_samples must be at least " + std::to_string(kMinScoreSamples));
    AdamState check(optimizer);
    if (variant == Variant::Trademark) {
        if (scope != FinetuneScope::Full) throw std::invalid_argument("trademark ablation must fine-tune all parameters");
        if (augmentation.enabled) throw std::invalid_argument("trademark ablation must not augment anchor samples");
        if (!logo_token || !anchor.contains(*logo_token))
            throw std::invalid_argument("trademark ablation must anchor on the generic logo token");
    }
}

AblationConfig make_trademark_config(const AblationConfig& base, const Vocabulary& vocab) {
    if (base.variant != Variant::Instance)
        throw std::invalid_argument(std::string("trademark config derives from an instance config, got ") +
                                    variant_name(base.variant));
    if (!base.logo_token) throw std::invalid_argument("trademark config needs a generic logo token");
    if (vocab.slot(*base.logo_token) != TokenKind::Trademark)
        throw std::invalid_argument("logo token '" + vocab.token(*base.logo_token).name +
                                    "' does not stand for trademarks");
    AblationConfig out = base;
    out.variant = Variant::Trademark;
    out.scope = FinetuneScope::Full;
    out.augmentation.enabled = false;
    out.anchor.tokens.clear();
    for (auto t : base.anchor.tokens)
        if (vocab.slot(t) != TokenKind::Trademark) out.anchor.tokens.push_back(t);
    out.anchor.tokens.push_back(*base.logo_token);
    return out;
}

std::vector<std::pair<std::size_t, double>> TrainingLog::probes() const {
    std::vector<std::pair<std::size_t, double>> out;
    if (initial_probe) out.emplace_back(0, *initial_probe);
    for (const auto& r : records)
        if (r.probe) out.emplace_back(r.step, *r.probe);
    return out;
}

Var noise_ablation_loss(Tape& tape, const Denoiser& model, const Tensor& anchor_batch, const Prompt& target,
                        const NoiseDraw& draw, const NoiseSchedule& sched) {
    if (anchor_batch.empty()) throw std::invalid_argument("noise ablation: empty batch");
    Tensor x_t = forward_noise(anchor_batch, draw.t, draw.eps, sched);
    auto out = model.forward(tape, tape.constant(std::move(x_t)), draw.t, target.tokens);
    return diffusion_loss(out.eps, tape.constant(draw.eps), draw.t, sched);
}

Var model_ablation_loss(Tape& tape, const Denoiser& model, const Prompt& anchor, const Prompt& target,
                        const Tensor& anchor_batch, const NoiseDraw& draw, const NoiseSchedule& sched) {
    if (anchor_batch.empty()) throw std::invalid_argument("model ablation: empty batch");
    Var x_t = tape.constant(forward_noise(anchor_batch, draw.t, draw.eps, sched));
    Var anchor_pred = stop_gradient(model.forward(tape, x_t, draw.t, anchor.tokens).eps);
    Var target_pred = model.forward(tape, x_t, draw.t, target.tokens).eps;
    return diffusion_loss(target_pred, anchor_pred, draw.t, sched);
}

Var model_ablation_surrogate(Tape& tape, const Denoiser& model, const Tensor& anchor_prediction,
                             const Prompt& target, const Tensor& anchor_batch, const NoiseDraw& draw,
                             const NoiseSchedule& sched) {
    Var x_t = tape.constant(forward_noise(anchor_batch, draw.t, draw.eps, sched));
    Var target_pred = model.forward(tape, x_t, draw.t, target.tokens).eps;
    return diffusion_loss(target_pred, tape.constant(anchor_prediction), draw.t, sched);
}

double noise_ablation_step(Denoiser& model, AdamState& adam, const Tensor& anchor_batch, const Prompt& target,
                           const NoiseSchedule& sched, Rng& rng) {
    if (anchor_batch.empty()) throw std::invalid_argument("noise ablation: empty batch");
    const NoiseDraw draw = draw_noise(anchor_batch.rows(), anchor_batch.cols(), sched, rng);
    model.params().zero_grads();
    Tape tape(model.params());
    Var loss = noise_ablation_loss(tape, model, anchor_batch, target, draw, sched);
    tape.backward(loss);
    adam_step(model.params(), adam);
    return loss.value()[0];
}

double model_ablation_step(Denoiser& model, AdamState& adam, const Prompt& anchor, const Prompt& target,
                           const Tensor& anchor_batch, const NoiseSchedule& sched, Rng& rng) {
    if (anchor_batch.empty()) throw std::invalid_argument("model ablation: empty batch");
    const NoiseDraw draw = draw_noise(anchor_batch.rows(), anchor_batch.cols(), sched, rng);
    model.params().zero_grads();
    Tape tape(model.params());
    Var loss = model_ablation_loss(tape, model, anchor, target, anchor_batch, draw, sched);
    tape.backward(loss);
    adam_step(model.params(), adam);
    return loss.value()[0];
}

double frozen_reference_loss(const Denoiser& model, const Denoiser& frozen, const Prompt& anchor,
                             const Prompt& target, const Tensor& anchor_batch, const NoiseSchedule& sched, Rng& rng) {
    if (!(model.config() == frozen.config())) throw std::invalid_argument("frozen snapshot has a different architecture");
    for (const auto& [name, v] : model.params().values())
        if (!frozen.params().contains(name) || frozen.params().value(name).shape() != v.shape())
            throw std::invalid_argument("frozen snapshot disagrees on parameter '" + name + "'");
    const NoiseDraw draw = draw_noise(anchor_batch.rows(), anchor_batch.cols(), sched, rng);
    const Tensor x_t = forward_noise(anchor_batch, draw.t, draw.eps, sched);
    const Tensor anchor_pred = predict_eps(frozen, x_t, anchor.tokens, draw.t);
    Tape tape(model.params());
    Var target_pred = model.forward(tape, tape.constant(x_t), draw.t, target.tokens).eps;
    return diffusion_loss(target_pred, tape.constant(anchor_pred), draw.t, sched).value()[0];
}

double probe_target_score(const Denoiser& model, const Prompt& target, const CandidateSet& candidates,
                          const NoiseSchedule& sched, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const Tensor samples = ddpm_sample(model, target.tokens, sched, n, rng);
    return alignment_score(samples, target, candidates).posterior;
}

namespace {

class AnchorSampler {
public:
    AnchorSampler(const AblationConfig& cfg, const Denoiser& baseline, const Vocabulary& vocab,
                  const NoiseSchedule& sched)
        : cfg_(cfg), baseline_(baseline), vocab_(vocab), sched_(sched), rng_(derive_seed(cfg.seed, "anchor-data")) {}

    Tensor batch(const Prompt& anchor) {
        if (!cfg_.fixed_anchor_pool) return draw(anchor, cfg_.batch_size);
        auto it = pools_.find(anchor);
        if (it == pools_.end()) it = pools_.emplace(anchor, draw(anchor, cfg_.anchor_pool_size)).first;
        const Tensor& pool = it->second;
        Tensor out({cfg_.batch_size, pool.cols()});
        for (std::size_t i = 0; i < cfg_.batch_size; ++i) {
            const auto r = pool.row(uniform_index(rng_, pool.rows()));
            std::copy(r.begin(), r.end(), out.row(i).begin());
        }
        return out;
    }

private:
    Tensor draw(const Prompt& anchor, std::size_t n) {
        if (cfg_.anchor_source == AnchorSource::Model) return ddpm_sample(baseline_, anchor.tokens, sched_, n, rng_);
        return sample_ground_truth(vocab_, anchor, n, rng_);
    }

    const AblationConfig& cfg_;
    const Denoiser& baseline_;
    const Vocabulary& vocab_;
    const NoiseSchedule& sched_;
    Rng rng_;
    std::map<Prompt, Tensor> pools_;
};

}  // namespace

AblationResult run_ablation(const AblationConfig& cfg, const Denoiser& baseline, const Vocabulary& vocab,
                            const NoiseSchedule& sched, const CandidateSet* probe_candidates) {
    cfg.validate(vocab);
    if (baseline.config().vocab_size != vocab.size())
        throw std::invalid_argument("ablation: model vocabulary size does not match the vocabulary");
    AblationResult res{baseline, {}};
    res.log.probe_interval = cfg.probe_interval;
    if (cfg.steps == 0) return res;

    Denoiser& model = res.model;
    select_trainable(model, cfg.scope);
    AdamState adam(cfg.optimizer);
    const auto pairs = compose_prompts(vocab, cfg.target, cfg.anchor, cfg.steps);
    AnchorSampler anchors(cfg, baseline, vocab, sched);
    Rng noise_rng(derive_seed(cfg.seed, "ablation-noise"));
    Rng aug_rng(derive_seed(cfg.seed, "augment"));
    const bool probing = cfg.probe_interval > 0 && probe_candidates != nullptr;
    const auto probe = [&](std::size_t step) {
        return probe_target_score(model, cfg.target, *probe_candidates, sched, cfg.probe_samples,
                                  derive_seed(cfg.seed, "probe-" + std::to_string(step)));
    };

    const auto start = std::chrono::steady_clock::now();
    if (probing) res.log.initial_probe = probe(0);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const PromptPair& pair = pairs[step - 1];
        const Tensor batch = augment(anchors.batch(pair.anchor), cfg.augmentation, aug_rng);
        StepRecord rec;
        rec.step = step;
        rec.loss = cfg.method == Method::NoiseBased
                       ? noise_ablation_step(model, adam, batch, pair.training, sched, noise_rng)
                       : model_ablation_step(model, adam, pair.anchor, pair.training, batch, sched, noise_rng);
        if (!std::isfinite(rec.loss))
            throw AblationDiverged("ablation: loss diverged at step " + std::to_string(step), res.log);
        if (probing && (step % cfg.probe_interval == 0 || step == cfg.steps)) rec.probe = probe(step);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        res.log.records.push_back(rec);
    }
    return res;
}

}  // namespace ablab
