#include "ablab/pretrain.hpp"

#include <cmath>
#include <stdexcept>

#include "ablab/ground_truth.hpp"
#include "ablab/prompts.hpp"

namespace ablab {

Denoiser pretrain_baseline(const PretrainConfig& cfg, const DenoiserConfig& arch, const Vocabulary& vocab,
                           const NoiseSchedule& sched, std::uint64_t seed, std::vector<double>* losses) {
    if (cfg.concepts.empty()) throw std::invalid_argument("pretraining needs at least one concept");
    if (cfg.batch_size == 0) throw std::invalid_argument("pretraining batch_size must be positive");
    if (arch.vocab_size != vocab.size() || arch.data_dim != vocab.data_dim())
        throw std::invalid_argument("architecture does not match the vocabulary");
    for (const auto& p : cfg.concepts) validate_prompt(vocab, p);

    Rng init_rng(derive_seed(seed, "pretrain-init"));
    Denoiser model = Denoiser::create(arch, init_rng);
    AdamState adam(AdamHyper{cfg.learning_rate});
    Rng data_rng(derive_seed(seed, "pretrain-data"));
    Rng noise_rng(derive_seed(seed, "pretrain-noise"));

    // Context tokens each concept may be paired with.
    std::vector<std::vector<std::size_t>> pools;
    for (const auto& p : cfg.concepts) {
        auto pool = context_pool(vocab, p, p);
        std::erase_if(pool, [&](std::size_t id) {
            Prompt q = p;
            q.tokens.push_back(id);
            try {
                validate_prompt(vocab, q);
                return false;
            } catch (const std::exception&) {
                return true;
            }
        });
        pools.push_back(std::move(pool));
    }

    if (!(cfg.ema_decay >= 0.0 && cfg.ema_decay < 1.0)) throw std::invalid_argument("ema_decay must lie in [0, 1)");
    ParamSet ema = model.params();

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const double frac = cfg.steps > 1 ? static_cast<double>(step) / static_cast<double>(cfg.steps - 1) : 0.0;
        adam.hyper.learning_rate = cfg.learning_rate * (1.0 - (1.0 - cfg.final_lr_fraction) * frac);
        std::vector<ConditionedBatch> batches;
        for (std::size_t c = 0; c < cfg.concepts.size(); ++c) {
            Prompt p = cfg.concepts[c];
            if (!pools[c].empty() && uniform(data_rng, 0.0, 1.0) < cfg.context_probability)
                p.tokens.push_back(pools[c][uniform_index(data_rng, pools[c].size())]);
            Tensor x0 = sample_ground_truth(vocab, p, cfg.batch_size, data_rng);
            batches.push_back({std::move(p.tokens), std::move(x0)});
        }
        const double loss = train_step_standard(model, adam, batches, sched, noise_rng);
        if (!std::isfinite(loss)) throw std::runtime_error("pretraining diverged at step " + std::to_string(step));
        if (losses) losses->push_back(loss);
        for (const auto& [name, v] : model.params().values()) {
            Tensor& e = ema.value(name);
            for (std::size_t i = 0; i < v.size(); ++i) e[i] = cfg.ema_decay * e[i] + (1.0 - cfg.ema_decay) * v[i];
        }
    }
    if (cfg.ema_decay > 0.0) model = Denoiser(arch, std::move(ema));
    return model;
}

}  // namespace ablab
