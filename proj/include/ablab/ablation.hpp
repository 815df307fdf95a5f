#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ablab/diffusion.hpp"
#include "ablab/prompts.hpp"
#include "ablab/score.hpp"

namespace ablab {

enum class FinetuneScope { CrossAttention, Embedding, Full };
enum class Variant { Style, Instance, Memorization, Trademark };
enum class Method { NoiseBased, ModelBased };
enum class AnchorSource { GroundTruth, Model };

const char* scope_name(FinetuneScope s);
const char* variant_name(Variant v);
const char* method_name(Method m);
FinetuneScope parse_scope(const std::string& s);
Variant parse_variant(const std::string& s);
Method parse_method(const std::string& s);

// Parameter names a scope fine-tunes.
std::set<std::string> scope_parameters(const Denoiser& model, FinetuneScope scope);
void select_trainable(Denoiser& model, FinetuneScope scope);

// Default fine-tuning learning rate per scope.
double default_learning_rate(FinetuneScope scope);

struct AblationConfig {
    Variant variant = Variant::Instance;
    Method method = Method::ModelBased;
    Prompt target;
    Prompt anchor;
    FinetuneScope scope = FinetuneScope::CrossAttention;
    AugmentationConfig augmentation{true, 0.05, 0.9, 1.1};
    std::size_t steps = 400;
    std::size_t batch_size = 32;
    AdamHyper optimizer{default_learning_rate(FinetuneScope::CrossAttention)};
    std::uint64_t seed = 0;
    AnchorSource anchor_source = AnchorSource::GroundTruth;
    // Draw anchor samples once up front instead of fresh per step.
    bool fixed_anchor_pool = false;
    std::size_t anchor_pool_size = 512;
    // Probing of the target alignment score; 0 disables it.
    std::size_t probe_interval = 50;
    std::size_t probe_samples = 200;
    // Token standing for the generic logo concept, used by the trademark variant.
    std::optional<std::size_t> logo_token;

    void validate(const Vocabulary& vocab) const;
};

// Instance config → trademark config: full scope, no augmentation, anchor's
// trademark slot replaced by the generic logo token; steps, seed and
// optimiser settings carry over.
AblationConfig make_trademark_config(const AblationConfig& base, const Vocabulary& vocab);

struct StepRecord {
    std::size_t step = 0;
    double loss = 0.0;
    std::optional<double> probe;
    double wall_seconds = 0.0;
};

struct TrainingLog {
    std::size_t probe_interval = 0;
    std::optional<double> initial_probe;  // before the first update
    std::vector<StepRecord> records;

    // (step, score) for every probe including the initial one at step 0.
    std::vector<std::pair<std::size_t, double>> probes() const;
    bool empty() const { return records.empty() && !initial_probe; }
};

// ── single steps ───────────────────────────────────────────────────────────

// ‖ε − Φ̂(x_t, target, t)‖² with x_t noised from the anchor batch.
Var noise_ablation_loss(Tape& tape, const Denoiser& model, const Tensor& anchor_batch, const Prompt& target,
                        const NoiseDraw& draw, const NoiseSchedule& sched);

// ‖sg(Φ̂(x_t, anchor, t)) − Φ̂(x_t, target, t)‖². The anchor branch is
// recorded on the same tape and cut with stop_gradient.
Var model_ablation_loss(Tape& tape, const Denoiser& model, const Prompt& anchor, const Prompt& target,
                        const Tensor& anchor_batch, const NoiseDraw& draw, const NoiseSchedule& sched);

// Same objective with the anchor prediction supplied as a plain tensor.
Var model_ablation_surrogate(Tape& tape, const Denoiser& model, const Tensor& anchor_prediction,
                             const Prompt& target, const Tensor& anchor_batch, const NoiseDraw& draw,
                             const NoiseSchedule& sched);

double noise_ablation_step(Denoiser& model, AdamState& adam, const Tensor& anchor_batch, const Prompt& target,
                           const NoiseSchedule& sched, Rng& rng);
double model_ablation_step(Denoiser& model, AdamState& adam, const Prompt& anchor, const Prompt& target,
                           const Tensor& anchor_batch, const NoiseSchedule& sched, Rng& rng);

// Model-based loss with the anchor branch evaluated by a frozen snapshot.
// No update; consumes the same randomness as model_ablation_step.
double frozen_reference_loss(const Denoiser& model, const Denoiser& frozen, const Prompt& anchor,
                             const Prompt& target, const Tensor& anchor_batch, const NoiseSchedule& sched, Rng& rng);

// ── full run ───────────────────────────────────────────────────────────────

// Thrown when the loss stops being finite; carries the log up to that point.
struct AblationDiverged : std::runtime_error {
    AblationDiverged(const std::string& what, TrainingLog log) : std::runtime_error(what), partial(std::move(log)) {}
    TrainingLog partial;
};

struct AblationResult {
    Denoiser model;
    TrainingLog log;
};

// Fine-tunes a copy of `baseline`. Probes score the bare target prompt
// against `probe_candidates` (skipped when the set is empty).
AblationResult run_ablation(const AblationConfig& cfg, const Denoiser& baseline, const Vocabulary& vocab,
                            const NoiseSchedule& sched, const CandidateSet* probe_candidates);

// Target alignment of `n` fresh generations; deterministic in `seed`.
double probe_target_score(const Denoiser& model, const Prompt& target, const CandidateSet& candidates,
                          const NoiseSchedule& sched, std::size_t n, std::uint64_t seed);

}  // namespace ablab
