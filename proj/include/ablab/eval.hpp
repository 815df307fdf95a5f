#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ablab/ablation.hpp"
#include "ablab/score.hpp"

namespace ablab {

enum class ModelTag { Baseline, Ablated };
const char* tag_name(ModelTag t);

// A prompt with the role it plays in an experiment: target, anchor,
// surrounding or far.
struct LabeledConcept {
    std::string role;
    Prompt prompt;
};

struct ConceptScore {
    std::string role;
    Prompt concept_prompt;
    std::string text;
    ModelTag tag = ModelTag::Baseline;
    AlignmentScore score;
};

struct LeakScore {
    Prompt prompt;
    std::string text;
    ModelTag tag = ModelTag::Baseline;
    AlignmentScore score;  // target alignment of the prompt's generations
};

struct FarDelta {
    Prompt prompt;
    std::string text;
    AlignmentScore baseline;
    AlignmentScore ablated;
    double delta = 0.0;  // baseline − ablated
    double delta_stderr = 0.0;
};

struct TrademarkDetail {
    ModelTag tag = ModelTag::Baseline;
    AlignmentScore glyph;
    AlignmentScore object;
};

struct EvalReport {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<ConceptScore> scores;
    std::vector<LeakScore> leakage;
    std::vector<FarDelta> far;
    std::vector<TrademarkDetail> trademark;

    // Baseline/ablated pair for a concept; throws when either is missing.
    std::pair<const ConceptScore*, const ConceptScore*> pair_for(const Prompt& p) const;
    // Throws unless every ablated score has a baseline twin and vice versa.
    void check_paired() const;
};

// Samples drawn per concept; generations for the same concept use the same
// random stream for both models, so identical models give identical scores.
std::uint64_t concept_seed(std::uint64_t seed, const std::string& stage, const Prompt& p);

// Scores every concept's generations under both models.
EvalReport eval_suite(const Denoiser& baseline, const Denoiser& ablated, const Vocabulary& vocab,
                      const std::vector<LabeledConcept>& concepts, const CandidateSet& candidates,
                      const NoiseSchedule& sched, std::size_t n, std::uint64_t seed);

// Target alignment of the generations of each prompt. Prompts may not
// contain any token of the target prompt.
std::vector<LeakScore> leakage_probe(const Denoiser& model, ModelTag tag, const Vocabulary& vocab,
                                     const std::vector<Prompt>& prompts, const Prompt& target,
                                     const CandidateSet& candidates, const NoiseSchedule& sched, std::size_t n,
                                     std::uint64_t seed);

// Per far concept: baseline alignment minus ablated alignment with the
// standard error of the difference. `reserved` lists target, anchor and
// surrounding prompts, which far prompts must avoid.
std::vector<FarDelta> far_concept_report(const Denoiser& baseline, const Denoiser& ablated, const Vocabulary& vocab,
                                         const std::vector<Prompt>& far, const std::vector<Prompt>& reserved,
                                         const CandidateSet& candidates, const NoiseSchedule& sched, std::size_t n,
                                         std::uint64_t seed);

// Candidate sets for scoring a trademarked target separately on its glyph
// part (the target against every other trademark and none) and its object
// part (against the given object alternatives).
struct TrademarkCandidates {
    CandidateSet glyph;
    CandidateSet object;
};
TrademarkCandidates trademark_candidates(const Vocabulary& vocab, const Prompt& target,
                                         const std::vector<Prompt>& object_alternatives);

TrademarkDetail trademark_detail(const Denoiser& model, ModelTag tag, const Prompt& target,
                                 const TrademarkCandidates& cands, const NoiseSchedule& sched, std::size_t n,
                                 std::uint64_t seed);

enum class Verdict { ModelBasedDominates, NotDominant, Tie };
const char* verdict_name(Verdict v);

struct MethodComparison {
    std::vector<std::size_t> steps;
    std::vector<double> noise_based;
    std::vector<double> model_based;
    std::vector<double> difference;  // model − noise
    double model_le_fraction = 0.0;
    Verdict verdict = Verdict::Tie;
};

// Pairs the probe curves of two runs that differ only in method.
MethodComparison compare_methods(const TrainingLog& noise_log, const TrainingLog& model_log);

}  // namespace ablab
