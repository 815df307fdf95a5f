#include "ablab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ablab {

const char* tag_name(ModelTag t) { return t == ModelTag::Baseline ? "baseline" : "ablated"; }

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::ModelBasedDominates: return "model-based-dominates";
        case Verdict::NotDominant: return "model-based-not-dominant";
        case Verdict::Tie: return "tie";
    }
    return "?";
}

std::pair<const ConceptScore*, const ConceptScore*> EvalReport::pair_for(const Prompt& p) const {
    const ConceptScore* b = nullptr;
    const ConceptScore* a = nullptr;
    for (const auto& s : scores) {
        if (s.concept_prompt != p) continue;
        (s.tag == ModelTag::Baseline ? b : a) = &s;
    }
    if (!b || !a) throw std::invalid_argument("report lacks a baseline/ablated pair for a concept");
    return {b, a};
}

void EvalReport::check_paired() const {
    for (const auto& s : scores) pair_for(s.concept_prompt);
}

std::uint64_t concept_seed(std::uint64_t seed, const std::string& stage, const Prompt& p) {
    std::string key = stage;
    for (auto id : p.tokens) key += "/" + std::to_string(id);
    return derive_seed(seed, key);
}

namespace {

AlignmentScore score_generations(const Denoiser& model, const Prompt& gen, const Prompt& target,
                                 const CandidateSet& candidates, const NoiseSchedule& sched, std::size_t n,
                                 std::uint64_t seed) {
    Rng rng(seed);
    const Tensor samples = ddpm_sample(model, gen.tokens, sched, n, rng);
    return alignment_score(samples, target, candidates);
}

void check_same_architecture(const Denoiser& a, const Denoiser& b) {
    if (!(a.config() == b.config())) throw std::invalid_argument("baseline and ablated models differ in architecture");
}

}  // namespace

EvalReport eval_suite(const Denoiser& baseline, const Denoiser& ablated, const Vocabulary& vocab,
                      const std::vector<LabeledConcept>& concepts, const CandidateSet& candidates,
                      const NoiseSchedule& sched, std::size_t n, std::uint64_t seed) {
    check_same_architecture(baseline, ablated);
    if (baseline.config().vocab_size != vocab.size())
        throw std::invalid_argument("eval: model vocabulary size does not match the vocabulary");
    EvalReport report;
    report.seed = seed;
    for (const auto& c : concepts) {
        const std::uint64_t s = concept_seed(seed, "eval", c.prompt);
        for (ModelTag tag : {ModelTag::Baseline, ModelTag::Ablated}) {
            const Denoiser& m = tag == ModelTag::Baseline ? baseline : ablated;
            report.scores.push_back(
                {c.role, c.prompt, prompt_text(vocab, c.prompt), tag, score_generations(m, c.prompt, c.prompt, candidates, sched, n, s)});
        }
    }
    return report;
}

std::vector<LeakScore> leakage_probe(const Denoiser& model, ModelTag tag, const Vocabulary& vocab,
                                     const std::vector<Prompt>& prompts, const Prompt& target,
                                     const CandidateSet& candidates, const NoiseSchedule& sched, std::size_t n,
                                     std::uint64_t seed) {
    for (const auto& p : prompts)
        for (auto id : target.tokens)
            if (p.contains(id))
                throw std::invalid_argument("leakage prompt '" + prompt_text(vocab, p) + "' contains the target token '" +
                                            vocab.token(id).name + "'");
    std::vector<LeakScore> out;
    for (const auto& p : prompts) {
        const std::uint64_t s = concept_seed(seed, "leakage", p);
        out.push_back({p, prompt_text(vocab, p), tag, score_generations(model, p, target, candidates, sched, n, s)});
    }
    return out;
}

std::vector<FarDelta> far_concept_report(const Denoiser& baseline, const Denoiser& ablated, const Vocabulary& vocab,
                                         const std::vector<Prompt>& far, const std::vector<Prompt>& reserved,
                                         const CandidateSet& candidates, const NoiseSchedule& sched, std::size_t n,
                                         std::uint64_t seed) {
    check_same_architecture(baseline, ablated);
    for (const auto& p : far)
        if (std::find(reserved.begin(), reserved.end(), p) != reserved.end())
            throw std::invalid_argument("far concept '" + prompt_text(vocab, p) +
                                        "' is also a target, anchor or surrounding concept");
    std::vector<FarDelta> out;
    for (const auto& p : far) {
        const std::uint64_t s = concept_seed(seed, "far", p);
        FarDelta d;
        d.prompt = p;
        d.text = prompt_text(vocab, p);
        d.baseline = score_generations(baseline, p, p, candidates, sched, n, s);
        d.ablated = score_generations(ablated, p, p, candidates, sched, n, s);
        d.delta = d.baseline.posterior - d.ablated.posterior;
        d.delta_stderr = std::hypot(d.baseline.posterior_stderr, d.ablated.posterior_stderr);
        out.push_back(std::move(d));
    }
    return out;
}

TrademarkCandidates trademark_candidates(const Vocabulary& vocab, const Prompt& target,
                                         const std::vector<Prompt>& object_alternatives) {
    std::size_t slot_index = target.tokens.size();
    for (std::size_t i = 0; i < target.tokens.size(); ++i)
        if (vocab.referent(target.tokens[i]).kind == TokenKind::Trademark)
            slot_index = i;
    if (slot_index == target.tokens.size())
        throw std::invalid_argument("trademark scoring needs a target naming a specific trademark");
    const std::size_t own = vocab.referent(target.tokens[slot_index]).id;

    std::vector<Prompt> glyphs{target};
    for (const auto& t : vocab.tokens()) {
        if (t.kind != TokenKind::Trademark || t.id == own) continue;
        Prompt p = target;
        p.tokens[slot_index] = t.id;
        glyphs.push_back(std::move(p));
    }
    Prompt none = target;
    none.tokens.erase(none.tokens.begin() + static_cast<std::ptrdiff_t>(slot_index));
    if (!none.tokens.empty()) glyphs.push_back(std::move(none));

    std::vector<Prompt> objects{target};
    for (const auto& p : object_alternatives)
        if (p != target) objects.push_back(p);

    const auto& st = vocab.settings();
    return {CandidateSet::sub_vector(vocab, std::move(glyphs), st.object_dim, st.trademark_dim),
            CandidateSet::sub_vector(vocab, std::move(objects), 0, st.object_dim)};
}

TrademarkDetail trademark_detail(const Denoiser& model, ModelTag tag, const Prompt& target,
                                 const TrademarkCandidates& cands, const NoiseSchedule& sched, std::size_t n,
                                 std::uint64_t seed) {
    Rng rng(concept_seed(seed, "trademark", target));
    const Tensor samples = ddpm_sample(model, target.tokens, sched, n, rng);
    return {tag, alignment_score(samples, target, cands.glyph), alignment_score(samples, target, cands.object)};
}

MethodComparison compare_methods(const TrainingLog& noise_log, const TrainingLog& model_log) {
    const auto a = noise_log.probes();
    const auto b = model_log.probes();
    if (a.empty() || b.empty()) throw std::invalid_argument("compare_methods: a log has no probes");
    if (a.size() != b.size()) throw std::invalid_argument("compare_methods: probe grids differ in length");
    MethodComparison c;
    std::size_t le = 0;
    bool all_equal = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].first != b[i].first)
            throw std::invalid_argument("compare_methods: probe grids differ at step " + std::to_string(a[i].first) +
                                        " vs " + std::to_string(b[i].first));
        c.steps.push_back(a[i].first);
        c.noise_based.push_back(a[i].second);
        c.model_based.push_back(b[i].second);
        c.difference.push_back(b[i].second - a[i].second);
        if (b[i].second <= a[i].second) ++le;
        if (b[i].second != a[i].second) all_equal = false;
    }
    c.model_le_fraction = static_cast<double>(le) / static_cast<double>(a.size());
    if (all_equal)
        c.verdict = Verdict::Tie;
    else
        c.verdict = 3 * le >= 2 * a.size() ? Verdict::ModelBasedDominates : Verdict::NotDominant;
    return c;
}

}  // namespace ablab
