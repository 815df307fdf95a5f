#include <cmath>

#include "ablab/eval.hpp"
#include "ablab/report.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ablab;
using testing::default_vocab;
using testing::P;

namespace {

Denoiser small_model(std::uint64_t seed = 1) {
    DenoiserConfig c;
    c.vocab_size = default_vocab().size();
    c.embed_dim = 6;
    c.attn_dim = 5;
    c.hidden_dim = 12;
    c.head_hidden = 10;
    c.time_freqs = 3;
    c.horizon = 20;
    Rng rng(seed);
    return Denoiser::create(c, rng);
}

const NoiseSchedule& sched() {
    static const NoiseSchedule s = build_schedule(20, 1e-3, 0.2);
    return s;
}

CandidateSet animals() {
    const auto& v = default_vocab();
    return CandidateSet::full(v, {P(v, "corgi"), P(v, "dog"), P(v, "cat"), P(v, "car"), P(v, "house")});
}

std::vector<LabeledConcept> labeled() {
    const auto& v = default_vocab();
    return {{"target", P(v, "corgi")}, {"anchor", P(v, "dog")}, {"surrounding", P(v, "cat")}};
}

TrainingLog log_with(const std::vector<std::pair<std::size_t, double>>& probes) {
    TrainingLog log;
    log.probe_interval = probes.size() > 1 ? probes[1].first : 0;
    log.initial_probe = probes.front().second;
    for (std::size_t i = 1; i < probes.size(); ++i) {
        StepRecord r;
        r.step = probes[i].first;
        r.loss = 0.1;
        r.probe = probes[i].second;
        log.records.push_back(r);
    }
    return log;
}

}  // namespace

TEST_CASE("alignment score: own samples high, foreign samples low, identical candidates 1/k") {
    const auto& v = default_vocab();
    const auto cands = animals();
    Rng rng(1);
    const Tensor corgis = sample_ground_truth(v, P(v, "corgi"), 500, rng);
    const Tensor cars = sample_ground_truth(v, P(v, "car"), 500, rng);
    const auto own = alignment_score(corgis, P(v, "corgi"), cands);
    CHECK(own.posterior > 0.95);
    CHECK(own.n == 500);
    CHECK(std::isfinite(own.raw));
    CHECK(alignment_score(cars, P(v, "corgi"), cands).posterior < 0.05);

    const auto same = CandidateSet::full(v, {P(v, "dog"), P(v, "dog"), P(v, "dog")});
    CHECK(alignment_score(cars, P(v, "dog"), same).posterior == doctest::Approx(1.0 / 3));

    CHECK_THROWS(alignment_score(cars, P(v, "fox"), cands));
    CHECK_THROWS(alignment_score(sample_ground_truth(v, P(v, "car"), 99, rng), P(v, "car"), cands));
}

TEST_CASE("alignment score is invariant to candidate order") {
    const auto& v = default_vocab();
    Rng rng(2);
    const Tensor x = sample_ground_truth(v, P(v, "puppy"), 300, rng);
    const auto a = CandidateSet::full(v, {P(v, "corgi"), P(v, "dog"), P(v, "puppy"), P(v, "cat")});
    const auto b = CandidateSet::full(v, {P(v, "cat"), P(v, "puppy"), P(v, "corgi"), P(v, "dog")});
    for (const char* c : {"corgi", "dog", "puppy", "cat"}) {
        const double pa = alignment_score(x, P(v, c), a).posterior;
        const double pb = alignment_score(x, P(v, c), b).posterior;
        CHECK(std::abs(pa - pb) < 1e-12);
        CHECK(pa >= 0.0);
        CHECK(pa <= 1.0);
    }
}

TEST_CASE("alignment decreases monotonically along a path from A to B") {
    const auto& v = default_vocab();
    const auto cands = CandidateSet::full(v, {P(v, "corgi"), P(v, "dog")});
    const auto mu_a = ground_truth_distribution(v, P(v, "corgi")).mean();
    const auto mu_b = ground_truth_distribution(v, P(v, "dog")).mean();
    Rng rng(3);
    const Tensor base = sample_ground_truth(v, P(v, "corgi"), 400, rng);
    double prev = 2.0;
    for (int k = 0; k < 10; ++k) {
        const double f = k / 9.0;
        Tensor x = base;
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j) x.at(i, j) += f * (mu_b[j] - mu_a[j]);
        const double s = alignment_score(x, P(v, "corgi"), cands).posterior;
        CHECK(s < prev);
        prev = s;
    }
}

TEST_CASE("eval suite: identical models agree, every score has a twin, deterministic") {
    const auto& v = default_vocab();
    const Denoiser m = small_model();
    const auto rep = eval_suite(m, m, v, labeled(), animals(), sched(), 200, 5);
    CHECK(rep.scores.size() == 6);
    CHECK_NOTHROW(rep.check_paired());
    for (const auto& c : labeled()) {
        const auto [b, a] = rep.pair_for(c.prompt);
        const double se = std::hypot(b->score.posterior_stderr, a->score.posterior_stderr);
        CHECK(std::abs(b->score.posterior - a->score.posterior) <= 3 * se);
        CHECK(b->score.n >= 100);
    }
    const auto again = eval_suite(m, m, v, labeled(), animals(), sched(), 200, 5);
    CHECK(report_json(rep).dump() == report_json(again).dump());

    EvalReport broken = rep;
    broken.scores.pop_back();
    CHECK_THROWS(broken.check_paired());

    DenoiserConfig other = m.config();
    other.hidden_dim = 9;
    Rng rng(4);
    const Denoiser different = Denoiser::create(other, rng);
    CHECK_THROWS(eval_suite(m, different, v, labeled(), animals(), sched(), 200, 5));
}

TEST_CASE("leakage probe: rejects target tokens, scores in range") {
    const auto& v = default_vocab();
    const Denoiser m = small_model();
    const auto leaks = leakage_probe(m, ModelTag::Ablated, v, {P(v, "welsh_corgi"), P(v, "cat")}, P(v, "corgi"),
                                     animals(), sched(), 150, 6);
    REQUIRE(leaks.size() == 2);
    for (const auto& l : leaks) {
        CHECK(l.score.posterior >= 0.0);
        CHECK(l.score.posterior <= 1.0);
    }
    CHECK_THROWS(leakage_probe(m, ModelTag::Ablated, v, {P(v, "corgi photo")}, P(v, "corgi"), animals(), sched(), 150,
                               6));
}

TEST_CASE("far-concept report: identical models near zero, error shrinks with n") {
    const auto& v = default_vocab();
    const Denoiser m = small_model(2);
    const Denoiser other = small_model(3);
    const std::vector<Prompt> far{P(v, "car"), P(v, "house")};
    const std::vector<Prompt> reserved{P(v, "corgi"), P(v, "dog"), P(v, "cat")};
    const auto same = far_concept_report(m, m, v, far, reserved, animals(), sched(), 300, 7);
    REQUIRE(same.size() == 2);
    for (const auto& d : same) {
        CHECK(std::isfinite(d.delta_stderr));
        CHECK(std::abs(d.delta) <= 3 * d.delta_stderr + 1e-15);
    }

    const auto small = far_concept_report(m, other, v, far, reserved, animals(), sched(), 1000, 8);
    const auto big = far_concept_report(m, other, v, far, reserved, animals(), sched(), 2000, 8);
    for (std::size_t i = 0; i < far.size(); ++i) {
        const double ratio = small[i].delta_stderr / big[i].delta_stderr;
        INFO(far[i].tokens[0] << " ratio " << ratio);
        CHECK(ratio == doctest::Approx(std::sqrt(2.0)).epsilon(0.15));
    }
    CHECK_THROWS(far_concept_report(m, m, v, {P(v, "dog")}, reserved, animals(), sched(), 300, 7));
}

TEST_CASE("trademark candidate sets split glyph and object parts") {
    const auto& v = default_vocab();
    const auto tc = trademark_candidates(v, P(v, "cup starbucks"), {P(v, "car"), P(v, "dog")});
    CHECK(tc.glyph.offset == 4);
    CHECK(tc.glyph.length == 2);
    CHECK(tc.glyph.contains(P(v, "cup nike")));
    CHECK(tc.glyph.contains(P(v, "cup")));
    CHECK(tc.object.offset == 0);
    CHECK(tc.object.length == 4);
    CHECK(tc.object.prompts.size() == 3);

    Rng rng(9);
    const Tensor own = sample_ground_truth(v, P(v, "cup starbucks"), 300, rng);
    CHECK(alignment_score(own, P(v, "cup starbucks"), tc.glyph).posterior > 0.95);
    const Tensor plain = sample_ground_truth(v, P(v, "cup"), 300, rng);
    CHECK(alignment_score(plain, P(v, "cup starbucks"), tc.glyph).posterior < 0.1);
    CHECK(alignment_score(plain, P(v, "cup starbucks"), tc.object).posterior > 0.9);

    CHECK_THROWS(trademark_candidates(v, P(v, "cup"), {P(v, "car")}));
}

TEST_CASE("method comparison: tie, dominance rule, misaligned grids") {
    const auto a = log_with({{0, 0.9}, {50, 0.5}, {100, 0.3}});
    const auto same = compare_methods(a, a);
    CHECK(same.verdict == Verdict::Tie);
    for (double d : same.difference) CHECK(d == 0.0);

    const auto noise = log_with({{0, 0.9}, {50, 0.6}, {100, 0.4}, {150, 0.2}, {200, 0.1}, {250, 0.1}});
    const auto model = log_with({{0, 0.9}, {50, 0.5}, {100, 0.5}, {150, 0.1}, {200, 0.1}, {250, 0.2}});
    const auto c = compare_methods(noise, model);
    // ≤ at steps 0, 50, 150, 200: 4 of 6
    CHECK(c.model_le_fraction == doctest::Approx(4.0 / 6));
    CHECK(c.verdict == Verdict::ModelBasedDominates);

    const auto worse = log_with({{0, 0.9}, {50, 0.7}, {100, 0.5}, {150, 0.3}, {200, 0.2}, {250, 0.2}});
    CHECK(compare_methods(noise, worse).verdict == Verdict::NotDominant);

    const auto shifted = log_with({{0, 0.9}, {60, 0.5}, {100, 0.3}});
    CHECK_THROWS(compare_methods(a, shifted));
    const auto shorter = log_with({{0, 0.9}, {50, 0.5}});
    CHECK_THROWS(compare_methods(a, shorter));
    CHECK_THROWS(compare_methods(TrainingLog{}, a));
}
