#include <algorithm>
#include <cmath>
#include <map>

#include "ablab/ground_truth.hpp"
#include "ablab/optim.hpp"
#include "ablab/prompts.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace ablab;
using testing::P;

namespace {

const char* kToyVocab = R"(
schema_version: 1
object_dim: 2
trademark_dim: 2
trademark_noise: 0.5
glyph_sigma: 0.05
memorized_sigma: 0.001
tokens:
  - {name: zero,  kind: object, mean: [0, 0], sigma: 1.0}
  - {name: far,   kind: object, mean: [100, 0], sigma: 1.0}
  - {name: blob,  kind: object, mean: [3, -1], sigma: 0.5}
  - {name: twice, kind: style, matrix: [[2, 0], [0, 2]]}
  - {name: mark,  kind: trademark, glyph: [1.5, -1.5]}
  - {name: mem,   kind: memorized, point: [1, 2, 3, 4]}
  - {name: alias, kind: synonym, of: blob}
  - {name: c0, kind: generic, members: []}
  - {name: c1, kind: generic, members: []}
  - {name: c2, kind: generic, members: []}
  - {name: c3, kind: generic, members: []}
  - {name: c4, kind: generic, members: []}
  - {name: c5, kind: generic, members: []}
  - {name: c6, kind: generic, members: []}
  - {name: c7, kind: generic, members: []}
  - {name: c8, kind: generic, members: []}
)";

const Vocabulary& toy() {
    static const Vocabulary v = Vocabulary::parse(kToyVocab);
    return v;
}

struct Moments {
    std::vector<double> mean, sd;
};

Moments moments(const Tensor& x) {
    Moments m{std::vector<double>(x.cols()), std::vector<double>(x.cols())};
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0, s2 = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            s += x.at(i, j);
            s2 += x.at(i, j) * x.at(i, j);
        }
        m.mean[j] = s / x.rows();
        m.sd[j] = std::sqrt(s2 / x.rows() - m.mean[j] * m.mean[j]);
    }
    return m;
}

}  // namespace

TEST_CASE("vocabulary loads and validates") {
    const auto& v = testing::default_vocab();
    CHECK(v.data_dim() == 6);
    CHECK(v.token(v.id("welsh_corgi")).kind == TokenKind::Synonym);
    CHECK(v.referent(v.id("welsh_corgi")).name == "corgi");
    CHECK(v.is_filler(v.id("photo")));
    CHECK(v.slot(v.id("logo")) == TokenKind::Trademark);
    CHECK_THROWS(v.id("grumpy"));

    CHECK_THROWS(Vocabulary::parse("schema_version: 2\ntokens: []\n"));
    CHECK_THROWS(Vocabulary::parse(
        "schema_version: 1\nobject_dim: 2\ntrademark_dim: 2\ntokens:\n  - {name: s, kind: style, matrix: [[1, 2], [2, 4]]}\n"));
    CHECK_THROWS(Vocabulary::parse(
        "schema_version: 1\nobject_dim: 2\ntrademark_dim: 2\ntokens:\n  - {name: a, kind: synonym, of: nobody}\n"));
}

TEST_CASE("synonyms share the referent payload but own their id") {
    const auto& v = toy();
    const auto& a = v.token(v.id("alias"));
    CHECK(a.id != v.id("blob"));
    CHECK(v.referent(a.id).mean == v.token(v.id("blob")).mean);
}

TEST_CASE("prompt composition rule") {
    const auto& v = toy();
    CHECK_NOTHROW(validate_prompt(v, P(v, "blob twice mark")));
    CHECK_THROWS(validate_prompt(v, P(v, "blob zero")));
    CHECK_THROWS(validate_prompt(v, P(v, "blob alias")));
    CHECK_THROWS(validate_prompt(v, Prompt{}));
    Rng rng(1);
    CHECK_THROWS(sample_ground_truth(v, P(v, "blob zero"), 10, rng));
}

TEST_CASE("ground truth: unit Gaussian object") {
    Rng rng(2);
    const auto m = moments(sample_ground_truth(toy(), P(toy(), "zero"), 10000, rng));
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(m.mean[j]) < 0.05);
        CHECK(std::abs(m.sd[j] - 1.0) < 0.05);
    }
    // no trademark named: τ·z
    for (int j = 2; j < 4; ++j) CHECK(std::abs(m.sd[j] - 0.5) / 0.5 < 0.05);
}

TEST_CASE("ground truth: memorized point mass") {
    Rng rng(3);
    const Tensor x = sample_ground_truth(toy(), P(toy(), "mem"), 1000, rng);
    const double pt[4] = {1, 2, 3, 4};
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(x.at(i, j) - pt[j]) < 0.01);
}

TEST_CASE("ground truth: style doubles the spread") {
    Rng rng(4);
    const auto m = moments(sample_ground_truth(toy(), P(toy(), "zero twice"), 10000, rng));
    for (int j = 0; j < 2; ++j) CHECK(std::abs(m.sd[j] - 2.0) / 2.0 < 0.05);
}

TEST_CASE("ground truth moments match the analytic distribution for every kind") {
    const auto& v = toy();
    for (const char* text : {"blob", "blob twice", "blob mark", "mem", "zero mark twice", "c0"}) {
        INFO(text);
        const Prompt p = P(v, text);
        const auto dist = ground_truth_distribution(v, p);
        const auto mu = dist.mean();
        const auto cov = dist.covariance();
        Rng rng(5);
        const auto m = moments(sample_ground_truth(v, p, 10000, rng));
        for (std::size_t j = 0; j < dist.dim(); ++j) {
            const double sd = std::sqrt(cov[j * dist.dim() + j]);
            CHECK(std::abs(m.mean[j] - mu[j]) < 0.05 * std::max(1.0, std::abs(mu[j])));
            CHECK(std::abs(m.sd[j] - sd) / sd < 0.05);
        }
    }
}

TEST_CASE("synonym and referent samples are statistically indistinguishable") {
    const auto& v = toy();
    Rng r1(6), r2(7);
    const Tensor a = sample_ground_truth(v, P(v, "alias"), 10000, r1);
    const Tensor b = sample_ground_truth(v, P(v, "blob"), 10000, r2);
    const auto ma = moments(a), mb = moments(b);
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const double se = std::sqrt((ma.sd[j] * ma.sd[j] + mb.sd[j] * mb.sd[j]) / 10000.0);
        CHECK(std::abs(ma.mean[j] - mb.mean[j]) < 3 * se);
    }
}

TEST_CASE("compose_prompts: containment, synonym exclusion, round robin, determinism") {
    const auto& v = toy();
    const Prompt target = P(v, "blob"), anchor = P(v, "zero");
    const auto one = compose_prompts(v, target, anchor, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].training.contains(v.id("blob")));
    CHECK(one[0].anchor.contains(v.id("zero")));

    // 9 fillers plus the style token form the context pool
    const auto pool = context_pool(v, target, anchor);
    REQUIRE(pool.size() == 10);
    const auto pairs = compose_prompts(v, target, anchor, 200);
    std::map<std::size_t, int> count;
    for (const auto& pr : pairs) {
        for (auto t : pr.training.tokens) CHECK_FALSE(v.is_synonym(t));
        for (auto t : pr.anchor.tokens) CHECK_FALSE(v.is_synonym(t));
        ++count[pr.training.tokens.back()];
        CHECK(pr.training.tokens.back() == pr.anchor.tokens.back());
    }
    CHECK(count.size() == 10);
    for (const auto& [tok, c] : count) CHECK(c == 20);

    const auto again = compose_prompts(v, target, anchor, 200);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].training == again[i].training);
        CHECK(pairs[i].anchor == again[i].anchor);
    }
    CHECK_THROWS(compose_prompts(v, target, target, 3));
    CHECK_THROWS(compose_prompts(v, P(v, "alias"), anchor, 3));

    const Vocabulary bare = Vocabulary::parse(
        "schema_version: 1\nobject_dim: 2\ntrademark_dim: 2\ntokens:\n"
        "  - {name: a, kind: object, mean: [0, 0], sigma: 1}\n  - {name: b, kind: object, mean: [1, 0], sigma: 1}\n");
    CHECK_THROWS(compose_prompts(bare, P(bare, "a"), P(bare, "b"), 4));
}

TEST_CASE("embed_prompt reads table rows and is differentiable") {
    const auto& v = toy();
    DenoiserConfig cfg;
    cfg.vocab_size = v.size();
    cfg.data_dim = v.data_dim();
    cfg.embed_dim = 5;
    cfg.attn_dim = 4;
    cfg.hidden_dim = 8;
    cfg.head_hidden = 6;
    cfg.time_freqs = 2;
    Rng rng(8);
    Denoiser m = Denoiser::create(cfg, rng);
    const Tensor& table = m.params().value("token_embedding");
    const std::size_t k = v.id("blob");
    const Tensor e = embed_prompt(m, Prompt{{k}});
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) CHECK(e[j] == table.at(k, j));

    const Tensor a = embed_prompt(m, P(v, "blob c1"));
    const Tensor b = embed_prompt(m, P(v, "c2 blob"));
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) CHECK(a.at(0, j) == b.at(1, j));
    CHECK_THROWS(embed_prompt(m, Prompt{{v.size() + 3}}));

    m.params().set_trainable({"token_embedding"});
    const std::vector<std::size_t> ids{k, v.id("c1"), k};
    const LossFn fn = [&](ParamSet& p) {
        Tape tape(p);
        Var loss = sum_squares(embed_tokens(tape, ids));
        tape.backward(loss);
        return loss.value()[0];
    };
    CHECK(grad_check(fn, m.params()) < 1e-7);
}

TEST_CASE("augment: disabled and degenerate are identity, jitter has the declared spread") {
    Rng rng(9);
    const Tensor x = randn({50, 4}, rng);
    AugmentationConfig off{false, 0.3, 0.5, 2.0};
    CHECK(augment(x, off, rng).identical(x));
    AugmentationConfig degenerate{true, 0.0, 1.0, 1.0};
    CHECK(augment(x, degenerate, rng).identical(x));

    AugmentationConfig jitter{true, 0.1, 1.0, 1.0};
    const auto m = moments(augment(Tensor({10000, 3}), jitter, rng));
    for (int j = 0; j < 3; ++j) CHECK(std::abs(m.sd[j] - 0.1) / 0.1 < 0.05);

    AugmentationConfig bad{true, 0.1, 1.2, 1.5};
    CHECK_THROWS(augment(x, bad, rng));
}

TEST_CASE("concept_posterior: symmetry, separation, normalisation, permutation") {
    const auto& v = toy();
    const auto zero = ground_truth_distribution(v, P(v, "zero"));
    const auto far = ground_truth_distribution(v, P(v, "far"));
    const auto blob = ground_truth_distribution(v, P(v, "blob"));
    const std::vector<double> x{0.3, -0.2, 0.1, 0.4};

    const std::vector<ConceptDistribution> same{zero, zero};
    const auto p2 = concept_posterior(x, same);
    CHECK(p2[0] == doctest::Approx(0.5));

    const std::vector<ConceptDistribution> three{zero, zero, zero};
    for (double p : concept_posterior(x, three)) CHECK(p == doctest::Approx(1.0 / 3));

    const std::vector<double> at_zero{0, 0, 0, 0};
    const std::vector<ConceptDistribution> sep{zero, far};
    CHECK(concept_posterior(at_zero, sep)[0] > 1 - 1e-6);

    const std::vector<ConceptDistribution> abc{zero, far, blob}, cba{blob, far, zero};
    Rng rng(10);
    for (int k = 0; k < 20; ++k) {
        const std::vector<double> y{standard_normal(rng) * 3, standard_normal(rng) * 3, standard_normal(rng),
                                    standard_normal(rng)};
        const auto p = concept_posterior(y, abc);
        const auto q = concept_posterior(y, cba);
        CHECK(std::abs(p[0] + p[1] + p[2] - 1.0) < 1e-12);
        CHECK(std::abs(p[0] - q[2]) < 1e-12);
        CHECK(std::abs(p[2] - q[0]) < 1e-12);
        // a duplicate only renormalises
        const std::vector<ConceptDistribution> dup{zero, far, blob, blob};
        const auto d = concept_posterior(y, dup);
        if (p[0] > 1e-300) CHECK(std::abs(d[0] / d[2] - p[0] / p[2]) <= 1e-9 * (p[0] / p[2]));
    }

    const std::vector<ConceptDistribution> lonely{zero};
    CHECK_THROWS(concept_posterior(x, lonely));
}
