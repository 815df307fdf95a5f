#include <cmath>

#include "ablab/ablation.hpp"
#include "ablab/checkpoint.hpp"
#include "ablab/gradcheck_suite.hpp"
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

AblationConfig small_config() {
    const auto& v = default_vocab();
    AblationConfig c;
    c.target = P(v, "corgi");
    c.anchor = P(v, "dog");
    c.steps = 12;
    c.batch_size = 8;
    c.probe_interval = 5;
    c.probe_samples = 100;
    c.seed = 77;
    return c;
}

Tensor gradients_of(const Denoiser& m, const std::string& name) { return m.params().grad(name); }

}  // namespace

TEST_CASE("fine-tune scopes select exactly their parameters") {
    Denoiser m = small_model();
    select_trainable(m, FinetuneScope::CrossAttention);
    CHECK(m.params().trainable() == std::set<std::string>{"attn.W_k", "attn.W_v"});
    select_trainable(m, FinetuneScope::Embedding);
    CHECK(m.params().trainable() == std::set<std::string>{"token_embedding"});
    select_trainable(m, FinetuneScope::Full);
    const auto names = m.params().names();
    CHECK(m.params().trainable() == std::set<std::string>(names.begin(), names.end()));
    CHECK_THROWS(parse_scope("attention_only"));
    CHECK(parse_scope("cross_attention") == FinetuneScope::CrossAttention);
}

TEST_CASE("both ablation losses pass the finite-difference check under every scope") {
    const auto rows = loss_gradcheck_suite();
    CHECK(rows.size() == 6);
    for (const auto& r : rows) {
        INFO(r.name << " " << r.max_rel_error);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("ablation steps leave frozen parameters bitwise unchanged") {
    const auto& v = default_vocab();
    for (Method method : {Method::NoiseBased, Method::ModelBased}) {
        for (FinetuneScope scope : {FinetuneScope::CrossAttention, FinetuneScope::Embedding}) {
            Denoiser m = small_model();
            const Denoiser before = m;
            select_trainable(m, scope);
            AdamState adam({1e-2});
            Rng rng(3);
            const Tensor batch = sample_ground_truth(v, P(v, "dog"), 8, rng);
            if (method == Method::NoiseBased)
                noise_ablation_step(m, adam, batch, P(v, "corgi photo"), sched(), rng);
            else
                model_ablation_step(m, adam, P(v, "dog photo"), P(v, "corgi photo"), batch, sched(), rng);
            bool trained_changed = false;
            for (const auto& name : m.params().names()) {
                const bool same = m.params().value(name).identical(before.params().value(name));
                if (m.params().is_trainable(name))
                    trained_changed |= !same;
                else
                    CHECK(same);
            }
            CHECK(trained_changed);
        }
    }
    Denoiser m = small_model();
    AdamState adam;
    Rng rng(1);
    CHECK_THROWS(noise_ablation_step(m, adam, Tensor(), P(v, "corgi"), sched(), rng));
    CHECK_THROWS(model_ablation_step(m, adam, P(v, "dog"), P(v, "corgi"), Tensor(), sched(), rng));
}

TEST_CASE("identical prompts give zero model-based loss and zero gradients") {
    const auto& v = default_vocab();
    Denoiser m = small_model();
    select_trainable(m, FinetuneScope::Full);
    Rng rng(4);
    const Tensor batch = sample_ground_truth(v, P(v, "dog"), 6, rng);
    const NoiseDraw draw = draw_noise(6, 6, sched(), rng);
    m.params().zero_grads();
    Tape tape(m.params());
    Var loss = model_ablation_loss(tape, m, P(v, "dog photo"), P(v, "dog photo"), batch, draw, sched());
    tape.backward(loss);
    CHECK(loss.value()[0] == 0.0);
    for (const auto& name : m.params().names())
        for (double g : m.params().grad(name).data()) CHECK(std::abs(g) <= 1e-12);
}

TEST_CASE("stop-gradient: live gradients equal the constant-substituted surrogate bitwise") {
    const auto& v = default_vocab();
    for (FinetuneScope scope : {FinetuneScope::CrossAttention, FinetuneScope::Embedding, FinetuneScope::Full}) {
        Denoiser live = small_model(5);
        select_trainable(live, scope);
        Denoiser surrogate = live;
        Rng rng(6);
        const Tensor batch = sample_ground_truth(v, P(v, "dog"), 8, rng);
        const NoiseDraw draw = draw_noise(8, 6, sched(), rng);
        const Prompt anchor = P(v, "dog picture"), target = P(v, "corgi picture");

        live.params().zero_grads();
        Tape t1(live.params());
        Var l1 = model_ablation_loss(t1, live, anchor, target, batch, draw, sched());
        t1.backward(l1);

        const Tensor x_t = forward_noise(batch, draw.t, draw.eps, sched());
        const Tensor anchor_pred = predict_eps(surrogate, x_t, anchor.tokens, draw.t);
        surrogate.params().zero_grads();
        Tape t2(surrogate.params());
        Var l2 = model_ablation_surrogate(t2, surrogate, anchor_pred, target, batch, draw, sched());
        t2.backward(l2);

        CHECK(l1.value()[0] == l2.value()[0]);
        for (const auto& name : live.params().names())
            CHECK(gradients_of(live, name).identical(gradients_of(surrogate, name)));
    }
}

TEST_CASE("frozen reference equals the live loss at step zero and stays finite after updates") {
    const auto& v = default_vocab();
    Denoiser m = small_model(7);
    select_trainable(m, FinetuneScope::CrossAttention);
    const Denoiser frozen = m;
    Rng data(8);
    const Tensor batch = sample_ground_truth(v, P(v, "dog"), 8, data);
    const Prompt anchor = P(v, "dog"), target = P(v, "corgi");

    // same randomness for the oracle and the step
    Rng r1(9), r2(9);
    const double ref = frozen_reference_loss(m, frozen, anchor, target, batch, sched(), r1);
    AdamState adam({1e-2});
    const double live = model_ablation_step(m, adam, anchor, target, batch, sched(), r2);
    CHECK(ref == live);

    // anchor branch of the snapshot equals the live stop-gradded branch
    Rng r3(10);
    const NoiseDraw draw = draw_noise(8, 6, sched(), r3);
    const Tensor x_t = forward_noise(batch, draw.t, draw.eps, sched());
    Tape tape(frozen.params());
    Var sg = stop_gradient(frozen.forward(tape, tape.constant(x_t), draw.t, anchor.tokens).eps);
    CHECK(sg.value().identical(predict_eps(frozen, x_t, anchor.tokens, draw.t)));

    for (int i = 0; i < 5; ++i) model_ablation_step(m, adam, anchor, target, batch, sched(), r2);
    Rng r4(11), r5(11);
    CHECK(std::isfinite(frozen_reference_loss(m, frozen, anchor, target, batch, sched(), r4)));
    CHECK(std::isfinite(model_ablation_step(m, adam, anchor, target, batch, sched(), r5)));

    DenoiserConfig other = m.config();
    other.hidden_dim = 7;
    Rng r6(12);
    const Denoiser mismatched = Denoiser::create(other, r6);
    CHECK_THROWS(frozen_reference_loss(m, mismatched, anchor, target, batch, sched(), r6));
}

TEST_CASE("run_ablation: zero steps is a no-op") {
    const auto& v = default_vocab();
    const Denoiser base = small_model();
    AblationConfig cfg = small_config();
    cfg.steps = 0;
    const auto res = run_ablation(cfg, base, v, sched(), nullptr);
    CHECK(res.model.params().identical(base.params()));
    CHECK(res.log.empty());
}

TEST_CASE("run_ablation is deterministic for both methods") {
    const auto& v = default_vocab();
    const Denoiser base = small_model();
    const auto cands = CandidateSet::full(v, {P(v, "corgi"), P(v, "dog"), P(v, "cat")});
    for (Method method : {Method::NoiseBased, Method::ModelBased}) {
        AblationConfig cfg = small_config();
        cfg.method = method;
        const auto a = run_ablation(cfg, base, v, sched(), &cands);
        const auto b = run_ablation(cfg, base, v, sched(), &cands);
        CHECK(a.model.params().identical(b.model.params()));
        REQUIRE(a.log.records.size() == cfg.steps);
        for (std::size_t i = 0; i < cfg.steps; ++i) {
            CHECK(a.log.records[i].step == i + 1);
            CHECK(a.log.records[i].loss == b.log.records[i].loss);
            CHECK(std::isfinite(a.log.records[i].loss));
            CHECK(a.log.records[i].probe == b.log.records[i].probe);
        }
        // probes at 0, 5, 10 and the final step
        const auto probes = a.log.probes();
        REQUIRE(probes.size() == 4);
        CHECK(probes.front().first == 0);
        CHECK(probes.back().first == 12);

        const auto dir = testing::scratch_dir("ablation-ckpt");
        save_checkpoint(a.model, dir / "a");
        save_checkpoint(b.model, dir / "b");
        CHECK(load_checkpoint(dir / "a").params().identical(load_checkpoint(dir / "b").params()));
    }
}

TEST_CASE("run_ablation rejects invalid configs before any step") {
    const auto& v = default_vocab();
    const Denoiser base = small_model();
    AblationConfig same = small_config();
    same.anchor = same.target;
    CHECK_THROWS(run_ablation(same, base, v, sched(), nullptr));
    AblationConfig zero_batch = small_config();
    zero_batch.batch_size = 0;
    CHECK_THROWS(run_ablation(zero_batch, base, v, sched(), nullptr));
    AblationConfig tm = small_config();
    tm.variant = Variant::Trademark;
    CHECK_THROWS(run_ablation(tm, base, v, sched(), nullptr));
}

TEST_CASE("trademark config: full scope, no augmentation, logo anchor, steps and seed kept") {
    const auto& v = default_vocab();
    AblationConfig base = small_config();
    base.target = P(v, "cup starbucks");
    base.anchor = P(v, "cup");
    base.logo_token = v.id("logo");
    base.steps = 321;
    base.seed = 99;
    const auto out = make_trademark_config(base, v);
    CHECK(out.variant == Variant::Trademark);
    CHECK(out.scope == FinetuneScope::Full);
    CHECK_FALSE(out.augmentation.enabled);
    CHECK(out.anchor == P(v, "cup logo"));
    CHECK(out.steps == base.steps);
    CHECK(out.seed == base.seed);
    CHECK(out.optimizer.learning_rate == base.optimizer.learning_rate);
    CHECK_NOTHROW(out.validate(v));

    AblationConfig style = base;
    style.variant = Variant::Style;
    CHECK_THROWS(make_trademark_config(style, v));
    AblationConfig no_logo = base;
    no_logo.logo_token.reset();
    CHECK_THROWS(make_trademark_config(no_logo, v));
}
