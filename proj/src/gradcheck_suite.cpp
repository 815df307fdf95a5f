#include "ablab/gradcheck_suite.hpp"

#include <functional>
#include <utility>

#include "ablab/ablation.hpp"

namespace ablab {

namespace {

using OpFn = std::function<Var(Tape&, Var, Var)>;

GradCheckRow check_op(const std::string& name, Shape sa, Shape sb, const OpFn& op, Rng& rng) {
    ParamSet ps;
    ps.add("a", randn(sa, rng));
    ps.add("b", randn(sb, rng));
    // Random projection so every output entry reaches the loss with its own weight.
    Tape probe(ps);
    const Shape out_shape = op(probe, probe.param("a"), probe.param("b")).value().shape();
    const Tensor w = randn(out_shape, rng);
    const LossFn fn = [&](ParamSet& p) {
        Tape tape(p);
        Var y = op(tape, tape.param("a"), tape.param("b"));
        Var loss = sum_squares(add(y, tape.constant(w)));
        tape.backward(loss);
        return loss.value()[0];
    };
    const auto r = grad_check_detailed(fn, ps);
    return {"op " + name, r.max_rel_error, 1e-5, r.entries_checked};
}

}  // namespace

std::vector<GradCheckRow> op_gradcheck_suite() {
    Rng rng(derive_seed(7, "gradcheck-ops"));
    const std::vector<std::size_t> ids{2, 0, 2};
    const std::vector<double> row_w{0.5, 1.5, 1.0};
    std::vector<GradCheckRow> rows;
    rows.push_back(check_op("affine", {3, 4}, {4, 5}, [&](Tape& t, Var a, Var b) {
        return affine(a, b, t.constant(Tensor({5}, 0.3)));
    }, rng));
    rows.push_back(check_op("matmul", {3, 4}, {4, 5}, [](Tape&, Var a, Var b) { return matmul(a, b); }, rng));
    rows.push_back(check_op("matmul_nt", {3, 4}, {5, 4}, [](Tape&, Var a, Var b) { return matmul_nt(a, b); }, rng));
    rows.push_back(check_op("tanh", {3, 4}, {1}, [](Tape&, Var a, Var) { return ablab::tanh(a); }, rng));
    rows.push_back(check_op("softmax", {3, 4}, {1}, [](Tape&, Var a, Var) { return softmax(a); }, rng));
    rows.push_back(check_op("concat_cols", {3, 4}, {3, 2}, [](Tape&, Var a, Var b) { return concat_cols(a, b); }, rng));
    rows.push_back(check_op("gather_rows", {3, 4}, {1}, [&](Tape&, Var a, Var) { return gather_rows(a, ids); }, rng));
    rows.push_back(check_op("add", {3, 4}, {3, 4}, [](Tape&, Var a, Var b) { return add(a, b); }, rng));
    rows.push_back(check_op("sub", {3, 4}, {3, 4}, [](Tape&, Var a, Var b) { return sub(a, b); }, rng));
    rows.push_back(check_op("scale", {3, 4}, {1}, [](Tape&, Var a, Var) { return scale(a, -1.7); }, rng));
    rows.push_back(check_op("weighted_mse", {3, 4}, {3, 4}, [&](Tape&, Var a, Var b) { return weighted_mse(a, b, row_w); }, rng));
    return rows;
}

std::vector<GradCheckRow> loss_gradcheck_suite() {
    DenoiserConfig cfg;
    cfg.vocab_size = 5;
    cfg.embed_dim = 4;
    cfg.attn_dim = 4;
    cfg.hidden_dim = 8;
    cfg.head_hidden = 8;
    cfg.time_freqs = 2;
    cfg.horizon = 10;
    const NoiseSchedule sched = build_schedule(cfg.horizon, 1e-2, 0.2);
    Rng rng(derive_seed(7, "gradcheck-losses"));
    Denoiser model = Denoiser::create(cfg, rng);
    const Prompt target{{0, 3}};
    const Prompt anchor{{1, 3}};
    const Tensor batch = randn({2, cfg.data_dim}, rng);
    const NoiseDraw draw = draw_noise(2, cfg.data_dim, sched, rng);

    std::vector<GradCheckRow> rows;
    for (FinetuneScope scope : {FinetuneScope::CrossAttention, FinetuneScope::Embedding, FinetuneScope::Full}) {
        select_trainable(model, scope);
        const LossFn noise = [&](ParamSet& p) {
            Tape tape(p);
            Var loss = noise_ablation_loss(tape, model, batch, target, draw, sched);
            tape.backward(loss);
            return loss.value()[0];
        };
        // The stop-gradient makes the model-based gradient the derivative of
        // the loss with the anchor prediction held at its current value, so
        // the finite differences perturb only the target branch. The analytic
        // gradient still comes from the live loss.
        Tape at(std::as_const(model).params());
        Var xt = at.constant(forward_noise(batch, draw.t, draw.eps, sched));
        const Tensor anchor_pred = model.forward(at, xt, draw.t, anchor.tokens).eps.value();
        const LossFn modelb = [&](ParamSet& p) {
            Tape tape(p);
            tape.backward(model_ablation_loss(tape, model, anchor, target, batch, draw, sched));
            Tape fixed(std::as_const(p));
            return model_ablation_surrogate(fixed, model, anchor_pred, target, batch, draw, sched).value()[0];
        };
        const std::string s = scope_name(scope);
        auto r = grad_check_detailed(noise, model.params());
        rows.push_back({"noise-based loss, " + s, r.max_rel_error, 1e-4, r.entries_checked});
        r = grad_check_detailed(modelb, model.params());
        rows.push_back({"model-based loss, " + s, r.max_rel_error, 1e-4, r.entries_checked});
    }
    return rows;
}

}  // namespace ablab
