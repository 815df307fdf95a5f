#include "ablab/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace ablab {

NoiseDraw draw_noise(std::size_t rows, std::size_t dim, const NoiseSchedule& sched, Rng& rng) {
    NoiseDraw d;
    d.t.resize(rows);
    for (auto& t : d.t) t = uniform_index(rng, sched.steps);
    d.eps = randn({rows, dim}, rng);
    return d;
}

Var diffusion_loss(Var pred, Var target, std::span<const std::size_t> t, const NoiseSchedule& sched) {
    std::vector<double> w(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) w[i] = sched.weight.at(t[i]);
    return weighted_mse(pred, target, w);
}

Var combine_group_losses(const std::vector<Var>& losses, const std::vector<std::size_t>& rows) {
    if (losses.empty() || losses.size() != rows.size()) throw std::invalid_argument("combine_group_losses: bad input");
    if (losses.size() == 1) return losses.front();
    std::size_t total = 0;
    for (auto r : rows) total += r;
    Var acc = scale(losses[0], static_cast<double>(rows[0]) / static_cast<double>(total));
    for (std::size_t g = 1; g < losses.size(); ++g)
        acc = add(acc, scale(losses[g], static_cast<double>(rows[g]) / static_cast<double>(total)));
    return acc;
}

Var standard_loss(Tape& tape, const Denoiser& model, std::span<const ConditionedBatch> batches,
                  std::span<const NoiseDraw> draws, const NoiseSchedule& sched) {
    if (batches.empty()) throw std::invalid_argument("standard_loss: empty batch");
    if (draws.size() != batches.size()) throw std::invalid_argument("standard_loss: one noise draw per group required");
    std::vector<Var> losses;
    std::vector<std::size_t> rows;
    for (std::size_t g = 0; g < batches.size(); ++g) {
        const auto& b = batches[g];
        const auto& d = draws[g];
        if (b.x0.empty() || b.x0.rows() == 0) throw std::invalid_argument("standard_loss: empty batch");
        Tensor x_t = forward_noise(b.x0, d.t, d.eps, sched);
        auto out = model.forward(tape, tape.constant(std::move(x_t)), d.t, b.prompt);
        losses.push_back(diffusion_loss(out.eps, tape.constant(d.eps), d.t, sched));
        rows.push_back(b.x0.rows());
    }
    return combine_group_losses(losses, rows);
}

double train_step_standard(Denoiser& model, AdamState& adam, std::span<const ConditionedBatch> batches,
                           const NoiseSchedule& sched, Rng& rng) {
    if (batches.empty()) throw std::invalid_argument("train_step_standard: empty batch");
    if (model.params().trainable().empty()) throw std::invalid_argument("train_step_standard: nothing is trainable");
    std::vector<NoiseDraw> draws;
    for (const auto& b : batches) {
        if (b.x0.empty()) throw std::invalid_argument("train_step_standard: empty batch");
        draws.push_back(draw_noise(b.x0.rows(), b.x0.cols(), sched, rng));
    }
    model.params().zero_grads();
    Tape tape(model.params());
    Var loss = standard_loss(tape, model, batches, draws, sched);
    tape.backward(loss);
    adam_step(model.params(), adam);
    return loss.value()[0];
}

Tensor ddpm_sample(const EpsPredictor& predict, std::size_t dim, const NoiseSchedule& sched, std::size_t n, Rng& rng) {
    if (n == 0) throw std::invalid_argument("ddpm_sample: need at least one sample");
    Tensor x = randn({n, dim}, rng);
    for (std::size_t t = sched.steps; t-- > 0;) {
        const Tensor eps = predict(x, t);
        const double beta = sched.beta[t];
        const double c0 = 1.0 / std::sqrt(1.0 - beta);
        const double c1 = beta / std::sqrt(1.0 - sched.alpha_bar[t]);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = c0 * (x[i] - c1 * eps[i]);
        if (t > 0) {
            const double sigma = std::sqrt(sched.posterior_variance(t));
            for (auto& v : x.data()) v += sigma * standard_normal(rng);
        }
    }
    return x;
}

Tensor ddpm_sample(const Denoiser& model, std::span<const std::size_t> prompt, const NoiseSchedule& sched,
                   std::size_t n, Rng& rng) {
    if (prompt.empty()) throw std::invalid_argument("ddpm_sample: empty prompt");
    if (sched.steps != model.config().horizon)
        throw std::invalid_argument("ddpm_sample: schedule length does not match the model's horizon");
    // The prompt's keys and values do not depend on x_t, but recomputing them
    // per step keeps this on the same code path as training.
    std::vector<std::size_t> toks(prompt.begin(), prompt.end());
    return ddpm_sample([&](const Tensor& x_t, std::size_t t) { return predict_eps(model, x_t, toks, t); },
                       model.config().data_dim, sched, n, rng);
}

}  // namespace ablab
