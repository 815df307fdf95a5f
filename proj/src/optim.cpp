#include "ablab/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ablab {

AdamState::AdamState(AdamHyper h) : hyper(h) {
    if (!(h.learning_rate > 0 && h.beta1 > 0 && h.beta2 > 0 && h.epsilon > 0))
        throw std::invalid_argument("Adam hyperparameters must all be positive");
}

void adam_step(ParamSet& params, AdamState& state) {
    for (const auto& name : params.trainable()) {
        const Tensor& g = params.grad(name);
        if (g.shape() != params.value(name).shape() || !g.all_finite())
            throw std::invalid_argument("adam_step: missing or invalid gradient for trainable parameter '" + name + "'");
    }
    const auto& h = state.hyper;
    const std::uint64_t step = state.step + 1;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
    for (const auto& name : params.trainable()) {
        Tensor& p = params.value(name);
        const Tensor& g = params.grad(name);
        auto [mit, _m] = state.m.try_emplace(name, p.shape(), 0.0);
        auto [vit, _v] = state.v.try_emplace(name, p.shape(), 0.0);
        Tensor& m = mit->second;
        Tensor& v = vit->second;
        if (m.shape() != p.shape() || v.shape() != p.shape())
            throw std::invalid_argument("adam_step: moment shape mismatch for '" + name + "'");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= h.learning_rate * mhat / (std::sqrt(vhat) + h.epsilon);
        }
    }
    state.step = step;
}

GradCheckResult grad_check_detailed(const LossFn& loss_fn, ParamSet params, double step) {
    if (!(step > 0)) throw std::invalid_argument("grad_check: step must be positive");
    params.zero_grads();
    const double base = loss_fn(params);
    if (!std::isfinite(base)) throw std::runtime_error("grad_check: loss is not finite");
    std::map<std::string, Tensor> analytic;
    for (const auto& name : params.trainable()) analytic.emplace(name, params.grad(name));

    GradCheckResult res;
    for (const auto& name : params.trainable()) {
        const Tensor& ga = analytic.at(name);
        for (std::size_t i = 0; i < ga.size(); ++i) {
            double& p = params.value(name)[i];
            const double orig = p;
            p = orig + step;
            params.zero_grads();
            const double up = loss_fn(params);
            p = orig - step;
            params.zero_grads();
            const double down = loss_fn(params);
            p = orig;
            if (!std::isfinite(up) || !std::isfinite(down)) throw std::runtime_error("grad_check: loss is not finite");
            const double fd = (up - down) / (2.0 * step);
            const double err = std::abs(ga[i] - fd) / std::max(1e-8, std::abs(ga[i]) + std::abs(fd));
            if (err > res.max_rel_error || res.entries_checked == 0) {
                res.max_rel_error = err;
                res.worst_param = name;
                res.worst_index = i;
            }
            ++res.entries_checked;
        }
    }
    return res;
}

double grad_check(const LossFn& loss_fn, const ParamSet& params, double step) {
    return grad_check_detailed(loss_fn, params, step).max_rel_error;
}

}  // namespace ablab
