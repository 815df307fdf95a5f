#include "ablab/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ablab {

NoiseSchedule build_schedule(std::size_t steps, double beta_min, double beta_max) {
    if (steps == 0) throw std::invalid_argument("schedule needs at least one step");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
        throw std::invalid_argument("schedule requires 0 < beta_min <= beta_max < 1, got [" +
                                    std::to_string(beta_min) + ", " + std::to_string(beta_max) + "]");
    NoiseSchedule s;
    s.steps = steps;
    s.beta.resize(steps);
    s.alpha_bar.resize(steps);
    s.weight.assign(steps, 1.0);
    double prod = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
        s.beta[t] = beta_min + (beta_max - beta_min) * frac;
        prod *= 1.0 - s.beta[t];
        s.alpha_bar[t] = prod;
    }
    return s;
}

double NoiseSchedule::posterior_variance(std::size_t t) const {
    if (t == 0) return 0.0;
    return beta[t] * (1.0 - alpha_bar[t - 1]) / (1.0 - alpha_bar[t]);
}

Tensor forward_noise(const Tensor& x0, std::size_t t, const Tensor& eps, const NoiseSchedule& sched) {
    return forward_noise(x0, std::vector<std::size_t>(x0.rows(), t), eps, sched);
}

Tensor forward_noise(const Tensor& x0, const std::vector<std::size_t>& t, const Tensor& eps,
                     const NoiseSchedule& sched) {
    if (x0.shape() != eps.shape())
        throw std::invalid_argument("forward_noise: shape mismatch " + shape_str(x0.shape()) + " vs " +
                                    shape_str(eps.shape()));
    if (t.size() != x0.rows()) throw std::invalid_argument("forward_noise: one timestep per row required");
    Tensor out(x0.shape());
    const std::size_t d = x0.cols();
    for (std::size_t i = 0; i < x0.rows(); ++i) {
        if (t[i] >= sched.steps)
            throw std::out_of_range("forward_noise: timestep " + std::to_string(t[i]) + " >= " +
                                    std::to_string(sched.steps));
        const double a = std::sqrt(sched.alpha_bar[t[i]]);
        const double b = std::sqrt(1.0 - sched.alpha_bar[t[i]]);
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = a * x0[i * d + j] + b * eps[i * d + j];
    }
    return out;
}

}  // namespace ablab
