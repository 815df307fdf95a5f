#include "ablab/denoiser.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ablab {

std::vector<double> time_features(std::size_t t, std::size_t horizon, std::size_t freqs) {
    if (horizon == 0) throw std::invalid_argument("time_features: horizon must be positive");
    const double s = static_cast<double>(t) / static_cast<double>(horizon);
    std::vector<double> f(2 * freqs);
    for (std::size_t k = 0; k < freqs; ++k) {
        const double w = 0.5 * std::numbers::pi * std::ldexp(1.0, static_cast<int>(k));
        f[k] = std::sin(w * s);
        f[freqs + k] = std::cos(w * s);
    }
    return f;
}

Tensor time_features(std::span<const std::size_t> t, std::size_t horizon, std::size_t freqs) {
    Tensor out({t.size(), 2 * freqs});
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto f = time_features(t[i], horizon, freqs);
        std::copy(f.begin(), f.end(), out.row(i).begin());
    }
    return out;
}

Denoiser::Denoiser(DenoiserConfig cfg, ParamSet params) : cfg_(cfg), params_(std::move(params)) {
    const auto expect = [&](const std::string& name, Shape shape) {
        if (!params_.contains(name)) throw std::invalid_argument("denoiser is missing parameter '" + name + "'");
        if (params_.value(name).shape() != shape)
            throw std::invalid_argument("parameter '" + name + "' has shape " +
                                        shape_str(params_.value(name).shape()) + ", expected " + shape_str(shape));
    };
    const std::size_t in = cfg_.data_dim + cfg_.time_dim();
    const std::size_t mid = cfg_.hidden_dim + cfg_.attn_dim;
    expect(pname::embedding, {cfg_.vocab_size, cfg_.embed_dim});
    expect(pname::query, {cfg_.hidden_dim, cfg_.attn_dim});
    expect(pname::key, {cfg_.embed_dim, cfg_.attn_dim});
    expect(pname::value, {cfg_.embed_dim, cfg_.attn_dim});
    expect(pname::trunk_w1, {in, cfg_.hidden_dim});
    expect(pname::trunk_b1, {cfg_.hidden_dim});
    expect(pname::trunk_w2, {cfg_.hidden_dim, cfg_.hidden_dim});
    expect(pname::trunk_b2, {cfg_.hidden_dim});
    if (cfg_.head_hidden > 0) {
        expect(pname::head_w1, {mid, cfg_.head_hidden});
        expect(pname::head_b1, {cfg_.head_hidden});
        expect(pname::head_w2, {cfg_.head_hidden, cfg_.data_dim});
    } else {
        expect(pname::head_w2, {mid, cfg_.data_dim});
    }
    expect(pname::head_b2, {cfg_.data_dim});
    const std::size_t n_expected = cfg_.head_hidden > 0 ? 12 : 10;
    if (params_.count() != n_expected) throw std::invalid_argument("denoiser parameter set has unexpected entries");
}

Denoiser Denoiser::create(const DenoiserConfig& cfg, Rng& rng, bool zero_output_layer) {
    if (cfg.data_dim == 0 || cfg.vocab_size == 0 || cfg.embed_dim == 0 || cfg.attn_dim == 0 ||
        cfg.hidden_dim == 0 || cfg.time_freqs == 0 || cfg.horizon == 0)
        throw std::invalid_argument("denoiser sizes must be positive");
    ParamSet p;
    const auto dense = [&](std::size_t in, std::size_t out) {
        return randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    };
    const std::size_t in = cfg.data_dim + cfg.time_dim();
    const std::size_t mid = cfg.hidden_dim + cfg.attn_dim;
    p.add(pname::embedding, randn({cfg.vocab_size, cfg.embed_dim}, rng));
    p.add(pname::query, dense(cfg.hidden_dim, cfg.attn_dim));
    p.add(pname::key, dense(cfg.embed_dim, cfg.attn_dim));
    p.add(pname::value, dense(cfg.embed_dim, cfg.attn_dim));
    p.add(pname::trunk_w1, dense(in, cfg.hidden_dim));
    p.add(pname::trunk_b1, Tensor({cfg.hidden_dim}, 0.0));
    p.add(pname::trunk_w2, dense(cfg.hidden_dim, cfg.hidden_dim));
    p.add(pname::trunk_b2, Tensor({cfg.hidden_dim}, 0.0));
    std::size_t last_in = mid;
    if (cfg.head_hidden > 0) {
        p.add(pname::head_w1, dense(mid, cfg.head_hidden));
        p.add(pname::head_b1, Tensor({cfg.head_hidden}, 0.0));
        last_in = cfg.head_hidden;
    }
    Tensor out_w = dense(last_in, cfg.data_dim);
    if (zero_output_layer) out_w.fill(0.0);
    p.add(pname::head_w2, std::move(out_w));
    p.add(pname::head_b2, Tensor({cfg.data_dim}, 0.0));
    return Denoiser(cfg, std::move(p));
}

Var embed_tokens(Tape& tape, std::span<const std::size_t> tokens) {
    if (tokens.empty()) throw std::invalid_argument("prompt must contain at least one token");
    return gather_rows(tape.param(pname::embedding), tokens);
}

Denoiser::Output Denoiser::forward(Tape& tape, Var x_t, std::span<const std::size_t> t, Var prompt_embedding) const {
    const Tensor& x = x_t.value();
    if (x.rank() != 2 || x.cols() != cfg_.data_dim)
        throw std::invalid_argument("denoiser input must be [n x " + std::to_string(cfg_.data_dim) + "], got " +
                                    shape_str(x.shape()));
    if (t.size() != x.rows()) throw std::invalid_argument("denoiser needs one timestep per row");
    const Tensor& e = prompt_embedding.value();
    if (e.rank() != 2 || e.cols() != cfg_.embed_dim)
        throw std::invalid_argument("prompt embedding must be [L x " + std::to_string(cfg_.embed_dim) + "], got " +
                                    shape_str(e.shape()));
    for (auto s : t)
        if (s >= cfg_.horizon) throw std::out_of_range("timestep " + std::to_string(s) + " outside horizon");

    Var tf = tape.constant(time_features(t, cfg_.horizon, cfg_.time_freqs));
    Var h = ablab::tanh(affine(concat_cols(x_t, tf), tape.param(pname::trunk_w1), tape.param(pname::trunk_b1)));
    h = ablab::tanh(affine(h, tape.param(pname::trunk_w2), tape.param(pname::trunk_b2)));

    Var q = matmul(h, tape.param(pname::query));
    Var k = matmul(prompt_embedding, tape.param(pname::key));
    Var v = matmul(prompt_embedding, tape.param(pname::value));
    Var weights = softmax(scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(cfg_.attn_dim))));
    Var attended = matmul(weights, v);

    Var z = concat_cols(h, attended);
    if (cfg_.head_hidden > 0) z = ablab::tanh(affine(z, tape.param(pname::head_w1), tape.param(pname::head_b1)));
    Var eps = affine(z, tape.param(pname::head_w2), tape.param(pname::head_b2));
    return {eps, weights};
}

Denoiser::Output Denoiser::forward(Tape& tape, Var x_t, std::span<const std::size_t> t,
                                   std::span<const std::size_t> prompt_tokens) const {
    for (auto id : prompt_tokens)
        if (id >= cfg_.vocab_size) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
    return forward(tape, x_t, t, embed_tokens(tape, prompt_tokens));
}

Tensor predict_eps(const Denoiser& model, const Tensor& x_t, const Tensor& prompt_embedding, std::size_t t) {
    if (prompt_embedding.rank() != 2 || prompt_embedding.rows() == 0)
        throw std::invalid_argument("prompt embedding must hold at least one token");
    Tape tape(model.params());
    std::vector<std::size_t> ts(x_t.rows(), t);
    auto out = model.forward(tape, tape.constant(x_t), ts, tape.constant(prompt_embedding));
    return out.eps.value();
}

Tensor predict_eps(const Denoiser& model, const Tensor& x_t, std::span<const std::size_t> prompt_tokens,
                   std::span<const std::size_t> t) {
    Tape tape(model.params());
    auto out = model.forward(tape, tape.constant(x_t), t, prompt_tokens);
    return out.eps.value();
}

Tensor predict_eps(const Denoiser& model, const Tensor& x_t, std::span<const std::size_t> prompt_tokens,
                   std::size_t t) {
    std::vector<std::size_t> ts(x_t.rows(), t);
    return predict_eps(model, x_t, prompt_tokens, ts);
}

}  // namespace ablab
