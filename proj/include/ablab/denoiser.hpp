#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ablab/autodiff.hpp"
#include "ablab/params.hpp"
#include "ablab/rng.hpp"

namespace ablab {

struct DenoiserConfig {
    std::size_t data_dim = 6;
    std::size_t vocab_size = 1;
    std::size_t embed_dim = 64;
    std::size_t attn_dim = 64;
    std::size_t hidden_dim = 64;
    // Width of the hidden layer between (trunk ⊕ attention) and the output.
    // Zero gives a purely affine head.
    std::size_t head_hidden = 64;
    std::size_t time_freqs = 8;
    // Number of diffusion steps; time features encode t / horizon.
    std::size_t horizon = 100;

    std::size_t time_dim() const { return 2 * time_freqs; }
    bool operator==(const DenoiserConfig&) const = default;
};

// Canonical parameter names.
namespace pname {
inline const std::string embedding = "token_embedding";
inline const std::string query = "attn.W_q";
inline const std::string key = "attn.W_k";
inline const std::string value = "attn.W_v";
inline const std::string trunk_w1 = "trunk.W1";
inline const std::string trunk_b1 = "trunk.b1";
inline const std::string trunk_w2 = "trunk.W2";
inline const std::string trunk_b2 = "trunk.b2";
inline const std::string head_w1 = "head.W1";
inline const std::string head_b1 = "head.b1";
inline const std::string head_w2 = "head.W2";
inline const std::string head_b2 = "head.b2";
}  // namespace pname

// sin/cos of (t / horizon) at `freqs` geometric frequencies, laid out as
// [sin_0..sin_{F−1}, cos_0..cos_{F−1}].
std::vector<double> time_features(std::size_t t, std::size_t horizon, std::size_t freqs);
Tensor time_features(std::span<const std::size_t> t, std::size_t horizon, std::size_t freqs);

// ε-prediction network: a tanh trunk over (x_t ⊕ time features), one
// single-head cross-attention reading the prompt's token embeddings, and a
// head over (trunk ⊕ attention output).
class Denoiser {
public:
    struct Output {
        Var eps;
        Var attention;  // [n×L] softmax weights
    };

    Denoiser() = default;
    Denoiser(DenoiserConfig cfg, ParamSet params);

    static Denoiser create(const DenoiserConfig& cfg, Rng& rng, bool zero_output_layer = false);

    const DenoiserConfig& config() const { return cfg_; }
    const ParamSet& params() const { return params_; }
    ParamSet& params() { return params_; }

    // Records the forward pass on `tape`, which must be bound to this
    // model's parameters.
    Output forward(Tape& tape, Var x_t, std::span<const std::size_t> t, Var prompt_embedding) const;
    Output forward(Tape& tape, Var x_t, std::span<const std::size_t> t,
                   std::span<const std::size_t> prompt_tokens) const;

private:
    DenoiserConfig cfg_;
    ParamSet params_;
};

// Token-embedding lookup on `tape`.
Var embed_tokens(Tape& tape, std::span<const std::size_t> tokens);

Tensor predict_eps(const Denoiser& model, const Tensor& x_t, const Tensor& prompt_embedding, std::size_t t);
Tensor predict_eps(const Denoiser& model, const Tensor& x_t, std::span<const std::size_t> prompt_tokens,
                   std::span<const std::size_t> t);
Tensor predict_eps(const Denoiser& model, const Tensor& x_t, std::span<const std::size_t> prompt_tokens,
                   std::size_t t);

}  // namespace ablab
