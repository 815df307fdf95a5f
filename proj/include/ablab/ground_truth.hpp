#pragma once

#include <span>
#include <vector>

#include "ablab/rng.hpp"
#include "ablab/vocabulary.hpp"

namespace ablab {

struct GaussianComponent {
    double weight = 1.0;
    std::vector<double> mean;
    std::vector<double> cov;  // dim × dim row-major
};

// Gaussian mixture with precomputed Cholesky factors, the analytic density
// of a prompt's ground truth.
class ConceptDistribution {
public:
    explicit ConceptDistribution(std::vector<GaussianComponent> components);

    std::size_t dim() const { return dim_; }
    const std::vector<GaussianComponent>& components() const { return components_; }

    double log_density(std::span<const double> x) const;
    // Mixture restricted to coordinates [offset, offset + len).
    ConceptDistribution marginal(std::size_t offset, std::size_t len) const;
    std::vector<double> mean() const;
    // Full covariance of the mixture, dim × dim.
    std::vector<double> covariance() const;

private:
    struct Factor {
        std::vector<double> chol;  // lower triangular
        double log_norm = 0.0;     // log weight − ½(d log 2π + log|Σ|)
    };
    std::size_t dim_ = 0;
    std::vector<GaussianComponent> components_;
    std::vector<Factor> factors_;
};

// Analytic distribution of the ground-truth sampler for a valid prompt.
ConceptDistribution ground_truth_distribution(const Vocabulary& vocab, const Prompt& prompt);

// n independent draws: object part A_style·(μ + σz), trademark part the glyph
// (with glyph_sigma spread) or trademark_noise·z', memorized tokens replace
// the whole vector with x_mem + memorized_sigma·z.
Tensor sample_ground_truth(const Vocabulary& vocab, const Prompt& prompt, std::size_t n, Rng& rng);

// Normalised posterior over candidates under a uniform prior, via log-sum-exp.
std::vector<double> concept_posterior(std::span<const double> x, std::span<const ConceptDistribution> candidates);

}  // namespace ablab
