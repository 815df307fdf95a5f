#include "ablab/score.hpp"

#include <cmath>
#include <stdexcept>

namespace ablab {

CandidateSet CandidateSet::full(const Vocabulary& vocab, std::vector<Prompt> prompts) {
    return sub_vector(vocab, std::move(prompts), 0, vocab.data_dim());
}

CandidateSet CandidateSet::sub_vector(const Vocabulary& vocab, std::vector<Prompt> prompts, std::size_t offset,
                                      std::size_t length) {
    if (prompts.size() < 2) throw std::invalid_argument("candidate set needs at least two prompts");
    CandidateSet c;
    c.offset = offset;
    c.length = length;
    for (const auto& p : prompts) {
        auto dist = ground_truth_distribution(vocab, p);
        if (offset != 0 || length != dist.dim()) dist = dist.marginal(offset, length);
        c.densities.push_back(std::move(dist));
    }
    c.prompts = std::move(prompts);
    return c;
}

std::size_t CandidateSet::index_of(const Prompt& p) const {
    for (std::size_t i = 0; i < prompts.size(); ++i)
        if (prompts[i] == p) return i;
    throw std::invalid_argument("concept is not in the candidate set");
}

bool CandidateSet::contains(const Prompt& p) const {
    for (const auto& q : prompts)
        if (q == p) return true;
    return false;
}

AlignmentScore alignment_score(const Tensor& samples, const Prompt& target_concept, const CandidateSet& candidates) {
    const std::size_t k = candidates.index_of(target_concept);
    const std::size_t n = samples.rows();
    if (n < kMinScoreSamples)
        throw std::invalid_argument("alignment_score: need at least " + std::to_string(kMinScoreSamples) +
                                    " samples, got " + std::to_string(n));
    if (candidates.offset + candidates.length > samples.cols())
        throw std::invalid_argument("alignment_score: samples are narrower than the candidate sub-vector");
    double ps = 0.0, ps2 = 0.0, rs = 0.0, rs2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = samples.row(i).subspan(candidates.offset, candidates.length);
        const auto post = concept_posterior(x, candidates.densities);
        const double raw = candidates.densities[k].log_density(x);
        ps += post[k];
        ps2 += post[k] * post[k];
        rs += raw;
        rs2 += raw * raw;
    }
    const double dn = static_cast<double>(n);
    const auto stderr_of = [&](double s, double s2) {
        const double mean = s / dn;
        const double var = std::max(0.0, (s2 - dn * mean * mean) / (dn - 1.0));
        return std::sqrt(var / dn);
    };
    AlignmentScore out;
    out.posterior = ps / dn;
    out.posterior_stderr = stderr_of(ps, ps2);
    out.raw = rs / dn;
    out.raw_stderr = stderr_of(rs, rs2);
    out.n = n;
    return out;
}

}  // namespace ablab
