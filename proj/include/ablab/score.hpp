#pragma once

#include <string>
#include <vector>

#include "ablab/ground_truth.hpp"

namespace ablab {

// Candidate concepts a sample set is scored against, with the sub-vector the
// densities are restricted to.
struct CandidateSet {
    std::vector<Prompt> prompts;
    std::vector<ConceptDistribution> densities;
    std::size_t offset = 0;
    std::size_t length = 0;

    static CandidateSet full(const Vocabulary& vocab, std::vector<Prompt> prompts);
    static CandidateSet sub_vector(const Vocabulary& vocab, std::vector<Prompt> prompts, std::size_t offset,
                                   std::size_t length);

    std::size_t index_of(const Prompt& p) const;  // throws if absent
    bool contains(const Prompt& p) const;
};

struct AlignmentScore {
    double posterior = 0.0;  // mean posterior of the concept, in [0, 1]
    double posterior_stderr = 0.0;
    double raw = 0.0;  // mean log-density under the concept's own ground truth
    double raw_stderr = 0.0;
    std::size_t n = 0;
};

inline constexpr std::size_t kMinScoreSamples = 100;

// Mean posterior of `target_concept` over the sample rows, plus the raw mean
// log-density under the concept's ground truth. Requires n ≥ 100.
AlignmentScore alignment_score(const Tensor& samples, const Prompt& target_concept, const CandidateSet& candidates);

}  // namespace ablab
