#pragma once

#include <span>
#include <vector>

#include "kneexnet/backbones/backbone.hpp"
#include "kneexnet/grade.hpp"

namespace kneexnet::ensemble {

using backbones::LogitsVector;

struct ProbabilityVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Max-subtracted softmax; throws on non-finite input.
ProbabilityVector softmax(std::span<const double> logits);
inline ProbabilityVector softmax(const LogitsVector& logits) { return softmax(logits.values); }

struct VoteResult {
    KLGrade prediction;
    ProbabilityVector distribution;  // summed member probabilities / n_members
};

/// Sums member softmax outputs; argmax with ties to the lower grade.
VoteResult soft_vote(std::span<const LogitsVector> members);

/// Member logits concatenated in the ensemble's fixed member order.
struct EnsembleInput {
    std::vector<double> values;
    std::size_t n_members = 0;

    std::size_t size() const { return values.size(); }
};

/// Throws if the member count differs from n_members or any arity is not 5.
EnsembleInput concat_logits(std::span<const LogitsVector> members, std::size_t n_members);
/// Inverse of concat_logits: slices at kNumGrades strides.
std::vector<LogitsVector> split_logits(const EnsembleInput& input);

}  // namespace kneexnet::ensemble
