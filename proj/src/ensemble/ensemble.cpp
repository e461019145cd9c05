#include "kneexnet/ensemble/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace kneexnet::ensemble {

ProbabilityVector softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    for (double v : logits) {
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    ProbabilityVector p{std::vector<double>(logits.size())};
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p.values[i] = std::exp(logits[i] - mx);
        z += p.values[i];
    }
    for (auto& v : p.values) v /= z;
    return p;
}

VoteResult soft_vote(std::span<const LogitsVector> members) {
    if (members.empty()) throw std::invalid_argument("soft_vote needs at least one member");
    std::vector<double> sum(kNumGrades, 0.0);
    for (std::size_t m = 0; m < members.size(); ++m) {
        if (members[m].size() != kNumGrades) {
            throw std::invalid_argument(
                fmt::format("soft_vote: member {} has {} logits, expected {}", m, members[m].size(), kNumGrades));
        }
        const auto p = softmax(members[m]);
        for (std::size_t c = 0; c < kNumGrades; ++c) sum[c] += p[c];
    }
    const auto winner = backbones::argmax(sum);
    for (auto& v : sum) v /= static_cast<double>(members.size());
    return {KLGrade(static_cast<int>(winner)), ProbabilityVector{std::move(sum)}};
}

EnsembleInput concat_logits(std::span<const LogitsVector> members, std::size_t n_members) {
    if (members.size() != n_members) {
        throw std::invalid_argument(fmt::format("concat_logits: got {} members, ensemble has {}", members.size(), n_members));
    }
    EnsembleInput in;
    in.n_members = n_members;
    in.values.reserve(n_members * kNumGrades);
    for (std::size_t m = 0; m < members.size(); ++m) {
        if (members[m].size() != kNumGrades) {
            throw std::invalid_argument(
                fmt::format("concat_logits: member {} has {} logits, expected {}", m, members[m].size(), kNumGrades));
        }
        for (double v : members[m].values) {
            if (!std::isfinite(v)) throw std::invalid_argument(fmt::format("concat_logits: member {} has a non-finite logit", m));
        }
        in.values.insert(in.values.end(), members[m].values.begin(), members[m].values.end());
    }
    return in;
}

std::vector<LogitsVector> split_logits(const EnsembleInput& input) {
    if (input.values.size() != input.n_members * kNumGrades) {
        throw std::invalid_argument("split_logits: input length does not match member count");
    }
    std::vector<LogitsVector> out(input.n_members);
    for (std::size_t m = 0; m < input.n_members; ++m) {
        const auto first = input.values.begin() + static_cast<std::ptrdiff_t>(m * kNumGrades);
        out[m].values.assign(first, first + static_cast<std::ptrdiff_t>(kNumGrades));
    }
    return out;
}

}  // namespace kneexnet::ensemble
