#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "kneexnet/grade.hpp"

namespace kneexnet::sampling {

/// Inverse-class-frequency weights. Classes absent from the data have no
/// weight; per-sample weights are left unnormalized.
struct SamplingWeights {
    std::array<std::optional<double>, kNumGrades> per_class{};
    std::vector<double> per_sample;
};

/// per_class[g] = 1 / counts[g] for every class with a non-zero count. Throws
/// if no class is present.
SamplingWeights inverse_frequency_weights(const ClassCounts& counts);

/// Same weights attached to each sample. Throws if a grade in `labels` has a
/// zero count.
SamplingWeights inverse_frequency_weights(const ClassCounts& counts, std::span<const KLGrade> labels);

/// Convenience: counts derived from labels, then weights attached.
SamplingWeights inverse_frequency_weights(std::span<const KLGrade> labels);

/// n_draws indices in [0, per_sample.size()), drawn with replacement with
/// probability proportional to per_sample.
std::vector<std::size_t> weighted_sample(const SamplingWeights& weights, std::size_t n_draws, std::uint64_t seed);

/// One index per line under an `index` header.
void write_index_csv(std::span<const std::size_t> indices, const std::filesystem::path& path);

}  // namespace kneexnet::sampling
