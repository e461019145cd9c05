#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "kneexnet/data/manifest.hpp"

namespace kneexnet::data {

struct SplitRatios {
    double train = 7.0;
    double val = 1.0;
    double test = 2.0;

    std::array<double, 3> as_array() const { return {train, val, test}; }
};

/// Parses "7:1:2".
SplitRatios parse_ratios(std::string_view text);

enum class SplitGranularity { per_image, by_subject };

/// Largest-remainder apportionment of n items over the three ratios. Ties in
/// the fractional part go to the earlier split (train, then val, then test).
std::array<std::size_t, 3> largest_remainder(std::size_t n, const SplitRatios& ratios);

/// Stratified partition of item indices by label. Within each label the indices
/// are shuffled by a label-specific stream derived from seed, then cut into
/// train/val/test according to largest_remainder.
std::array<std::vector<std::size_t>, 3> stratified_partition(std::span<const KLGrade> labels,
                                                             const SplitRatios& ratios,
                                                             std::uint64_t seed);

/// Assigns every record to train/val/test. Throws if any record already carries
/// a split. In by_subject mode all images of a subject land in one split; the
/// subject is stratified by its most frequent grade (lowest grade on ties).
DatasetManifest stratified_split(const DatasetManifest& manifest, const SplitRatios& ratios,
                                 std::uint64_t seed,
                                 SplitGranularity granularity = SplitGranularity::per_image);

}  // namespace kneexnet::data
