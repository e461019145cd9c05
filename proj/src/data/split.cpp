#include "kneexnet/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "kneexnet/random.hpp"

namespace kneexnet::data {

SplitRatios parse_ratios(std::string_view text) {
    std::array<double, 3> parts{};
    std::size_t start = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const auto end = k < 2 ? text.find(':', start) : text.size();
        if (end == std::string_view::npos) throw std::invalid_argument(fmt::format("ratios '{}': expected a:b:c", text));
        const std::string part(text.substr(start, end - start));
        std::size_t used = 0;
        try {
            parts[k] = std::stod(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != part.size()) {
            throw std::invalid_argument(fmt::format("ratios '{}': '{}' is not a number", text, part));
        }
        start = end + 1;
    }
    for (double p : parts) {
        if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument(fmt::format("ratios '{}' must be positive", text));
    }
    return {parts[0], parts[1], parts[2]};
}

std::array<std::size_t, 3> largest_remainder(std::size_t n, const SplitRatios& ratios) {
    const auto r = ratios.as_array();
    const double total = r[0] + r[1] + r[2];
    if (!(total > 0.0)) throw std::invalid_argument("split ratios must sum to a positive value");

    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double exact = static_cast<double>(n) * r[k] / total;
        counts[k] = static_cast<std::size_t>(std::floor(exact));
        remainder[k] = exact - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
    return counts;
}

std::array<std::vector<std::size_t>, 3> stratified_partition(std::span<const KLGrade> labels,
                                                             const SplitRatios& ratios, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, kNumGrades> by_grade;
    for (std::size_t i = 0; i < labels.size(); ++i) by_grade[labels[i].index()].push_back(i);

    std::array<std::vector<std::size_t>, 3> parts;
    for (std::size_t g = 0; g < kNumGrades; ++g) {
        auto& idx = by_grade[g];
        if (idx.empty()) continue;
        Rng rng(derive_seed(seed, g));
        rng.shuffle(std::span<std::size_t>(idx));
        const auto counts = largest_remainder(idx.size(), ratios);
        std::size_t pos = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            parts[k].insert(parts[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                            idx.begin() + static_cast<std::ptrdiff_t>(pos + counts[k]));
            pos += counts[k];
        }
    }
    for (auto& p : parts) std::sort(p.begin(), p.end());
    return parts;
}

namespace {

constexpr std::array<Split, 3> kSplitOrder = {Split::train, Split::val, Split::test};

void check_unassigned(const DatasetManifest& manifest) {
    const auto& recs = manifest.records();
    for (std::size_t i = 0; i < recs.size(); ++i) {
        if (recs[i].split != Split::unassigned) {
            throw std::invalid_argument(fmt::format("record {} ('{}') is already assigned to split '{}'", i,
                                                    recs[i].image_path, to_string(recs[i].split)));
        }
    }
}

}  // namespace

DatasetManifest stratified_split(const DatasetManifest& manifest, const SplitRatios& ratios, std::uint64_t seed,
                                 SplitGranularity granularity) {
    check_unassigned(manifest);
    auto records = manifest.records();

    if (granularity == SplitGranularity::per_image) {
        const auto labels = manifest.grades();
        const auto parts = stratified_partition(labels, ratios, seed);
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t i : parts[k]) records[i].split = kSplitOrder[k];
        }
        return DatasetManifest(std::move(records), manifest.base_dir());
    }

    // Subjects in first-appearance order, each labelled with its modal grade.
    std::map<std::string, std::size_t> subject_index;
    std::vector<ClassCounts> subject_counts;
    std::vector<std::size_t> record_subject(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto [it, inserted] = subject_index.try_emplace(records[i].subject_id, subject_counts.size());
        if (inserted) subject_counts.push_back({});
        ++subject_counts[it->second][records[i].grade.index()];
        record_subject[i] = it->second;
    }
    std::vector<KLGrade> subject_grade;
    subject_grade.reserve(subject_counts.size());
    for (const auto& c : subject_counts) {
        const auto mode = std::max_element(c.begin(), c.end()) - c.begin();
        subject_grade.emplace_back(static_cast<int>(mode));
    }
    const auto parts = stratified_partition(subject_grade, ratios, seed);
    std::vector<Split> subject_split(subject_grade.size(), Split::unassigned);
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t s : parts[k]) subject_split[s] = kSplitOrder[k];
    }
    for (std::size_t i = 0; i < records.size(); ++i) records[i].split = subject_split[record_subject[i]];
    return DatasetManifest(std::move(records), manifest.base_dir());
}

}  // namespace kneexnet::data
