#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "kneexnet/data/split.hpp"
#include "kneexnet/random.hpp"

using namespace kneexnet;
using namespace kneexnet::data;

namespace {

DatasetManifest make_manifest(const std::array<std::size_t, 5>& per_grade, std::size_t subjects_mod = 0) {
    std::vector<SampleRecord> records;
    std::size_t k = 0;
    for (int g = 0; g < 5; ++g) {
        for (std::size_t i = 0; i < per_grade[g]; ++i, ++k) {
            const auto subject = subjects_mod ? k % subjects_mod : k;
            records.push_back({"img" + std::to_string(k) + ".png", KLGrade(g), "S" + std::to_string(subject)});
        }
    }
    return DatasetManifest(std::move(records));
}

std::array<ClassCounts, 3> per_split_counts(const DatasetManifest& m) {
    std::array<ClassCounts, 3> out{};
    for (const auto& r : m.records()) {
        REQUIRE(r.split != Split::unassigned);
        out[static_cast<int>(r.split) - 1][r.grade.index()]++;
    }
    return out;
}

}  // namespace

TEST_CASE("parse_ratios") {
    const auto r = parse_ratios("7:1:2");
    CHECK(r.train == 7.0);
    CHECK(r.val == 1.0);
    CHECK(r.test == 2.0);
    CHECK(parse_ratios("0.7:0.1:0.2").test == doctest::Approx(0.2));
    CHECK_THROWS(parse_ratios("7:1"));
    CHECK_THROWS(parse_ratios("7:1:x"));
    CHECK_THROWS(parse_ratios("7:0:2"));
    CHECK_THROWS(parse_ratios("7:-1:2"));
}

TEST_CASE("largest remainder apportionment") {
    CHECK(largest_remainder(10, {}) == std::array<std::size_t, 3>{7, 1, 2});
    CHECK(largest_remainder(0, {}) == std::array<std::size_t, 3>{0, 0, 0});
    CHECK(largest_remainder(1, {}) == std::array<std::size_t, 3>{1, 0, 0});
    // 3 x (0.7, 0.1, 0.2) = 2.1, 0.3, 0.6 -> 2, 0, 1
    CHECK(largest_remainder(3, {}) == std::array<std::size_t, 3>{2, 0, 1});
    // Equal thirds: the tie goes to train first.
    CHECK(largest_remainder(4, {1, 1, 1}) == std::array<std::size_t, 3>{2, 1, 1});
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        const auto n = rng.below(500);
        const SplitRatios r{rng.uniform(0.1, 5), rng.uniform(0.1, 5), rng.uniform(0.1, 5)};
        const auto c = largest_remainder(n, r);
        CHECK(c[0] + c[1] + c[2] == n);
        const double total = r.train + r.val + r.test;
        const auto a = r.as_array();
        for (int k = 0; k < 3; ++k) CHECK(std::abs(static_cast<double>(c[k]) - n * a[k] / total) < 1.0);
    }
}

TEST_CASE("ten records per grade split 7/1/2 per grade") {
    const auto split = stratified_split(make_manifest({10, 10, 10, 10, 10}), {}, 3);
    const auto counts = per_split_counts(split);
    for (int g = 0; g < 5; ++g) {
        CHECK(counts[0][g] == 7);
        CHECK(counts[1][g] == 1);
        CHECK(counts[2][g] == 2);
    }
}

TEST_CASE("split is a deterministic exhaustive partition") {
    const auto m = make_manifest({331, 152, 219, 107, 32});
    const auto a = stratified_split(m, {}, 11);
    const auto b = stratified_split(m, {}, 11);
    const auto c = stratified_split(m, {}, 12);
    REQUIRE(a.size() == m.size());
    bool differs = false;
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(a.records()[i].image_path == m.records()[i].image_path);
        CHECK(a.records()[i].split == b.records()[i].split);
        differs |= a.records()[i].split != c.records()[i].split;
    }
    CHECK(differs);
    const auto counts = per_split_counts(a);
    for (int g = 0; g < 5; ++g) {
        const double n = static_cast<double>(m.class_counts()[g]);
        CHECK(std::abs(counts[0][g] - std::round(0.7 * n)) <= 1.0);
        CHECK(std::abs(counts[1][g] - std::round(0.1 * n)) <= 1.0);
        CHECK(std::abs(counts[2][g] - std::round(0.2 * n)) <= 1.0);
    }
}

TEST_CASE("8,260 imbalanced records give the expected split totals") {
    const auto split = stratified_split(make_manifest({3253, 1495, 2175, 1086, 251}), {}, 0);
    std::array<std::size_t, 3> totals{};
    for (const auto& r : split.records()) totals[static_cast<int>(r.split) - 1]++;
    CHECK(std::abs(static_cast<long>(totals[0]) - 5782) <= 5);
    CHECK(std::abs(static_cast<long>(totals[1]) - 826) <= 5);
    CHECK(std::abs(static_cast<long>(totals[2]) - 1652) <= 5);
}

TEST_CASE("empty grades contribute nothing") {
    const auto split = stratified_split(make_manifest({10, 0, 0, 0, 3}), {}, 1);
    const auto counts = per_split_counts(split);
    CHECK(counts[0][1] + counts[1][1] + counts[2][1] == 0);
    CHECK(counts[0][4] + counts[1][4] + counts[2][4] == 3);
}

TEST_CASE("pre-assigned records are rejected") {
    auto records = make_manifest({3, 3, 3, 3, 3}).records();
    records[4].split = Split::train;
    CHECK_THROWS(stratified_split(DatasetManifest(records), {}, 0));
}

TEST_CASE("subject mode keeps subjects together") {
    const auto m = make_manifest({40, 30, 30, 20, 10}, 37);
    const auto split = stratified_split(m, {}, 4, SplitGranularity::by_subject);
    std::map<std::string, std::set<Split>> seen;
    for (const auto& r : split.records()) seen[r.subject_id].insert(r.split);
    CHECK(seen.size() == 37);
    for (const auto& [subject, splits] : seen) CHECK(splits.size() == 1);
}

TEST_CASE("stratified_partition covers every index once") {
    std::vector<KLGrade> labels;
    Rng rng(8);
    for (int i = 0; i < 97; ++i) labels.emplace_back(static_cast<int>(rng.below(5)));
    const auto parts = stratified_partition(labels, {8, 2, 0}, 3);
    CHECK(parts[2].empty());
    std::vector<std::size_t> all = parts[0];
    all.insert(all.end(), parts[1].begin(), parts[1].end());
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}
