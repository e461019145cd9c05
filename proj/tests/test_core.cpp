#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "kneexnet/grade.hpp"
#include "kneexnet/random.hpp"

using namespace kneexnet;

TEST_CASE("KL grades accept 0..4 only") {
    for (int g = 0; g < 5; ++g) CHECK(KLGrade(g).value() == g);
    CHECK_THROWS_AS(KLGrade(-1), std::out_of_range);
    CHECK_THROWS_AS(KLGrade(5), std::out_of_range);
    CHECK(KLGrade(0).label() == "None");
    CHECK(KLGrade(4).label() == "Severe");
    CHECK(KLGrade(1) < KLGrade(3));
}

TEST_CASE("derive_seed separates streams and is stable") {
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(2, 1));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2));
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, i));
    CHECK(seen.size() == 1000);
}

TEST_CASE("Rng draws are reproducible and in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const auto k = a.below(7);
        CHECK(k == b.below(7));
        CHECK(k < 7);
    }
}

TEST_CASE("Rng normal has unit moments") {
    Rng rng(3);
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(s / n == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("Rng shuffle is a permutation") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    Rng rng(9);
    rng.shuffle(std::span<int>(v));
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
    CHECK(!std::is_sorted(v.begin(), v.end()));
}
