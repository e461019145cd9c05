#include "kneexnet/sampling/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "kneexnet/random.hpp"

namespace kneexnet::sampling {

SamplingWeights inverse_frequency_weights(const ClassCounts& counts) {
    SamplingWeights w;
    bool any = false;
    for (std::size_t g = 0; g < kNumGrades; ++g) {
        if (counts[g] > 0) {
            w.per_class[g] = 1.0 / static_cast<double>(counts[g]);
            any = true;
        }
    }
    if (!any) throw std::invalid_argument("inverse_frequency_weights: all class counts are zero");
    return w;
}

SamplingWeights inverse_frequency_weights(const ClassCounts& counts, std::span<const KLGrade> labels) {
    auto w = inverse_frequency_weights(counts);
    w.per_sample.reserve(labels.size());
    for (const auto g : labels) {
        const auto& cw = w.per_class[g.index()];
        if (!cw) {
            throw std::invalid_argument(
                fmt::format("inverse_frequency_weights: class {} appears in the data but has count 0", g.value()));
        }
        w.per_sample.push_back(*cw);
    }
    return w;
}

SamplingWeights inverse_frequency_weights(std::span<const KLGrade> labels) {
    ClassCounts counts{};
    for (const auto g : labels) ++counts[g.index()];
    return inverse_frequency_weights(counts, labels);
}

std::vector<std::size_t> weighted_sample(const SamplingWeights& weights, std::size_t n_draws, std::uint64_t seed) {
    const auto& w = weights.per_sample;
    if (w.empty()) throw std::invalid_argument("weighted_sample: no per-sample weights");
    if (n_draws == 0) throw std::invalid_argument("weighted_sample: n_draws must be >= 1");

    std::vector<double> cumulative(w.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
            throw std::invalid_argument(fmt::format("weighted_sample: weight {} is not positive", i));
        }
        total += w[i];
        cumulative[i] = total;
    }

    Rng rng(seed);
    std::vector<std::size_t> out;
    out.reserve(n_draws);
    for (std::size_t k = 0; k < n_draws; ++k) {
        const double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        out.push_back(static_cast<std::size_t>(it - cumulative.begin()));
    }
    return out;
}

void write_index_csv(std::span<const std::size_t> indices, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out << "index\n";
    for (auto i : indices) out << i << '\n';
}

}  // namespace kneexnet::sampling
