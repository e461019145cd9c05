#include "kneexnet/data/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "kneexnet/random.hpp"

namespace kneexnet::data {

Quadrant marker_quadrant(KLGrade grade) {
    switch (grade.value()) {
        case 0: return Quadrant::top_left;
        case 1: return Quadrant::top_right;
        case 2: return Quadrant::bottom_left;
        case 3: return Quadrant::bottom_right;
        default: return Quadrant::centre;
    }
}

RawImage make_marker_image(KLGrade grade, std::uint64_t seed, const MarkerImageSpec& spec) {
    Rng rng(seed);
    const int n = spec.size;
    RawImage img{n, n, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(n) * n)};

    // Soft horizontal band loosely resembling a joint line, plus sensor noise.
    for (int y = 0; y < n; ++y) {
        const double t = (y - n * 0.5) / (n * 0.25);
        const double band = 25.0 * std::exp(-t * t);
        for (int x = 0; x < n; ++x) {
            const double v = spec.background + band + spec.noise_sigma * rng.normal();
            img.pixels[static_cast<std::size_t>(y) * n + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }

    int cx = n / 2, cy = n / 2;
    switch (marker_quadrant(grade)) {
        case Quadrant::top_left: cx = n / 4; cy = n / 4; break;
        case Quadrant::top_right: cx = 3 * n / 4; cy = n / 4; break;
        case Quadrant::bottom_left: cx = n / 4; cy = 3 * n / 4; break;
        case Quadrant::bottom_right: cx = 3 * n / 4; cy = 3 * n / 4; break;
        case Quadrant::centre: break;
    }
    const int span = 2 * spec.jitter + 1;
    cx += static_cast<int>(rng.below(static_cast<std::uint64_t>(span))) - spec.jitter;
    cy += static_cast<int>(rng.below(static_cast<std::uint64_t>(span))) - spec.jitter;
    const int half = spec.marker_side / 2;
    for (int y = std::max(0, cy - half); y < std::min(n, cy + half); ++y) {
        for (int x = std::max(0, cx - half); x < std::min(n, cx + half); ++x) {
            const double v = spec.marker_level + 0.5 * spec.noise_sigma * rng.normal();
            img.pixels[static_cast<std::size_t>(y) * n + x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return img;
}

AugmentationConfig marker_augmentation() {
    AugmentationConfig cfg;
    cfg.hflip_prob = 0.0;
    return cfg;
}

DatasetManifest write_marker_dataset(const std::filesystem::path& dir, const MarkerDatasetCounts& counts,
                                     std::uint64_t seed, bool preassign, const MarkerImageSpec& spec) {
    std::filesystem::create_directories(dir / "images");
    std::vector<SampleRecord> records;
    const std::array<std::pair<Split, std::size_t>, 3> plan = {
        {{Split::train, counts.train_per_grade}, {Split::val, counts.val_per_grade}, {Split::test, counts.test_per_grade}}};
    std::size_t serial = 0;
    for (const auto& [split, per_grade] : plan) {
        for (std::size_t i = 0; i < per_grade; ++i) {
            for (int g = 0; g < static_cast<int>(kNumGrades); ++g) {
                const auto name = fmt::format("img_{:05d}.png", serial);
                write_png(dir / "images" / name, make_marker_image(KLGrade(g), derive_seed(seed, serial), spec));
                records.push_back({"images/" + name, KLGrade(g), fmt::format("S{:05d}", serial),
                                   preassign ? split : Split::unassigned});
                ++serial;
            }
        }
    }
    DatasetManifest manifest(std::move(records), dir);
    write_manifest(manifest, dir / "manifest.csv");
    return manifest;
}

}  // namespace kneexnet::data
