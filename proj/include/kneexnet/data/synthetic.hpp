#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "kneexnet/data/augment.hpp"
#include "kneexnet/data/image.hpp"
#include "kneexnet/data/manifest.hpp"

namespace kneexnet::data {

/// Synthetic radiograph-like images whose grade is encoded by the position of
/// a bright square: grades 0-3 put it in the top-left, top-right, bottom-left
/// and bottom-right quadrant respectively, grade 4 centres it.
struct MarkerImageSpec {
    int size = 256;
    int marker_side = 88;
    int jitter = 12;
    double background = 20.0;
    double noise_sigma = 8.0;
    double marker_level = 220.0;
};

enum class Quadrant { top_left, top_right, bottom_left, bottom_right, centre };

Quadrant marker_quadrant(KLGrade grade);

RawImage make_marker_image(KLGrade grade, std::uint64_t seed, const MarkerImageSpec& spec = {});

/// Default augmentation without horizontal flips, which would swap the
/// left and right quadrants and so relabel the image.
AugmentationConfig marker_augmentation();

/// Per-grade sample counts for each split.
struct MarkerDatasetCounts {
    std::size_t train_per_grade = 20;
    std::size_t val_per_grade = 4;
    std::size_t test_per_grade = 4;
};

/// Writes PNGs under `dir/images` and a manifest at `dir/manifest.csv`. With
/// preassign the split column is filled according to counts; otherwise all
/// records are left unassigned.
DatasetManifest write_marker_dataset(const std::filesystem::path& dir, const MarkerDatasetCounts& counts,
                                     std::uint64_t seed, bool preassign = true,
                                     const MarkerImageSpec& spec = {});

}  // namespace kneexnet::data
