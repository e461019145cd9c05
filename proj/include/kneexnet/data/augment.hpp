#pragma once

#include <cstdint>

#include "kneexnet/data/image.hpp"

namespace kneexnet::data {

struct Interval {
    double lo = 1.0;
    double hi = 1.0;
};

/// Training-time augmentation recipe. Defaults are the published recipe:
/// flip p=0.5, brightness [0.5,1.2], saturation [0.5,1.5], rotation within
/// 5 degrees, translation within 10% of the image size.
struct AugmentationConfig {
    double hflip_prob = 0.5;
    Interval brightness_range{0.5, 1.2};
    Interval saturation_range{0.5, 1.5};
    double max_rotation_deg = 5.0;
    double max_translate_frac = 0.10;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;

    static AugmentationConfig identity(std::uint64_t seed = 0);
};

/// Concrete draw for one (seed, epoch, sample) triple.
struct AugmentationParams {
    bool flip = false;
    double brightness = 1.0;
    double saturation = 1.0;
    double rotation_deg = 0.0;
    int translate_x = 0;
    int translate_y = 0;
};

AugmentationParams draw_augmentation(const AugmentationConfig& cfg, int width, int height,
                                     std::uint64_t sample_index, std::uint64_t epoch);

ImageTensor apply_augmentation(const ImageTensor& image, const AugmentationParams& params);

/// flip -> brightness -> saturation -> rotation -> translation, with randomness
/// from a stream keyed on (cfg.seed, epoch, sample_index).
ImageTensor augment(const ImageTensor& image, const AugmentationConfig& cfg,
                    std::uint64_t sample_index, std::uint64_t epoch);

}  // namespace kneexnet::data
