#include "kneexnet/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "kneexnet/random.hpp"

namespace kneexnet::data {

void AugmentationConfig::validate() const {
    if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) {
        throw std::invalid_argument(fmt::format("augmentation.hflip_prob must be in [0,1], got {}", hflip_prob));
    }
    if (!(brightness_range.lo <= brightness_range.hi) || brightness_range.lo < 0.0) {
        throw std::invalid_argument("augmentation.brightness_range must be a non-negative interval with lo <= hi");
    }
    if (!(saturation_range.lo <= saturation_range.hi) || saturation_range.lo < 0.0) {
        throw std::invalid_argument("augmentation.saturation_range must be a non-negative interval with lo <= hi");
    }
    if (!(max_rotation_deg >= 0.0)) {
        throw std::invalid_argument(fmt::format("augmentation.max_rotation_deg must be >= 0, got {}", max_rotation_deg));
    }
    if (!(max_translate_frac >= 0.0 && max_translate_frac <= 1.0)) {
        throw std::invalid_argument(
            fmt::format("augmentation.max_translate_frac must be in [0,1], got {}", max_translate_frac));
    }
}

AugmentationConfig AugmentationConfig::identity(std::uint64_t seed) {
    AugmentationConfig cfg;
    cfg.hflip_prob = 0.0;
    cfg.brightness_range = {1.0, 1.0};
    cfg.saturation_range = {1.0, 1.0};
    cfg.max_rotation_deg = 0.0;
    cfg.max_translate_frac = 0.0;
    cfg.seed = seed;
    return cfg;
}

AugmentationParams draw_augmentation(const AugmentationConfig& cfg, int width, int height,
                                     std::uint64_t sample_index, std::uint64_t epoch) {
    // Every draw is consumed regardless of the config so that changing one
    // range does not shift the others.
    Rng rng(derive_seed(cfg.seed, epoch, sample_index));
    AugmentationParams p;
    p.flip = rng.uniform() < cfg.hflip_prob;
    p.brightness = rng.uniform(cfg.brightness_range.lo, cfg.brightness_range.hi);
    p.saturation = rng.uniform(cfg.saturation_range.lo, cfg.saturation_range.hi);
    p.rotation_deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
    const double max_dx = cfg.max_translate_frac * width;
    const double max_dy = cfg.max_translate_frac * height;
    p.translate_x = static_cast<int>(std::lround(rng.uniform(-max_dx, max_dx)));
    p.translate_y = static_cast<int>(std::lround(rng.uniform(-max_dy, max_dy)));
    return p;
}

namespace {

void flip_horizontal(ImageTensor& img) {
    for (int c = 0; c < img.channels(); ++c) {
        for (int y = 0; y < img.height(); ++y) {
            float* row = &img.at(c, y, 0);
            std::reverse(row, row + img.width());
        }
    }
}

void scale_brightness(ImageTensor& img, double factor) {
    for (auto& v : img.data()) v = static_cast<float>(std::clamp(v * factor, 0.0, 1.0));
}

// Blend with the luma image; identical channels make this a no-op.
void scale_saturation(ImageTensor& img, double factor) {
    if (img.channels() != 3) return;
    const std::size_t n = img.plane_size();
    auto& d = img.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double r = d[i], g = d[n + i], b = d[2 * n + i];
        const double gray = 0.299 * r + 0.587 * g + 0.114 * b;
        d[i] = static_cast<float>(std::clamp(gray + factor * (r - gray), 0.0, 1.0));
        d[n + i] = static_cast<float>(std::clamp(gray + factor * (g - gray), 0.0, 1.0));
        d[2 * n + i] = static_cast<float>(std::clamp(gray + factor * (b - gray), 0.0, 1.0));
    }
}

// Rotation about the image centre followed by an integer translation, applied
// as one inverse-mapped bilinear warp with zero fill.
ImageTensor rotate_translate(const ImageTensor& img, double angle_deg, int dx, int dy) {
    ImageTensor out(img.channels(), img.height(), img.width(), 0.0f);
    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(theta), sn = std::sin(theta);
    const double cx = (img.width() - 1) * 0.5, cy = (img.height() - 1) * 0.5;
    const int w = img.width(), h = img.height();
    const std::size_t plane = img.plane_size();
    const float* src = img.data().data();
    float* dst = out.data().data();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double ux = x - dx - cx;
            const double uy = y - dy - cy;
            const double sx = cs * ux + sn * uy + cx;
            const double sy = -sn * ux + cs * uy + cy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            if (x0 < -1 || y0 < -1 || x0 >= w || y0 >= h) continue;
            const double fx = sx - x0, fy = sy - y0;
            // Bilinear taps; out-of-range taps contribute zero.
            const bool l = x0 >= 0, r = x0 + 1 < w, t = y0 >= 0, b = y0 + 1 < h;
            const double w00 = (l && t) ? (1 - fx) * (1 - fy) : 0.0;
            const double w01 = (r && t) ? fx * (1 - fy) : 0.0;
            const double w10 = (l && b) ? (1 - fx) * fy : 0.0;
            const double w11 = (r && b) ? fx * fy : 0.0;
            const std::size_t i00 = static_cast<std::size_t>(std::max(y0, 0)) * w + static_cast<std::size_t>(std::max(x0, 0));
            const std::size_t i01 = static_cast<std::size_t>(std::max(y0, 0)) * w + static_cast<std::size_t>(std::min(x0 + 1, w - 1));
            const std::size_t i10 = static_cast<std::size_t>(std::min(y0 + 1, h - 1)) * w + static_cast<std::size_t>(std::max(x0, 0));
            const std::size_t i11 = static_cast<std::size_t>(std::min(y0 + 1, h - 1)) * w + static_cast<std::size_t>(std::min(x0 + 1, w - 1));
            const std::size_t o = static_cast<std::size_t>(y) * w + x;
            for (int c = 0; c < img.channels(); ++c) {
                const float* p = src + c * plane;
                dst[c * plane + o] = static_cast<float>(w00 * p[i00] + w01 * p[i01] + w10 * p[i10] + w11 * p[i11]);
            }
        }
    }
    return out;
}

}  // namespace

ImageTensor apply_augmentation(const ImageTensor& image, const AugmentationParams& params) {
    ImageTensor out = image;
    if (params.flip) flip_horizontal(out);
    if (params.brightness != 1.0) scale_brightness(out, params.brightness);
    if (params.saturation != 1.0) scale_saturation(out, params.saturation);
    if (params.rotation_deg != 0.0 || params.translate_x != 0 || params.translate_y != 0) {
        out = rotate_translate(out, params.rotation_deg, params.translate_x, params.translate_y);
    }
    return out;
}

ImageTensor augment(const ImageTensor& image, const AugmentationConfig& cfg, std::uint64_t sample_index,
                    std::uint64_t epoch) {
    return apply_augmentation(image, draw_augmentation(cfg, image.width(), image.height(), sample_index, epoch));
}

}  // namespace kneexnet::data
