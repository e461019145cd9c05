#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "kneexnet/backbones/backbone.hpp"
#include "kneexnet/data/image.hpp"
#include "kneexnet/grade.hpp"

namespace kneexnet::explain {

class CamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CamConfig {
    int n_samples = 25;
    double noise_sigma = 0.15;  // fraction of the input's value range
    std::string target_layer;   // empty: the model's default layer
    std::uint64_t seed = 0;     // noise stream

    void validate() const;
};

/// Row-major H x W grid.
struct SaliencyMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Resolves the target layer and checks it yields a spatial feature map.
std::size_t resolve_target_layer(backbones::Model& model, const std::string& name);

/// Rectified GradCAM++ maps at the target layer's resolution, one per image.
/// Channel weights are sum_ij alpha_ij * relu(g_ij) with
/// alpha = g^2 / (2 g^2 + sum_ab A_ab g^3), g = dY_c/dA.
std::vector<SaliencyMap> gradcampp_raw(backbones::Model& model, std::span<const data::ImageTensor> images,
                                       KLGrade target_class, const std::string& target_layer);

/// Bilinear upsampling to the input size, then min-max normalization to [0,1]
/// (an identically zero map stays zero).
SaliencyMap finalize_map(const SaliencyMap& raw, int height, int width);

/// Plain GradCAM++ for one image.
SaliencyMap gradcampp(backbones::Model& model, const data::ImageTensor& image, KLGrade target_class,
                      const std::string& target_layer = {});

/// GradCAM++ averaged over n_samples copies of the image with additive
/// Gaussian noise (std = noise_sigma x value range), then upsampled and
/// normalized.
SaliencyMap smooth_gradcampp(backbones::Model& model, const data::ImageTensor& image, KLGrade target_class,
                             const CamConfig& cfg);

/// Jet colormap; 0 maps to dark blue.
std::array<double, 3> colormap(double v);

/// alpha * colormap(map) + (1 - alpha) * image, as 3 x H x W.
data::ImageTensor overlay(const data::ImageTensor& image, const SaliencyMap& map, double alpha);

void write_map_csv(const SaliencyMap& map, const std::filesystem::path& path);

/// Fraction of the map's total mass inside [y0,y1) x [x0,x1).
double mass_fraction(const SaliencyMap& map, int y0, int y1, int x0, int x1);

}  // namespace kneexnet::explain
