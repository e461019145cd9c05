#include "kneexnet/explain/cam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "kneexnet/random.hpp"

namespace kneexnet::explain {

void CamConfig::validate() const {
    if (n_samples < 1) throw CamError(fmt::format("n_samples must be >= 1, got {}", n_samples));
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw CamError(fmt::format("noise_sigma must be >= 0, got {}", noise_sigma));
    }
}

std::size_t resolve_target_layer(backbones::Model& model, const std::string& name) {
    const auto& layer_name = name.empty() ? model.default_cam_layer() : name;
    const auto& net = model.network();
    const auto idx = net.find(layer_name);
    if (idx == net.size()) {
        throw CamError(fmt::format("target layer '{}' not found; available layers: {}", layer_name,
                                   fmt::join(net.names(), ", ")));
    }
    // A spatial layer keeps producing rank-4 output; probe with a blank input.
    const auto side = static_cast<std::size_t>(model.input_size());
    nn::Tensor h({1, 3, side, side});
    for (std::size_t i = 0; i <= idx; ++i) h = net.layer(i).infer(h);
    if (h.rank() != 4) {
        throw CamError(fmt::format("target layer '{}' ({}) is not convolutional: output {}", layer_name,
                                   net.layer(idx).kind(), nn::to_string(h.shape())));
    }
    return idx;
}

std::vector<SaliencyMap> gradcampp_raw(backbones::Model& model, std::span<const data::ImageTensor> images,
                                       KLGrade target_class, const std::string& target_layer) {
    const auto idx = resolve_target_layer(model, target_layer);
    if (target_class.index() >= model.spec().num_classes) throw CamError("target class outside model output");
    auto& net = model.network();

    const auto [logits, acts] = net.forward_capture(model.to_batch(images), idx);
    nn::Tensor seed_grad(logits.shape());
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    for (std::size_t b = 0; b < n; ++b) seed_grad[b * k + target_class.index()] = 1.0;
    const auto grads = net.backward_to(seed_grad, idx);
    net.zero_grad();

    const std::size_t channels = acts.dim(1), h = acts.dim(2), w = acts.dim(3), hw = h * w;
    std::vector<SaliencyMap> maps(n);
    for (std::size_t b = 0; b < n; ++b) {
        auto& m = maps[b];
        m.height = static_cast<int>(h);
        m.width = static_cast<int>(w);
        m.values.assign(hw, 0.0);
        for (std::size_t c = 0; c < channels; ++c) {
            const double* a = acts.data() + (b * channels + c) * hw;
            const double* g = grads.data() + (b * channels + c) * hw;
            double a_sum = 0.0;
            for (std::size_t i = 0; i < hw; ++i) a_sum += a[i];
            double weight = 0.0;
            for (std::size_t i = 0; i < hw; ++i) {
                const double g2 = g[i] * g[i];
                const double denom = 2.0 * g2 + a_sum * g2 * g[i];
                const double alpha = denom != 0.0 ? g2 / denom : 0.0;
                weight += alpha * std::max(g[i], 0.0);
            }
            for (std::size_t i = 0; i < hw; ++i) m.values[i] += weight * a[i];
        }
        for (auto& v : m.values) v = std::max(v, 0.0);
    }
    return maps;
}

SaliencyMap finalize_map(const SaliencyMap& raw, int height, int width) {
    SaliencyMap out{height, width, std::vector<double>(static_cast<std::size_t>(height) * width, 0.0)};
    const double sy = static_cast<double>(raw.height) / height;
    const double sx = static_cast<double>(raw.width) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(raw.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, raw.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(raw.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, raw.width - 1);
            const double wx = fx - x0;
            const double top = raw.at(y0, x0) * (1 - wx) + raw.at(y0, x1) * wx;
            const double bottom = raw.at(y1, x0) * (1 - wx) + raw.at(y1, x1) * wx;
            out.values[static_cast<std::size_t>(y) * width + x] = top * (1 - wy) + bottom * wy;
        }
    }
    const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
    const double mn = *lo, mx = *hi;
    if (mx == 0.0) return out;
    if (mx == mn) {
        std::fill(out.values.begin(), out.values.end(), 1.0);
        return out;
    }
    for (auto& v : out.values) v = (v - mn) / (mx - mn);
    return out;
}

SaliencyMap gradcampp(backbones::Model& model, const data::ImageTensor& image, KLGrade target_class,
                      const std::string& target_layer) {
    const auto raw = gradcampp_raw(model, std::span(&image, 1), target_class, target_layer);
    return finalize_map(raw.front(), image.height(), image.width());
}

SaliencyMap smooth_gradcampp(backbones::Model& model, const data::ImageTensor& image, KLGrade target_class,
                             const CamConfig& cfg) {
    cfg.validate();
    const auto [lo, hi] = std::minmax_element(image.data().begin(), image.data().end());
    const double sigma = cfg.noise_sigma * static_cast<double>(*hi - *lo);

    Rng rng(derive_seed(cfg.seed, 0x63616d));
    std::vector<data::ImageTensor> noisy(static_cast<std::size_t>(cfg.n_samples), image);
    if (sigma > 0.0) {
        for (auto& img : noisy) {
            for (auto& v : img.data()) v = static_cast<float>(v + sigma * rng.normal());
        }
    }

    constexpr std::size_t kChunk = 8;
    SaliencyMap mean;
    for (std::size_t start = 0; start < noisy.size(); start += kChunk) {
        const auto count = std::min(kChunk, noisy.size() - start);
        const auto maps = gradcampp_raw(model, std::span(noisy).subspan(start, count), target_class, cfg.target_layer);
        for (const auto& m : maps) {
            if (mean.values.empty()) mean = SaliencyMap{m.height, m.width, std::vector<double>(m.values.size(), 0.0)};
            for (std::size_t i = 0; i < m.values.size(); ++i) mean.values[i] += m.values[i];
        }
    }
    for (auto& v : mean.values) v /= static_cast<double>(cfg.n_samples);
    return finalize_map(mean, image.height(), image.width());
}

std::array<double, 3> colormap(double v) {
    v = std::clamp(v, 0.0, 1.0);
    auto ramp = [](double t) { return std::clamp(1.5 - std::abs(t), 0.0, 1.0); };
    return {ramp(4.0 * v - 3.0), ramp(4.0 * v - 2.0), ramp(4.0 * v - 1.0)};
}

data::ImageTensor overlay(const data::ImageTensor& image, const SaliencyMap& map, double alpha) {
    if (map.height != image.height() || map.width != image.width()) {
        throw CamError(fmt::format("overlay: map {}x{} does not match image {}x{}", map.height, map.width,
                                   image.height(), image.width()));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw CamError(fmt::format("overlay: alpha must be in [0,1], got {}", alpha));
    data::ImageTensor out(3, image.height(), image.width());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const auto rgb = colormap(map.at(y, x));
            for (int c = 0; c < 3; ++c) {
                const double base = image.at(image.channels() == 3 ? c : 0, y, x);
                out.at(c, y, x) = static_cast<float>(alpha * rgb[static_cast<std::size_t>(c)] + (1.0 - alpha) * base);
            }
        }
    }
    return out;
}

void write_map_csv(const SaliencyMap& map, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CamError(fmt::format("cannot write '{}'", path.string()));
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) out << (x ? "," : "") << fmt::format("{}", map.at(y, x));
        out << '\n';
    }
}

double mass_fraction(const SaliencyMap& map, int y0, int y1, int x0, int x1) {
    double inside = 0.0, total = 0.0;
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const double v = map.at(y, x);
            total += v;
            if (y >= y0 && y < y1 && x >= x0 && x < x1) inside += v;
        }
    }
    return total > 0.0 ? inside / total : 0.0;
}

}  // namespace kneexnet::explain
