#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kneexnet/data/image.hpp"
#include "kneexnet/grade.hpp"
#include "kneexnet/nn/layers.hpp"

namespace kneexnet::backbones {

class BackboneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BackboneSpec {
    std::string name = "tiny";
    std::size_t num_classes = kNumGrades;
    bool pretrained = false;

    /// Throws BackboneError for unknown names or num_classes < 2.
    void validate() const;
};

/// Raw class scores for one image.
struct LogitsVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    friend bool operator==(const LogitsVector&, const LogitsVector&) = default;
};

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

/// Static facts about a registry entry.
struct BackboneInfo {
    std::string name;
    std::string variant;       // resolved architecture variant, recorded in run metadata
    std::size_t feature_dim;   // width of the penultimate features feeding the head
    std::string cam_layer;     // default Smooth-GradCAM++ target
};

/// Feature extractor supplied by a provider. Its output must be N x feature_dim;
/// the classification head is attached by create_backbone.
struct Trunk {
    nn::Sequential layers;
    std::size_t feature_dim = 0;
    std::string cam_layer;
};

struct BackboneProvider {
    std::function<Trunk(const BackboneSpec&, std::uint64_t seed)> make_trunk;
    bool has_pretrained = false;
};

/// Named weight tensors in layer order.
struct NamedTensor {
    std::string name;
    nn::Shape shape;
    std::vector<double> values;
    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};
using ModelState = std::vector<NamedTensor>;

ModelState capture_state(nn::Sequential& net);
void restore_state(nn::Sequential& net, const ModelState& state);

/// Trunk plus replaced classification head. Used by one trainer at a time;
/// the const inference path may be shared across threads.
class Model {
public:
    Model(BackboneSpec spec, nn::Sequential net, std::string cam_layer, int input_size = data::kInputSize);

    const BackboneSpec& spec() const { return spec_; }
    int input_size() const { return input_size_; }
    const std::string& default_cam_layer() const { return cam_layer_; }
    std::vector<std::string> layer_names() const { return net_.names(); }

    /// Evaluation-mode forward; one LogitsVector per image.
    std::vector<LogitsVector> forward(std::span<const data::ImageTensor> batch) const;
    nn::Tensor infer(const nn::Tensor& batch) const;

    nn::Tensor to_batch(std::span<const data::ImageTensor> images) const;

    nn::Sequential& network() { return net_; }
    const nn::Sequential& network() const { return net_; }
    std::vector<nn::Parameter*> parameters() { return net_.parameters(); }

    ModelState state() { return capture_state(net_); }
    void load_state(const ModelState& state) { restore_state(net_, state); }

private:
    BackboneSpec spec_;
    nn::Sequential net_;
    std::string cam_layer_;
    int input_size_;
};

/// The ten published backbones plus `tiny`. Only `tiny` ships with a built-in
/// provider; the others are supplied through register_provider (in-process or
/// from a plugin library).
class BackboneRegistry {
public:
    static BackboneRegistry& global();

    BackboneRegistry();

    std::vector<std::string> names() const;
    bool known(const std::string& name) const { return info_.count(name) != 0; }
    const BackboneInfo& info(const std::string& name) const;

    void register_provider(const std::string& name, BackboneProvider provider);
    bool has_provider(const std::string& name) const { return providers_.count(name) != 0; }

    std::unique_ptr<Model> create(const BackboneSpec& spec, std::uint64_t seed) const;

private:
    std::map<std::string, BackboneInfo> info_;
    std::map<std::string, BackboneProvider> providers_;
};

/// Builds a model from the global registry with seeded initialization.
std::unique_ptr<Model> create_backbone(const BackboneSpec& spec, std::uint64_t seed = 0);

/// Name of the C symbol a plugin library must export:
///   extern "C" void kneexnet_register_backbones(kneexnet::backbones::BackboneRegistry&);
inline constexpr const char* kPluginEntryPoint = "kneexnet_register_backbones";

/// dlopens a plugin library and lets it register providers. The library stays
/// loaded for the life of the process.
void load_backbone_plugin(const std::filesystem::path& path, BackboneRegistry& registry = BackboneRegistry::global());

/// Trunk of the built-in `tiny` network: fixed 4x4 average-pool stem, two
/// conv(3x3)-ReLU-maxpool(2) blocks with 8 and 16 channels, then flatten.
Trunk make_tiny_trunk(std::uint64_t seed, int input_size = data::kInputSize);

}  // namespace kneexnet::backbones
