#include "kneexnet/backbones/backbone.hpp"

#include <dlfcn.h>

#include <cmath>

#include <fmt/format.h>

#include "kneexnet/random.hpp"

namespace kneexnet::backbones {

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax of an empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

void BackboneSpec::validate() const {
    if (!BackboneRegistry::global().known(name)) {
        throw BackboneError(fmt::format("unknown backbone '{}'; registry has: {}", name,
                                        fmt::join(BackboneRegistry::global().names(), ", ")));
    }
    if (num_classes < 2) throw BackboneError(fmt::format("num_classes must be >= 2, got {}", num_classes));
}

ModelState capture_state(nn::Sequential& net) {
    ModelState state;
    for (std::size_t i = 0; i < net.size(); ++i) {
        for (auto* p : net.layer(i).parameters()) {
            state.push_back({net.name(i) + "." + p->name, p->value.shape(), p->value.values()});
        }
    }
    return state;
}

void restore_state(nn::Sequential& net, const ModelState& state) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < net.size(); ++i) {
        for (auto* p : net.layer(i).parameters()) {
            const auto expected = net.name(i) + "." + p->name;
            if (k >= state.size()) throw BackboneError(fmt::format("weights missing tensor '{}'", expected));
            const auto& t = state[k++];
            if (t.name != expected || t.shape != p->value.shape()) {
                throw BackboneError(fmt::format("weight tensor mismatch: expected '{}' {}, found '{}' {}", expected,
                                                nn::to_string(p->value.shape()), t.name, nn::to_string(t.shape)));
            }
            p->value = nn::Tensor(t.shape, t.values);
        }
    }
    if (k != state.size()) throw BackboneError(fmt::format("weights carry {} unexpected tensors", state.size() - k));
}

Model::Model(BackboneSpec spec, nn::Sequential net, std::string cam_layer, int input_size)
    : spec_(std::move(spec)), net_(std::move(net)), cam_layer_(std::move(cam_layer)), input_size_(input_size) {}

nn::Tensor Model::to_batch(std::span<const data::ImageTensor> images) const {
    if (images.empty()) throw BackboneError("forward: empty batch");
    const auto side = static_cast<std::size_t>(input_size_);
    nn::Tensor batch({images.size(), 3, side, side});
    const std::size_t per = 3 * side * side;
    for (std::size_t b = 0; b < images.size(); ++b) {
        const auto& img = images[b];
        if (img.channels() != 3 || img.height() != input_size_ || img.width() != input_size_) {
            throw BackboneError(fmt::format("forward: image {} has shape {}x{}x{}, expected 3x{}x{}", b, img.channels(),
                                            img.height(), img.width(), input_size_, input_size_));
        }
        std::copy(img.data().begin(), img.data().end(), batch.values().begin() + static_cast<std::ptrdiff_t>(b * per));
    }
    return batch;
}

nn::Tensor Model::infer(const nn::Tensor& batch) const { return net_.infer(batch); }

std::vector<LogitsVector> Model::forward(std::span<const data::ImageTensor> batch) const {
    const auto out = infer(to_batch(batch));
    const std::size_t k = out.dim(1);
    std::vector<LogitsVector> logits(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        logits[b].values.assign(out.data() + b * k, out.data() + (b + 1) * k);
        for (double v : logits[b].values) {
            if (!std::isfinite(v)) throw BackboneError("forward produced non-finite logits");
        }
    }
    return logits;
}

// ---------------------------------------------------------------------------

Trunk make_tiny_trunk(std::uint64_t seed, int input_size) {
    if (input_size % 16 != 0) throw BackboneError("tiny backbone needs an input size divisible by 16");
    Trunk t;
    t.layers.add("stem.pool", std::make_unique<nn::AvgPool2d>(4))
        .add("block1.conv", std::make_unique<nn::Conv2d>(3, 8, 3, 1, 1, derive_seed(seed, 11)))
        .add("block1.relu", std::make_unique<nn::ReLU>())
        .add("block1.pool", std::make_unique<nn::MaxPool2d>(2))
        .add("block2.conv", std::make_unique<nn::Conv2d>(8, 16, 3, 1, 1, derive_seed(seed, 12)))
        .add("block2.relu", std::make_unique<nn::ReLU>())
        .add("block2.pool", std::make_unique<nn::MaxPool2d>(2))
        .add("head.flatten", std::make_unique<nn::Flatten>());
    const auto side = static_cast<std::size_t>(input_size / 16);
    t.feature_dim = 16 * side * side;
    t.cam_layer = "block2.relu";
    return t;
}

BackboneRegistry& BackboneRegistry::global() {
    static BackboneRegistry registry;
    return registry;
}

BackboneRegistry::BackboneRegistry() {
    const std::vector<BackboneInfo> entries = {
        {"resnet18", "ResNet-18", 512, "layer4"},
        {"resnet34", "ResNet-34", 512, "layer4"},
        {"resnet50", "ResNet-50", 2048, "layer4"},
        {"vgg16", "VGG-16", 4096, "features.29"},
        {"vgg19", "VGG-19", 4096, "features.35"},
        {"mobilenet", "MobileNetV2", 1280, "features.18"},
        {"densenet121", "DenseNet-121", 1024, "features.norm5"},
        {"densenet161", "DenseNet-161", 2208, "features.norm5"},
        {"efficientnet", "EfficientNet-B0", 1280, "features.8"},
        {"googlenet", "GoogLeNet", 1024, "inception5b"},
        {"tiny", "tiny (2 conv blocks + linear head)", 16 * 14 * 14, "block2.relu"},
    };
    for (const auto& e : entries) info_.emplace(e.name, e);
    providers_["tiny"] = BackboneProvider{[](const BackboneSpec&, std::uint64_t seed) { return make_tiny_trunk(seed); },
                                          false};
}

std::vector<std::string> BackboneRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : info_) out.push_back(name);
    return out;
}

const BackboneInfo& BackboneRegistry::info(const std::string& name) const {
    const auto it = info_.find(name);
    if (it == info_.end()) throw BackboneError(fmt::format("unknown backbone '{}'", name));
    return it->second;
}

void BackboneRegistry::register_provider(const std::string& name, BackboneProvider provider) {
    if (!known(name)) throw BackboneError(fmt::format("cannot register provider for unknown backbone '{}'", name));
    if (!provider.make_trunk) throw BackboneError(fmt::format("provider for '{}' has no trunk factory", name));
    providers_[name] = std::move(provider);
}

std::unique_ptr<Model> BackboneRegistry::create(const BackboneSpec& spec, std::uint64_t seed) const {
    if (!known(spec.name)) {
        throw BackboneError(fmt::format("unknown backbone '{}'; registry has: {}", spec.name, fmt::join(names(), ", ")));
    }
    if (spec.num_classes < 2) throw BackboneError(fmt::format("num_classes must be >= 2, got {}", spec.num_classes));
    const auto p = providers_.find(spec.name);
    if (p == providers_.end()) {
        throw BackboneError(fmt::format("backbone '{}' has no provider registered (load a backbone plugin)", spec.name));
    }
    if (spec.pretrained && !p->second.has_pretrained) {
        throw BackboneError(fmt::format("pretrained weights unavailable for backbone '{}'", spec.name));
    }
    Trunk trunk = p->second.make_trunk(spec, seed);
    if (trunk.feature_dim == 0) throw BackboneError(fmt::format("provider for '{}' reported zero feature width", spec.name));
    const auto& meta = info(spec.name);
    // Head replacement: a fresh linear layer emitting num_classes scores.
    trunk.layers.add("head.fc", std::make_unique<nn::Linear>(trunk.feature_dim, spec.num_classes, derive_seed(seed, 99)));
    auto cam = trunk.cam_layer.empty() ? meta.cam_layer : trunk.cam_layer;
    return std::make_unique<Model>(spec, std::move(trunk.layers), std::move(cam));
}

std::unique_ptr<Model> create_backbone(const BackboneSpec& spec, std::uint64_t seed) {
    return BackboneRegistry::global().create(spec, seed);
}

void load_backbone_plugin(const std::filesystem::path& path, BackboneRegistry& registry) {
    void* handle = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
    if (!handle) throw BackboneError(fmt::format("cannot load plugin '{}': {}", path.string(), dlerror()));
    using EntryFn = void (*)(BackboneRegistry&);
    auto* entry = reinterpret_cast<EntryFn>(dlsym(handle, kPluginEntryPoint));
    if (!entry) {
        dlclose(handle);
        throw BackboneError(fmt::format("plugin '{}' does not export {}", path.string(), kPluginEntryPoint));
    }
    entry(registry);
}

}  // namespace kneexnet::backbones
