#include "kneexnet/backbones/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

namespace kneexnet::backbones {

namespace {

constexpr std::array<char, 8> kMagic = {'K', 'X', 'N', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw BackboneError(fmt::format("'{}': truncated checkpoint", path.string()));
    return value;
}

}  // namespace

nlohmann::json to_json(const BackboneSpec& spec) {
    return {{"name", spec.name}, {"num_classes", spec.num_classes}, {"pretrained", spec.pretrained}};
}

BackboneSpec backbone_spec_from_json(const nlohmann::json& j) {
    BackboneSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    spec.pretrained = j.value("pretrained", false);
    return spec;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    nlohmann::json header;
    header["kind"] = ckpt.kind;
    header["spec"] = ckpt.spec;
    header["epoch"] = ckpt.epoch;
    header["val_accuracy"] = ckpt.val_accuracy;
    header["seed"] = ckpt.seed;
    header["extra"] = ckpt.extra;
    auto& tensors = header["tensors"] = nlohmann::json::array();
    for (const auto& t : ckpt.weights) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw BackboneError(fmt::format("cannot write checkpoint '{}'", path.string()));
    out.write(kMagic.data(), kMagic.size());
    write_pod<std::uint32_t>(out, kCheckpointVersion);
    write_pod<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : ckpt.weights) {
        out.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    }
    if (!out) throw BackboneError(fmt::format("failed writing checkpoint '{}'", path.string()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BackboneError(fmt::format("cannot open checkpoint '{}'", path.string()));
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw BackboneError(fmt::format("'{}' is not a checkpoint file", path.string()));
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw BackboneError(fmt::format("'{}': unsupported checkpoint version {}", path.string(), version));
    }
    const auto len = read_pod<std::uint64_t>(in, path);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw BackboneError(fmt::format("'{}': truncated checkpoint header", path.string()));

    Checkpoint ckpt;
    try {
        const auto header = nlohmann::json::parse(text);
        ckpt.kind = header.at("kind").get<std::string>();
        ckpt.spec = header.at("spec");
        ckpt.epoch = header.at("epoch").get<int>();
        ckpt.val_accuracy = header.at("val_accuracy").get<double>();
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        ckpt.extra = header.value("extra", nlohmann::json::object());
        for (const auto& t : header.at("tensors")) {
            NamedTensor nt{t.at("name").get<std::string>(), t.at("shape").get<nn::Shape>(), {}};
            nt.values.resize(nn::shape_size(nt.shape));
            ckpt.weights.push_back(std::move(nt));
        }
    } catch (const nlohmann::json::exception& e) {
        throw BackboneError(fmt::format("'{}': malformed checkpoint header: {}", path.string(), e.what()));
    }
    for (auto& t : ckpt.weights) {
        in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
        if (!in) throw BackboneError(fmt::format("'{}': truncated tensor '{}'", path.string(), t.name));
    }
    return ckpt;
}

Checkpoint make_checkpoint(Model& model, int epoch, double val_accuracy, std::uint64_t seed) {
    Checkpoint ckpt;
    ckpt.kind = "backbone";
    ckpt.spec = to_json(model.spec());
    ckpt.weights = model.state();
    ckpt.epoch = epoch;
    ckpt.val_accuracy = val_accuracy;
    ckpt.seed = seed;
    ckpt.extra["variant"] = BackboneRegistry::global().info(model.spec().name).variant;
    ckpt.extra["cam_layer"] = model.default_cam_layer();
    return ckpt;
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != "backbone") {
        throw BackboneError(fmt::format("checkpoint holds a '{}', not a backbone", ckpt.kind));
    }
    auto spec = backbone_spec_from_json(ckpt.spec);
    spec.pretrained = false;  // architecture only; weights come from the checkpoint
    auto model = create_backbone(spec, ckpt.seed);
    model->load_state(ckpt.weights);
    return model;
}

}  // namespace kneexnet::backbones
