#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "kneexnet/backbones/backbone.hpp"

namespace kneexnet::backbones {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned weight container. Layout: 8-byte magic "KXNCKPT\0", u32 version,
/// u64 header length, JSON header (kind, spec, training metadata, tensor
/// names/shapes), then every tensor as little-endian float64 in header order.
struct Checkpoint {
    std::string kind = "backbone";  // "backbone" or "stacker"
    nlohmann::json spec;
    ModelState weights;
    int epoch = 0;
    double val_accuracy = 0.0;
    std::uint64_t seed = 0;
    nlohmann::json extra = nlohmann::json::object();

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const BackboneSpec& spec);
BackboneSpec backbone_spec_from_json(const nlohmann::json& j);

Checkpoint make_checkpoint(Model& model, int epoch, double val_accuracy, std::uint64_t seed);
/// Rebuilds the architecture from the stored spec and loads the weights.
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace kneexnet::backbones
