#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>

#include "kneexnet/data/augment.hpp"

namespace kneexnet::training {

enum class SamplingMode { uniform, inverse_frequency };

std::string_view to_string(SamplingMode mode);
SamplingMode parse_sampling_mode(std::string_view text);

/// Training protocol. Defaults: 30 epochs, batch 28, Adam at 1e-4 decayed by
/// 0.1 every 5 epochs, uniform sampling.
struct TrainConfig {
    int epochs = 30;
    int batch_size = 28;
    double base_lr = 1e-4;
    double lr_decay_factor = 0.1;
    int lr_decay_every = 5;
    SamplingMode sampling_mode = SamplingMode::uniform;
    std::uint64_t seed = 0;
    data::AugmentationConfig augmentation;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// base_lr * lr_decay_factor^floor(epoch / lr_decay_every), epoch zero-based.
/// When the decay factor is a power of ten the product is formed in decimal
/// and rounded once, so 1e-4 decays to exactly 1e-5, 1e-6, ...
double lr_at_epoch(const TrainConfig& cfg, int epoch);

/// Mirrors the TrainConfig fields; augmentation is a nested table.
nlohmann::json to_json(const TrainConfig& cfg);
/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace kneexnet::training
