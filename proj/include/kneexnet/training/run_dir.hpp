#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "kneexnet/training/trainer.hpp"

namespace kneexnet::training {

/// runs/<experiment>/<backbone>/<seed>/ with a fixed set of artifacts.
struct RunPaths {
    std::filesystem::path dir;

    static RunPaths make(const std::filesystem::path& root, const std::string& experiment,
                         const std::string& backbone, std::uint64_t seed);

    std::filesystem::path checkpoint() const { return dir / "checkpoint.kxn"; }
    std::filesystem::path history() const { return dir / "history.csv"; }
    std::filesystem::path metrics() const { return dir / "metrics.json"; }
    std::filesystem::path run_info() const { return dir / "run.json"; }
    std::filesystem::path config() const { return dir / "config.toml"; }
};

/// epoch,lr,train_loss,val_accuracy with shortest round-trip number formatting.
std::string format_history_csv(const TrainHistory& history);
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);
TrainHistory read_history_csv(const std::filesystem::path& path);

/// Pretty-printed JSON with a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

/// Order-sensitive FNV-1a digest of (image path, grade) pairs, used to check
/// that runs share the same evaluation split.
std::string split_fingerprint(const data::DatasetManifest& manifest);

}  // namespace kneexnet::training
