#include "kneexnet/training/run_dir.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace kneexnet::training {

RunPaths RunPaths::make(const std::filesystem::path& root, const std::string& experiment, const std::string& backbone,
                        std::uint64_t seed) {
    return {root / experiment / backbone / std::to_string(seed)};
}

std::string format_history_csv(const TrainHistory& history) {
    std::string out = "epoch,lr,train_loss,val_accuracy\n";
    for (const auto& e : history.epochs) out += fmt::format("{},{},{},{}\n", e.epoch, e.lr, e.train_loss, e.val_accuracy);
    return out;
}

void write_text(const std::string& text, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw std::runtime_error(fmt::format("failed writing '{}'", path.string()));
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
    write_text(format_history_csv(history), path);
}

TrainHistory read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
    std::string line;
    std::getline(in, line);
    if (line != "epoch,lr,train_loss,val_accuracy") {
        throw std::runtime_error(fmt::format("'{}': unexpected history header", path.string()));
    }
    TrainHistory h;
    h.best_val_accuracy = -1.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[4];
        for (auto& field : f) std::getline(ss, field, ',');
        EpochRecord r{std::stoi(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3])};
        if (r.val_accuracy > h.best_val_accuracy) {
            h.best_val_accuracy = r.val_accuracy;
            h.best_epoch = r.epoch;
        }
        h.epochs.push_back(r);
    }
    return h;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) { write_text(j.dump(2) + "\n", path); }

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(fmt::format("'{}': {}", path.string(), e.what()));
    }
}

std::string split_fingerprint(const data::DatasetManifest& manifest) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        h ^= 0xff;
        h *= 0x100000001b3ULL;
    };
    for (const auto& r : manifest.records()) {
        mix(r.image_path);
        mix(std::to_string(r.grade.value()));
    }
    return fmt::format("{:016x}", h);
}

}  // namespace kneexnet::training
