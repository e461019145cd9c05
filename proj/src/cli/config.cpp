#include <stdexcept>

#include <fmt/format.h>

#include "kneexnet/cli/cli.hpp"
#include "kneexnet/toml.hpp"

namespace kneexnet::cli {

namespace {

using nlohmann::json;

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) throw std::invalid_argument(fmt::format("{} must be a string", key));
    return v.get<std::string>();
}

std::uint64_t as_u64(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw std::invalid_argument(fmt::format("{} must be a non-negative integer", key));
}

double as_real(const json& v, const std::string& key) {
    if (!v.is_number()) throw std::invalid_argument(fmt::format("{} must be a number", key));
    return v.get<double>();
}

template <typename F>
auto as_list(const json& v, const std::string& key, F&& each) {
    if (!v.is_array()) throw std::invalid_argument(fmt::format("{} must be an array", key));
    std::vector<decltype(each(v, key))> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(each(v[i], fmt::format("{}[{}]", key, i)));
    return out;
}

void require_table(const json& v, const std::string& key) {
    if (!v.is_object()) throw std::invalid_argument(fmt::format("{} must be a table", key));
}

std::string_view to_string(data::SplitGranularity g) {
    return g == data::SplitGranularity::by_subject ? "subject" : "image";
}

data::SplitGranularity parse_granularity(const std::string& text) {
    if (text == "image") return data::SplitGranularity::per_image;
    if (text == "subject") return data::SplitGranularity::by_subject;
    throw std::invalid_argument(fmt::format("split.granularity must be 'image' or 'subject', got '{}'", text));
}

}  // namespace

std::string format_ratios(const data::SplitRatios& ratios) {
    return fmt::format("{}:{}:{}", ratios.train, ratios.val, ratios.test);
}

void ExperimentConfig::validate() const {
    if (backbones.empty()) throw std::invalid_argument("backbones must list at least one name");
    if (seeds.empty()) throw std::invalid_argument("seeds must list at least one value");
    if (experiment.empty()) throw std::invalid_argument("experiment must not be empty");
    if (strategy != "vote" && strategy != "stack") {
        throw std::invalid_argument(fmt::format("strategy must be 'vote' or 'stack', got '{}'", strategy));
    }
    train.validate();
    train.augmentation.validate();
    cam.validate();
}

json to_json(const ExperimentConfig& cfg) {
    json plugins = json::array();
    for (const auto& p : cfg.plugins) plugins.push_back(p.string());
    return {{"manifest", cfg.manifest.string()},
            {"out", cfg.out.string()},
            {"experiment", cfg.experiment},
            {"backbones", cfg.backbones},
            {"seeds", cfg.seeds},
            {"pretrained", cfg.pretrained},
            {"strategy", cfg.strategy},
            {"plugins", plugins},
            {"split",
             {{"ratios", format_ratios(cfg.ratios)},
              {"seed", cfg.split_seed},
              {"granularity", std::string(to_string(cfg.granularity))}}},
            {"train", training::to_json(cfg.train)},
            {"cam",
             {{"n_samples", cfg.cam.n_samples},
              {"noise_sigma", cfg.cam.noise_sigma},
              {"target_layer", cfg.cam.target_layer},
              {"seed", cfg.cam.seed}}}};
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig base) {
    require_table(j, "config");
    ExperimentConfig cfg = std::move(base);
    for (const auto& [key, v] : j.items()) {
        if (key == "manifest") cfg.manifest = as_string(v, key);
        else if (key == "out") cfg.out = as_string(v, key);
        else if (key == "experiment") cfg.experiment = as_string(v, key);
        else if (key == "backbones") cfg.backbones = as_list(v, key, as_string);
        else if (key == "seeds") cfg.seeds = as_list(v, key, as_u64);
        else if (key == "strategy") cfg.strategy = as_string(v, key);
        else if (key == "pretrained") {
            if (!v.is_boolean()) throw std::invalid_argument("pretrained must be a boolean");
            cfg.pretrained = v.get<bool>();
        } else if (key == "plugins") {
            cfg.plugins.clear();
            for (const auto& p : as_list(v, key, as_string)) cfg.plugins.emplace_back(p);
        } else if (key == "split") {
            require_table(v, key);
            for (const auto& [k, x] : v.items()) {
                if (k == "ratios") cfg.ratios = data::parse_ratios(as_string(x, "split.ratios"));
                else if (k == "seed") cfg.split_seed = as_u64(x, "split.seed");
                else if (k == "granularity") cfg.granularity = parse_granularity(as_string(x, "split.granularity"));
                else throw std::invalid_argument(fmt::format("unknown config field 'split.{}'", k));
            }
        } else if (key == "train") {
            cfg.train = training::train_config_from_json(v, cfg.train);
        } else if (key == "cam") {
            require_table(v, key);
            for (const auto& [k, x] : v.items()) {
                if (k == "n_samples") {
                    if (!x.is_number_integer()) throw std::invalid_argument("cam.n_samples must be an integer");
                    cfg.cam.n_samples = x.get<int>();
                } else if (k == "noise_sigma") cfg.cam.noise_sigma = as_real(x, "cam.noise_sigma");
                else if (k == "target_layer") cfg.cam.target_layer = as_string(x, "cam.target_layer");
                else if (k == "seed") cfg.cam.seed = as_u64(x, "cam.seed");
                else throw std::invalid_argument(fmt::format("unknown config field 'cam.{}'", k));
            }
        } else {
            throw std::invalid_argument(fmt::format("unknown config field '{}'", key));
        }
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    auto cfg = experiment_config_from_json(toml::parse_file(path));
    // Relative paths in a config file are relative to the file itself.
    const auto dir = path.parent_path();
    if (!cfg.manifest.empty() && cfg.manifest.is_relative()) cfg.manifest = dir / cfg.manifest;
    for (auto& p : cfg.plugins) {
        if (p.is_relative()) p = dir / p;
    }
    return cfg;
}

}  // namespace kneexnet::cli
