#include "kneexnet/training/config.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace kneexnet::training {

std::string_view to_string(SamplingMode mode) {
    return mode == SamplingMode::inverse_frequency ? "inverse_frequency" : "uniform";
}

SamplingMode parse_sampling_mode(std::string_view text) {
    if (text == "uniform") return SamplingMode::uniform;
    if (text == "inverse_frequency") return SamplingMode::inverse_frequency;
    throw std::invalid_argument(fmt::format("sampling_mode must be 'uniform' or 'inverse_frequency', got '{}'", text));
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument(fmt::format("epochs must be >= 1, got {}", epochs));
    if (batch_size < 1) throw std::invalid_argument(fmt::format("batch_size must be >= 1, got {}", batch_size));
    if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
        throw std::invalid_argument(fmt::format("base_lr must be > 0, got {}", base_lr));
    }
    if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
        throw std::invalid_argument(fmt::format("lr_decay_factor must be in (0,1], got {}", lr_decay_factor));
    }
    if (lr_decay_every < 1) throw std::invalid_argument(fmt::format("lr_decay_every must be >= 1, got {}", lr_decay_every));
    augmentation.validate();
}

namespace {

// Shortest round-trip decimal of a positive double as digits x 10^exponent.
struct Decimal {
    std::string digits;
    int exponent = 0;
};

Decimal to_decimal(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
    if (ec != std::errc{}) throw std::logic_error("to_chars failed");
    const std::string s(buf, end);
    const auto e = s.find('e');
    Decimal d;
    d.exponent = std::stoi(s.substr(e + 1));
    for (std::size_t i = 0; i < e; ++i) {
        if (s[i] == '.') continue;
        d.digits.push_back(s[i]);
    }
    // scientific: one digit before the point
    d.exponent -= static_cast<int>(d.digits.size()) - 1;
    while (d.digits.size() > 1 && d.digits.back() == '0') {
        d.digits.pop_back();
        ++d.exponent;
    }
    return d;
}

}  // namespace

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    if (epoch < 0 || epoch >= cfg.epochs) {
        throw std::out_of_range(fmt::format("epoch {} outside [0, {})", epoch, cfg.epochs));
    }
    const int steps = epoch / cfg.lr_decay_every;
    if (steps == 0 || cfg.lr_decay_factor == 1.0) return cfg.base_lr;

    const Decimal decay = to_decimal(cfg.lr_decay_factor);
    if (decay.digits == "1") {
        const Decimal base = to_decimal(cfg.base_lr);
        const auto text = fmt::format("{}e{}", base.digits, base.exponent + decay.exponent * steps);
        double out = 0.0;
        std::from_chars(text.data(), text.data() + text.size(), out);
        return out;
    }
    return cfg.base_lr * std::pow(cfg.lr_decay_factor, steps);
}

nlohmann::json to_json(const TrainConfig& cfg) {
    const auto& a = cfg.augmentation;
    return {{"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"base_lr", cfg.base_lr},
            {"lr_decay_factor", cfg.lr_decay_factor},
            {"lr_decay_every", cfg.lr_decay_every},
            {"sampling_mode", std::string(to_string(cfg.sampling_mode))},
            {"seed", cfg.seed},
            {"augmentation",
             {{"hflip_prob", a.hflip_prob},
              {"brightness_range", {a.brightness_range.lo, a.brightness_range.hi}},
              {"saturation_range", {a.saturation_range.lo, a.saturation_range.hi}},
              {"max_rotation_deg", a.max_rotation_deg},
              {"max_translate_frac", a.max_translate_frac},
              {"seed", a.seed}}}};
}

namespace {

double as_real(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw std::invalid_argument(fmt::format("{} must be a number", key));
    return v.get<double>();
}

int as_int(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw std::invalid_argument(fmt::format("{} must be an integer", key));
    return v.get<int>();
}

std::uint64_t as_seed(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw std::invalid_argument(fmt::format("{} must be a non-negative integer", key));
    }
    return v.get<std::uint64_t>();
}

data::Interval as_interval(const nlohmann::json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw std::invalid_argument(fmt::format("{} must be a two-element [lo, hi] array", key));
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg) {
    if (!j.is_object()) throw std::invalid_argument("train config must be a table");
    for (const auto& [key, v] : j.items()) {
        if (key == "epochs") cfg.epochs = as_int(v, key);
        else if (key == "batch_size") cfg.batch_size = as_int(v, key);
        else if (key == "base_lr") cfg.base_lr = as_real(v, key);
        else if (key == "lr_decay_factor") cfg.lr_decay_factor = as_real(v, key);
        else if (key == "lr_decay_every") cfg.lr_decay_every = as_int(v, key);
        else if (key == "sampling_mode") {
            if (!v.is_string()) throw std::invalid_argument("sampling_mode must be a string");
            cfg.sampling_mode = parse_sampling_mode(v.get<std::string>());
        } else if (key == "seed") cfg.seed = as_seed(v, key);
        else if (key == "augmentation") {
            if (!v.is_object()) throw std::invalid_argument("augmentation must be a table");
            auto& a = cfg.augmentation;
            for (const auto& [akey, av] : v.items()) {
                const auto name = "augmentation." + akey;
                if (akey == "hflip_prob") a.hflip_prob = as_real(av, name);
                else if (akey == "brightness_range") a.brightness_range = as_interval(av, name);
                else if (akey == "saturation_range") a.saturation_range = as_interval(av, name);
                else if (akey == "max_rotation_deg") a.max_rotation_deg = as_real(av, name);
                else if (akey == "max_translate_frac") a.max_translate_frac = as_real(av, name);
                else if (akey == "seed") a.seed = as_seed(av, name);
                else throw std::invalid_argument(fmt::format("unknown config field '{}'", name));
            }
        } else {
            throw std::invalid_argument(fmt::format("unknown config field '{}'", key));
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace kneexnet::training
