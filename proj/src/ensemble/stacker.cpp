#include "kneexnet/ensemble/stacker.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "kneexnet/random.hpp"

namespace kneexnet::ensemble {

StackerSpec StackerSpec::for_members(std::size_t n_members, std::size_t hidden_dim) {
    return {n_members * kNumGrades, hidden_dim, kNumGrades};
}

void StackerSpec::validate() const {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) {
        throw std::invalid_argument("stacker dimensions must all be >= 1");
    }
    if (input_dim % kNumGrades != 0) {
        throw std::invalid_argument(fmt::format("stacker input_dim {} is not a multiple of {}", input_dim, kNumGrades));
    }
    if (output_dim != kNumGrades) {
        throw std::invalid_argument(fmt::format("stacker output_dim must be {}, got {}", kNumGrades, output_dim));
    }
}

nlohmann::json to_json(const StackerSpec& spec) {
    return {{"input_dim", spec.input_dim}, {"hidden_dim", spec.hidden_dim}, {"output_dim", spec.output_dim},
            {"activation", "relu"}};
}

StackerSpec stacker_spec_from_json(const nlohmann::json& j) {
    StackerSpec s{j.at("input_dim").get<std::size_t>(), j.at("hidden_dim").get<std::size_t>(),
                  j.at("output_dim").get<std::size_t>()};
    s.validate();
    return s;
}

Stacker::Stacker(const StackerSpec& spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    net_.add("fc1", std::make_unique<nn::Linear>(spec_.input_dim, spec_.hidden_dim, derive_seed(seed, 1)))
        .add("relu", std::make_unique<nn::ReLU>())
        .add("fc2", std::make_unique<nn::Linear>(spec_.hidden_dim, spec_.output_dim, derive_seed(seed, 2)));
}

nn::Tensor Stacker::to_batch(std::span<const EnsembleInput> inputs) const {
    nn::Tensor batch({inputs.size(), spec_.input_dim});
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        if (inputs[b].size() != spec_.input_dim) {
            throw std::invalid_argument(
                fmt::format("stacker input {} has length {}, expected {}", b, inputs[b].size(), spec_.input_dim));
        }
        std::copy(inputs[b].values.begin(), inputs[b].values.end(),
                  batch.values().begin() + static_cast<std::ptrdiff_t>(b * spec_.input_dim));
    }
    return batch;
}

std::vector<double> Stacker::logits(const EnsembleInput& input) const {
    return net_.infer(to_batch(std::span(&input, 1))).values();
}

KLGrade Stacker::predict(const EnsembleInput& input) const {
    return KLGrade(static_cast<int>(backbones::argmax(logits(input))));
}

std::vector<KLGrade> Stacker::predict(std::span<const EnsembleInput> inputs) const {
    std::vector<KLGrade> out;
    if (inputs.empty()) return out;
    const auto scores = net_.infer(to_batch(inputs));
    const std::size_t k = spec_.output_dim;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        out.emplace_back(static_cast<int>(backbones::argmax(std::span(scores.data() + b * k, k))));
    }
    return out;
}

backbones::Checkpoint Stacker::to_checkpoint(int epoch, double val_accuracy, std::uint64_t seed) {
    backbones::Checkpoint c;
    c.kind = "stacker";
    c.spec = to_json(spec_);
    c.weights = backbones::capture_state(net_);
    c.epoch = epoch;
    c.val_accuracy = val_accuracy;
    c.seed = seed;
    return c;
}

Stacker Stacker::from_checkpoint(const backbones::Checkpoint& ckpt) {
    if (ckpt.kind != "stacker") throw std::invalid_argument(fmt::format("checkpoint holds a '{}', not a stacker", ckpt.kind));
    Stacker s(stacker_spec_from_json(ckpt.spec), ckpt.seed);
    backbones::restore_state(s.net_, ckpt.weights);
    return s;
}

StackerOutcome train_stacker(const StackerSpec& spec, std::span<const EnsembleInput> inputs,
                             std::span<const KLGrade> labels, std::span<const EnsembleInput> val_inputs,
                             std::span<const KLGrade> val_labels, const training::TrainConfig& cfg) {
    spec.validate();
    if (inputs.empty()) throw std::invalid_argument("train_stacker: no training inputs");
    if (inputs.size() != labels.size()) throw std::invalid_argument("train_stacker: inputs and labels differ in length");
    if (val_inputs.size() != val_labels.size()) {
        throw std::invalid_argument("train_stacker: validation inputs and labels differ in length");
    }
    if (val_inputs.empty()) {
        val_inputs = inputs;
        val_labels = labels;
    }

    Stacker stacker(spec, cfg.seed);
    const auto train_batch = stacker.to_batch(inputs);  // validates dimensions once
    const auto val_batch = stacker.to_batch(val_inputs);

    training::FitHooks hooks;
    hooks.make_batch = [&](std::span<const std::size_t> idx, std::size_t, int) {
        nn::Tensor batch({idx.size(), spec.input_dim});
        for (std::size_t k = 0; k < idx.size(); ++k) {
            std::copy_n(train_batch.data() + idx[k] * spec.input_dim, spec.input_dim,
                        batch.data() + k * spec.input_dim);
        }
        return batch;
    };
    hooks.val_accuracy = [&] {
        const auto scores = stacker.network().infer(val_batch);
        std::size_t correct = 0;
        for (std::size_t b = 0; b < val_labels.size(); ++b) {
            const auto pred = backbones::argmax(std::span(scores.data() + b * spec.output_dim, spec.output_dim));
            correct += pred == val_labels[b].index();
        }
        return static_cast<double>(correct) / static_cast<double>(val_labels.size());
    };

    auto fitted = training::fit(stacker.network(), labels, cfg, hooks);
    auto ckpt = stacker.to_checkpoint(fitted.history.best_epoch, fitted.history.best_val_accuracy, cfg.seed);
    ckpt.extra["train_config"] = training::to_json(cfg);
    return {std::move(ckpt), std::move(fitted.history)};
}

KLGrade predict_stacked(const backbones::Checkpoint& ckpt, const EnsembleInput& input) {
    return Stacker::from_checkpoint(ckpt).predict(input);
}

std::vector<KLGrade> predict_stacked(const backbones::Checkpoint& ckpt, std::span<const EnsembleInput> inputs) {
    return Stacker::from_checkpoint(ckpt).predict(inputs);
}

}  // namespace kneexnet::ensemble
