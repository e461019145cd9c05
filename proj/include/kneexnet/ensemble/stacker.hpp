#pragma once

#include <span>

#include "kneexnet/backbones/checkpoint.hpp"
#include "kneexnet/ensemble/ensemble.hpp"
#include "kneexnet/training/trainer.hpp"

namespace kneexnet::ensemble {

/// input_dim -> hidden_dim -> ReLU -> output_dim.
struct StackerSpec {
    std::size_t input_dim = kNumGrades * 10;
    std::size_t hidden_dim = 64;
    std::size_t output_dim = kNumGrades;

    static StackerSpec for_members(std::size_t n_members, std::size_t hidden_dim = 64);
    void validate() const;
};

nlohmann::json to_json(const StackerSpec& spec);
StackerSpec stacker_spec_from_json(const nlohmann::json& j);

/// Two fully connected layers over concatenated member logits.
class Stacker {
public:
    Stacker(const StackerSpec& spec, std::uint64_t seed);

    const StackerSpec& spec() const { return spec_; }
    nn::Sequential& network() { return net_; }

    nn::Tensor to_batch(std::span<const EnsembleInput> inputs) const;
    std::vector<double> logits(const EnsembleInput& input) const;
    KLGrade predict(const EnsembleInput& input) const;
    std::vector<KLGrade> predict(std::span<const EnsembleInput> inputs) const;

    backbones::Checkpoint to_checkpoint(int epoch, double val_accuracy, std::uint64_t seed);
    static Stacker from_checkpoint(const backbones::Checkpoint& ckpt);

private:
    StackerSpec spec_;
    nn::Sequential net_;
};

struct StackerOutcome {
    backbones::Checkpoint checkpoint;
    training::TrainHistory history;
};

/// Trains with the backbone protocol (Adam, step-decay LR, best-validation
/// checkpointing). Selection uses val_inputs; when they are empty the training
/// inputs are used instead. Augmentation does not apply.
StackerOutcome train_stacker(const StackerSpec& spec, std::span<const EnsembleInput> inputs,
                             std::span<const KLGrade> labels, std::span<const EnsembleInput> val_inputs,
                             std::span<const KLGrade> val_labels, const training::TrainConfig& cfg);

KLGrade predict_stacked(const backbones::Checkpoint& ckpt, const EnsembleInput& input);
std::vector<KLGrade> predict_stacked(const backbones::Checkpoint& ckpt, std::span<const EnsembleInput> inputs);

}  // namespace kneexnet::ensemble
