#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "kneexnet/backbones/backbone.hpp"
#include "kneexnet/backbones/checkpoint.hpp"
#include "kneexnet/data/manifest.hpp"
#include "kneexnet/metrics/metrics.hpp"
#include "kneexnet/training/config.hpp"

namespace kneexnet::training {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Preprocessed images with their grades, in manifest order.
struct LabeledImages {
    std::vector<data::ImageTensor> images;
    std::vector<KLGrade> labels;

    std::size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }
};

/// Decodes and preprocesses every record of the manifest.
LabeledImages load_images(const data::DatasetManifest& manifest);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
    friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainOutcome {
    backbones::Checkpoint checkpoint;
    TrainHistory history;
};

/// Optional per-epoch observer (e.g. progress logging).
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Pieces the generic loop needs from a concrete model/data pairing.
struct FitHooks {
    /// Builds the input batch for the samples `indices`; `first_position` is
    /// the position of indices[0] within the epoch's draw order.
    std::function<nn::Tensor(std::span<const std::size_t> indices, std::size_t first_position, int epoch)> make_batch;
    /// Accuracy on the selection set with the current weights.
    std::function<double()> val_accuracy;
};

struct FitResult {
    TrainHistory history;
    backbones::ModelState best_state;
};

/// Minibatch cross-entropy training of `net` with Adam and the step-decay
/// schedule. Epoch order is a seeded permutation (uniform) or a seeded
/// inverse-frequency draw with replacement; the last partial batch is kept.
/// Tracks the best epoch by validation accuracy, earliest on ties, and leaves
/// `net` holding the best weights.
FitResult fit(nn::Sequential& net, std::span<const KLGrade> labels, const TrainConfig& cfg, const FitHooks& hooks,
              const EpochCallback& on_epoch = {});

/// Cross-entropy + Adam over cfg.epochs with the step-decay schedule. Training
/// images are augmented; validation images are not. The checkpoint carries the
/// weights of the epoch with the highest validation accuracy (earliest on
/// ties), and on return the model holds those weights as well.
TrainOutcome train(backbones::Model& model, const LabeledImages& train_set, const LabeledImages& val_set,
                   const TrainConfig& cfg, const EpochCallback& on_epoch = {});
TrainOutcome train(backbones::Model& model, const data::DatasetManifest& train_manifest,
                   const data::DatasetManifest& val_manifest, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

/// Evaluation-mode logits for every image, computed in chunks.
std::vector<backbones::LogitsVector> predict_logits(const backbones::Model& model,
                                                    std::span<const data::ImageTensor> images);
std::vector<KLGrade> predict(const backbones::Model& model, std::span<const data::ImageTensor> images);

metrics::RunResult evaluate(const backbones::Model& model, const LabeledImages& set);
metrics::RunResult evaluate(const backbones::Checkpoint& checkpoint, const data::DatasetManifest& manifest);

/// Raised when one of the repeated runs fails; completed results are kept.
class RepeatRunsError : public std::runtime_error {
public:
    RepeatRunsError(const std::string& what, std::vector<metrics::RunResult> completed, std::uint64_t failed_seed)
        : std::runtime_error(what), completed_(std::move(completed)), failed_seed_(failed_seed) {}
    const std::vector<metrics::RunResult>& completed() const { return completed_; }
    std::uint64_t failed_seed() const { return failed_seed_; }

private:
    std::vector<metrics::RunResult> completed_;
    std::uint64_t failed_seed_;
};

using RunClosure = std::function<metrics::RunResult(std::uint64_t seed)>;

/// Runs the closure once per seed and aggregates (mean, sample std).
metrics::AggregateResult repeat_runs(const RunClosure& run, std::span<const std::uint64_t> seeds);

/// {base, base+1, ...}; three runs by default.
std::vector<std::uint64_t> default_seeds(std::size_t n_runs = 3, std::uint64_t base = 0);

}  // namespace kneexnet::training
