#include "kneexnet/training/trainer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "kneexnet/data/augment.hpp"
#include "kneexnet/nn/optim.hpp"
#include "kneexnet/random.hpp"
#include "kneexnet/sampling/sampling.hpp"

namespace kneexnet::training {

namespace {

constexpr std::size_t kEvalChunk = 32;

// Stream tags keep the per-purpose seeds apart.
constexpr std::uint64_t kOrderStream = 0x6f72646572;
constexpr std::uint64_t kAugmentStream = 0x6175676d;

double accuracy_of(const backbones::Model& model, const LabeledImages& set) {
    const auto preds = predict(model, set.images);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == set.labels[i];
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<std::size_t> epoch_order(const TrainConfig& cfg, const sampling::SamplingWeights& weights,
                                     std::size_t n, int epoch) {
    const auto seed = derive_seed(cfg.seed, kOrderStream, static_cast<std::uint64_t>(epoch));
    if (cfg.sampling_mode == SamplingMode::inverse_frequency) return sampling::weighted_sample(weights, n, seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    return order;
}

}  // namespace

LabeledImages load_images(const data::DatasetManifest& manifest) {
    LabeledImages out;
    out.images.reserve(manifest.size());
    out.labels.reserve(manifest.size());
    for (const auto& r : manifest.records()) {
        out.images.push_back(data::preprocess(data::read_image(manifest.resolve(r))));
        out.labels.push_back(r.grade);
    }
    return out;
}

std::vector<backbones::LogitsVector> predict_logits(const backbones::Model& model,
                                                    std::span<const data::ImageTensor> images) {
    std::vector<backbones::LogitsVector> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += kEvalChunk) {
        const auto n = std::min(kEvalChunk, images.size() - start);
        auto chunk = model.forward(images.subspan(start, n));
        for (auto& l : chunk) out.push_back(std::move(l));
    }
    return out;
}

std::vector<KLGrade> predict(const backbones::Model& model, std::span<const data::ImageTensor> images) {
    std::vector<KLGrade> out;
    out.reserve(images.size());
    for (const auto& l : predict_logits(model, images)) {
        out.emplace_back(static_cast<int>(backbones::argmax(l.values)));
    }
    return out;
}

FitResult fit(nn::Sequential& net, std::span<const KLGrade> labels, const TrainConfig& cfg, const FitHooks& hooks,
              const EpochCallback& on_epoch) {
    cfg.validate();
    const std::size_t n = labels.size();
    if (n == 0) throw TrainingError("training split is empty");

    sampling::SamplingWeights weights;
    if (cfg.sampling_mode == SamplingMode::inverse_frequency) weights = sampling::inverse_frequency_weights(labels);

    nn::Adam optimizer(net.parameters(), nn::AdamOptions{cfg.base_lr});
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

    FitResult result;
    auto& history = result.history;
    result.best_state = backbones::capture_state(net);
    double best_acc = -1.0;
    int best_epoch = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        optimizer.set_lr(lr);
        const auto order = epoch_order(cfg, weights, n, epoch);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            const std::span<const std::size_t> idx(order.data() + start, count);
            std::vector<std::size_t> targets;
            targets.reserve(count);
            for (auto i : idx) targets.push_back(labels[i].index());

            optimizer.zero_grad();
            const auto logits = net.forward(hooks.make_batch(idx, start, epoch));
            const auto loss = nn::cross_entropy(logits, targets);
            if (!std::isfinite(loss.loss)) {
                throw TrainingError(fmt::format("non-finite training loss at epoch {}, batch starting at {} (lr {})",
                                                epoch, start, lr));
            }
            net.backward(loss.grad);
            optimizer.step();
            loss_sum += loss.loss * static_cast<double>(count);
        }

        EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(n), hooks.val_accuracy()};
        if (rec.val_accuracy > best_acc) {
            best_acc = rec.val_accuracy;
            best_epoch = epoch;
            result.best_state = backbones::capture_state(net);
        }
        history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }

    history.best_epoch = best_epoch;
    history.best_val_accuracy = best_acc;
    backbones::restore_state(net, result.best_state);
    return result;
}

TrainOutcome train(backbones::Model& model, const LabeledImages& train_set, const LabeledImages& val_set,
                   const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.empty()) throw TrainingError("training split is empty");
    if (val_set.empty()) throw TrainingError("validation split is empty");
    if (model.spec().num_classes != kNumGrades) {
        throw TrainingError(fmt::format("model emits {} classes, grades need {}", model.spec().num_classes, kNumGrades));
    }

    data::AugmentationConfig aug = cfg.augmentation;
    aug.seed = derive_seed(cfg.augmentation.seed, kAugmentStream, cfg.seed);

    FitHooks hooks;
    hooks.make_batch = [&](std::span<const std::size_t> idx, std::size_t first, int epoch) {
        std::vector<data::ImageTensor> batch;
        batch.reserve(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            batch.push_back(data::augment(train_set.images[idx[k]], aug, first + k, static_cast<std::uint64_t>(epoch)));
        }
        return model.to_batch(batch);
    };
    hooks.val_accuracy = [&] { return accuracy_of(model, val_set); };

    auto fitted = fit(model.network(), train_set.labels, cfg, hooks, on_epoch);
    auto ckpt = backbones::make_checkpoint(model, fitted.history.best_epoch, fitted.history.best_val_accuracy, cfg.seed);
    ckpt.extra["train_config"] = to_json(cfg);
    return {std::move(ckpt), std::move(fitted.history)};
}

TrainOutcome train(backbones::Model& model, const data::DatasetManifest& train_manifest,
                   const data::DatasetManifest& val_manifest, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (train_manifest.empty()) throw TrainingError("training split is empty");
    if (val_manifest.empty()) throw TrainingError("validation split is empty");
    return train(model, load_images(train_manifest), load_images(val_manifest), cfg, on_epoch);
}

metrics::RunResult evaluate(const backbones::Model& model, const LabeledImages& set) {
    if (set.empty()) throw TrainingError("cannot evaluate on an empty set");
    return metrics::make_run_result(predict(model, set.images), set.labels);
}

metrics::RunResult evaluate(const backbones::Checkpoint& checkpoint, const data::DatasetManifest& manifest) {
    if (manifest.empty()) throw TrainingError("cannot evaluate on an empty manifest");
    const auto model = backbones::model_from_checkpoint(checkpoint);
    return evaluate(*model, load_images(manifest));
}

metrics::AggregateResult repeat_runs(const RunClosure& run, std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw std::invalid_argument("repeat_runs needs at least one seed");
    std::vector<metrics::RunResult> results;
    for (const auto seed : seeds) {
        try {
            results.push_back(run(seed));
        } catch (const std::exception& e) {
            throw RepeatRunsError(fmt::format("run with seed {} failed: {}", seed, e.what()), results, seed);
        }
    }
    return metrics::aggregate(results);
}

std::vector<std::uint64_t> default_seeds(std::size_t n_runs, std::uint64_t base) {
    std::vector<std::uint64_t> seeds(n_runs);
    std::iota(seeds.begin(), seeds.end(), base);
    return seeds;
}

}  // namespace kneexnet::training
