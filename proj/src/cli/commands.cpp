#include <algorithm>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "kneexnet/backbones/checkpoint.hpp"
#include "kneexnet/cli/cli.hpp"
#include "kneexnet/ensemble/stacker.hpp"
#include "kneexnet/random.hpp"
#include "kneexnet/toml.hpp"
#include "kneexnet/training/run_dir.hpp"
#include "kneexnet/training/trainer.hpp"

namespace kneexnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kHoldoutStream = 0x686f6c646f7574ULL;

void require_file(const fs::path& path, const char* what) {
    if (!fs::is_regular_file(path)) throw std::runtime_error(fmt::format("{} '{}' does not exist", what, path.string()));
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? std::string(sep) : std::string()) + items[i];
    return out;
}

/// Every requested backbone must be constructible before any training starts.
void check_backbones(const ExperimentConfig& cfg) {
    auto& registry = backbones::BackboneRegistry::global();
    for (const auto& name : cfg.backbones) {
        if (!registry.known(name)) {
            throw std::invalid_argument(
                fmt::format("unknown backbone '{}' (known: {})", name, join(registry.names(), ", ")));
        }
        registry.create({name, kNumGrades, cfg.pretrained}, 0);
    }
}

/// Uses the manifest's splits when every record has one; splits it otherwise.
data::DatasetManifest resolve_split(const ExperimentConfig& cfg, fs::path& split_path) {
    auto manifest = data::load_manifest(cfg.manifest);
    std::size_t assigned = 0;
    for (const auto& r : manifest.records()) assigned += r.split != data::Split::unassigned;
    if (assigned == manifest.size()) {
        split_path = fs::absolute(cfg.manifest).lexically_normal();
        return manifest;
    }
    if (assigned != 0) {
        throw data::ManifestError(fmt::format("manifest '{}' assigns a split to only {} of {} records",
                                              cfg.manifest.string(), assigned, manifest.size()));
    }
    auto split = data::stratified_split(manifest, cfg.ratios, cfg.split_seed, cfg.granularity);
    split_path = fs::absolute(cfg.out / cfg.experiment / "split_manifest.csv").lexically_normal();
    fs::create_directories(split_path.parent_path());
    data::write_manifest(split, split_path);
    return data::load_manifest(split_path);
}

struct Member {
    fs::path dir;
    json info;
    backbones::Checkpoint checkpoint;
};

Member load_member(const fs::path& dir) {
    training::RunPaths paths{dir};
    require_file(paths.run_info(), "run metadata");
    require_file(paths.checkpoint(), "checkpoint");
    Member m{dir, training::read_json(paths.run_info()), backbones::load_checkpoint(paths.checkpoint())};
    for (const char* key : {"split_manifest", "test_fingerprint", "val_fingerprint"}) {
        if (!m.info.contains(key)) throw std::runtime_error(fmt::format("{}: run.json lacks '{}'", dir.string(), key));
    }
    return m;
}

std::vector<ensemble::EnsembleInput> member_inputs(const std::vector<std::vector<backbones::LogitsVector>>& logits,
                                                   std::size_t n_samples) {
    std::vector<ensemble::EnsembleInput> inputs;
    inputs.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        std::vector<backbones::LogitsVector> row;
        for (const auto& member : logits) row.push_back(member[i]);
        inputs.push_back(ensemble::concat_logits(row, logits.size()));
    }
    return inputs;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(items[i]);
    return out;
}

std::size_t utf8_width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
}

std::string pad(const std::string& s, std::size_t width, bool left_align) {
    const auto w = utf8_width(s);
    if (w >= width) return s;
    const std::string fill(width - w, ' ');
    return left_align ? s + fill : fill + s;
}

}  // namespace

data::DatasetManifest cmd_split(const SplitOptions& opts) {
    require_file(opts.manifest, "manifest");
    if (opts.out.empty()) throw UsageError("split: --out is required");
    const auto split = data::stratified_split(data::load_manifest(opts.manifest), opts.ratios, opts.seed, opts.granularity);
    if (opts.out.has_parent_path()) fs::create_directories(opts.out.parent_path());
    data::write_manifest(split, opts.out);
    return split;
}

data::DatasetManifest cmd_synth(const SynthOptions& opts) {
    if (opts.out.empty()) throw UsageError("synth: --out is required");
    return data::write_marker_dataset(opts.out, opts.counts, opts.seed, opts.preassign);
}

TrainSummary cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    if (cfg.manifest.empty()) throw UsageError("train: a manifest is required (--manifest or config)");
    require_file(cfg.manifest, "manifest");
    for (const auto& p : cfg.plugins) backbones::load_backbone_plugin(p);
    check_backbones(cfg);

    fs::path split_path;
    const auto manifest = resolve_split(cfg, split_path);
    const auto train_m = manifest.subset(data::Split::train);
    const auto val_m = manifest.subset(data::Split::val);
    const auto test_m = manifest.subset(data::Split::test);
    if (train_m.empty() || val_m.empty() || test_m.empty()) {
        throw data::ManifestError(fmt::format("split manifest '{}' needs non-empty train, val and test splits (got {}/{}/{})",
                                              split_path.string(), train_m.size(), val_m.size(), test_m.size()));
    }
    const auto train_set = training::load_images(train_m);
    const auto val_set = training::load_images(val_m);
    const auto test_set = training::load_images(test_m);
    const auto val_fp = training::split_fingerprint(val_m);
    const auto test_fp = training::split_fingerprint(test_m);

    TrainSummary summary;
    for (const auto& name : cfg.backbones) {
        const auto& info = backbones::BackboneRegistry::global().info(name);
        std::vector<metrics::RunResult> results;
        for (auto seed : cfg.seeds) {
            auto run_cfg = cfg;
            run_cfg.train.seed = seed;
            run_cfg.manifest = fs::absolute(cfg.manifest).lexically_normal();
            for (auto& p : run_cfg.plugins) p = fs::absolute(p).lexically_normal();
            const auto paths = training::RunPaths::make(cfg.out, cfg.experiment, name, seed);
            fs::create_directories(paths.dir);

            auto model = backbones::create_backbone({name, kNumGrades, cfg.pretrained}, seed);
            log << fmt::format("[{}/{}] seed {}: training on {} images\n", cfg.experiment, name, seed, train_set.size());
            const auto outcome = training::train(*model, train_set, val_set, run_cfg.train, [&](const training::EpochRecord& r) {
                log << fmt::format("  epoch {:>3}  lr {:<8}  loss {:.4f}  val {:.4f}\n", r.epoch, r.lr, r.train_loss,
                                   r.val_accuracy);
            });
            const auto result = training::evaluate(*model, test_set);
            log << fmt::format("  best epoch {}  test accuracy {:.4f}\n", outcome.history.best_epoch, result.accuracy);

            backbones::save_checkpoint(outcome.checkpoint, paths.checkpoint());
            training::write_history_csv(outcome.history, paths.history());
            training::write_json(metrics::to_json(result), paths.metrics());
            training::write_json({{"experiment", cfg.experiment},
                                  {"backbone", name},
                                  {"architecture", info.variant},
                                  {"variant", std::string(training::to_string(cfg.train.sampling_mode))},
                                  {"seed", seed},
                                  {"split_manifest", split_path.string()},
                                  {"val_fingerprint", val_fp},
                                  {"test_fingerprint", test_fp},
                                  {"best_epoch", outcome.history.best_epoch},
                                  {"best_val_accuracy", outcome.history.best_val_accuracy}},
                                 paths.run_info());
            training::write_text(toml::dump(to_json(run_cfg)), paths.config());
            summary.run_dirs.push_back(paths.dir);
            results.push_back(result);
        }
        const auto agg_path = cfg.out / cfg.experiment / name / "aggregate.json";
        training::write_json(metrics::to_json(metrics::aggregate(results)), agg_path);
        summary.aggregates.push_back(agg_path);
    }
    return summary;
}

json cmd_ensemble(const EnsembleOptions& opts, std::ostream& log) {
    if (opts.members.size() < 2) throw UsageError("ensemble: at least two member run directories are required");
    if (opts.out.empty()) throw UsageError("ensemble: --out is required");
    if (opts.strategy != "vote" && opts.strategy != "stack") {
        throw std::invalid_argument(fmt::format("strategy must be 'vote' or 'stack', got '{}'", opts.strategy));
    }

    std::vector<Member> members;
    for (const auto& dir : opts.members) members.push_back(load_member(dir));
    for (std::size_t i = 1; i < members.size(); ++i) {
        for (const char* key : {"test_fingerprint", "val_fingerprint"}) {
            if (members[i].info[key] != members[0].info[key]) {
                throw std::runtime_error(fmt::format(
                    "ensemble members use different data splits ({} {} differs from {} {}); refusing to combine",
                    members[i].dir.string(), key, members[0].dir.string(), key));
            }
        }
    }

    const auto manifest = data::load_manifest(members[0].info["split_manifest"].get<std::string>());
    const auto test_m = manifest.subset(data::Split::test);
    const auto val_m = manifest.subset(data::Split::val);
    if (training::split_fingerprint(test_m) != members[0].info["test_fingerprint"].get<std::string>() ||
        training::split_fingerprint(val_m) != members[0].info["val_fingerprint"].get<std::string>()) {
        throw std::runtime_error("split manifest no longer matches the members' recorded fingerprints");
    }

    const auto test_set = training::load_images(test_m);
    const bool stack = opts.strategy == "stack";
    const auto val_set = stack ? training::load_images(val_m) : training::LabeledImages{};
    std::vector<std::vector<backbones::LogitsVector>> test_logits, val_logits;
    json member_list = json::array();
    for (const auto& m : members) {
        const auto model = backbones::model_from_checkpoint(m.checkpoint);
        test_logits.push_back(training::predict_logits(*model, test_set.images));
        if (stack) val_logits.push_back(training::predict_logits(*model, val_set.images));
        member_list.push_back({{"dir", m.dir.string()},
                               {"checkpoint", training::RunPaths{m.dir}.checkpoint().string()},
                               {"backbone", m.info.value("backbone", "")},
                               {"variant", m.info.value("variant", "")},
                               {"seed", m.info.value("seed", 0)}});
    }

    fs::create_directories(opts.out);
    json record = {{"strategy", opts.strategy},
                   {"n_members", members.size()},
                   {"members", member_list},
                   {"test_fingerprint", members[0].info["test_fingerprint"]}};

    if (!stack) {
        std::vector<KLGrade> preds;
        for (std::size_t i = 0; i < test_set.size(); ++i) {
            std::vector<backbones::LogitsVector> row;
            for (const auto& member : test_logits) row.push_back(member[i]);
            preds.push_back(ensemble::soft_vote(row).prediction);
        }
        const auto result = metrics::make_run_result(preds, test_set.labels);
        const auto j = metrics::to_json(result);
        training::write_json(j, opts.out / "metrics.json");
        training::write_json(record, opts.out / "ensemble.json");
        log << fmt::format("vote over {} members: test accuracy {:.4f}\n", members.size(), result.accuracy);
        return j;
    }

    if (opts.seeds.empty()) throw UsageError("ensemble: stacking needs at least one seed");
    const auto spec = ensemble::StackerSpec::for_members(members.size(), opts.hidden_dim);
    const auto val_inputs = member_inputs(val_logits, val_set.size());
    const auto test_inputs = member_inputs(test_logits, test_set.size());

    std::vector<metrics::RunResult> results;
    json stackers = json::array();
    for (auto seed : opts.seeds) {
        // Fit on validation logits; a stratified holdout of them selects the checkpoint.
        const auto parts = data::stratified_partition(val_set.labels, {8.0, 2.0, 0.0}, derive_seed(seed, kHoldoutStream));
        auto cfg = opts.stacker_train;
        cfg.seed = seed;
        const auto outcome = ensemble::train_stacker(spec, pick(val_inputs, parts[0]), pick(val_set.labels, parts[0]),
                                                     pick(val_inputs, parts[1]), pick(val_set.labels, parts[1]), cfg);
        const auto preds = ensemble::predict_stacked(outcome.checkpoint, test_inputs);
        const auto result = metrics::make_run_result(preds, test_set.labels);

        const auto dir = opts.out / "stack" / std::to_string(seed);
        fs::create_directories(dir);
        backbones::save_checkpoint(outcome.checkpoint, dir / "checkpoint.kxn");
        training::write_history_csv(outcome.history, dir / "history.csv");
        training::write_json(metrics::to_json(result), dir / "metrics.json");
        stackers.push_back((dir / "checkpoint.kxn").string());
        results.push_back(result);
        log << fmt::format("stacker seed {}: test accuracy {:.4f}\n", seed, result.accuracy);
    }
    const auto agg = metrics::to_json(metrics::aggregate(results));
    record["stackers"] = stackers;
    record["stacker_spec"] = ensemble::to_json(spec);
    record["stacker_train"] = training::to_json(opts.stacker_train);
    training::write_json(agg, opts.out / "aggregate.json");
    training::write_json(record, opts.out / "ensemble.json");
    return agg;
}

std::vector<fs::path> cmd_explain(const ExplainOptions& opts) {
    if (opts.images.empty()) throw UsageError("explain: at least one image is required");
    if (opts.target_class && (*opts.target_class < 0 || *opts.target_class >= static_cast<int>(kNumGrades))) {
        throw std::invalid_argument(fmt::format("class must be in 0..4, got {}", *opts.target_class));
    }
    if (!(opts.alpha >= 0.0 && opts.alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0,1]");
    opts.cam.validate();

    const auto ckpt_path = fs::is_directory(opts.checkpoint) ? opts.checkpoint / "checkpoint.kxn" : opts.checkpoint;
    require_file(ckpt_path, "checkpoint");
    auto model = backbones::model_from_checkpoint(backbones::load_checkpoint(ckpt_path));
    explain::resolve_target_layer(*model, opts.cam.target_layer);

    fs::create_directories(opts.out);
    std::vector<fs::path> written;
    for (const auto& path : opts.images) {
        require_file(path, "image");
        const auto image = data::preprocess(data::read_image(path), model->input_size());
        const KLGrade cls = opts.target_class ? KLGrade(*opts.target_class)
                                              : KLGrade(static_cast<int>(backbones::argmax(model->forward({&image, 1})[0].values)));
        const auto map = explain::smooth_gradcampp(*model, image, cls, opts.cam);
        const auto stem = fmt::format("{}_cam_{}", path.stem().string(), cls.value());
        const auto png = opts.out / (stem + ".png");
        data::write_png(png, data::to_rgb_raw(explain::overlay(image, map, opts.alpha)));
        if (opts.write_csv) explain::write_map_csv(map, opts.out / (stem + ".csv"));
        written.push_back(png);
    }
    return written;
}

std::vector<ReportRow> collect_report(std::span<const fs::path> dirs) {
    if (dirs.empty()) throw UsageError("report: no run or ensemble directories given");
    std::vector<ReportRow> rows;
    for (const auto& dir : dirs) {
        ReportRow row;
        row.name = dir.lexically_normal().string();
        if (fs::is_regular_file(dir / "aggregate.json")) {
            const auto a = metrics::aggregate_from_json(training::read_json(dir / "aggregate.json"));
            row.n_runs = a.n_runs;
            row.accuracy_mean = a.mean_accuracy;
            row.accuracy_std = a.std_accuracy;
            row.f1_mean = a.mean_f1;
            row.f1_std = a.std_f1;
        } else if (fs::is_regular_file(dir / "metrics.json")) {
            const auto r = metrics::run_result_from_json(training::read_json(dir / "metrics.json"));
            row.accuracy_mean = r.accuracy;
            row.f1_mean = r.f1;
        } else {
            throw std::runtime_error(fmt::format("'{}' has neither aggregate.json nor metrics.json", dir.string()));
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ReportRow& a, const ReportRow& b) { return a.accuracy_mean > b.accuracy_mean; });
    return rows;
}

std::string format_report_table(std::span<const ReportRow> rows) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"model", "runs", "accuracy", "F1 KL0", "F1 KL1", "F1 KL2", "F1 KL3", "F1 KL4"});
    for (const auto& r : rows) {
        std::vector<std::string> line{r.name, std::to_string(r.n_runs), metrics::format_mean_std(r.accuracy_mean, r.accuracy_std)};
        for (std::size_t c = 0; c < kNumGrades; ++c) line.push_back(metrics::format_mean_std(r.f1_mean[c], r.f1_std[c]));
        cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& line : cells) {
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], utf8_width(line[i]));
    }
    std::ostringstream out;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        for (std::size_t i = 0; i < cells[k].size(); ++i) {
            out << (i ? "  " : "") << pad(cells[k][i], width[i], i == 0);
        }
        out << '\n';
        if (k == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w;
            out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
        }
    }
    return out.str();
}

std::string format_report_csv(std::span<const ReportRow> rows) {
    std::string out = "model,n_runs,accuracy_mean,accuracy_std";
    for (std::size_t c = 0; c < kNumGrades; ++c) out += fmt::format(",f1_kl{0}_mean,f1_kl{0}_std", c);
    out += '\n';
    for (const auto& r : rows) {
        std::string name = r.name;
        if (name.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char ch : name) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            name = quoted + "\"";
        }
        out += fmt::format("{},{},{},{}", name, r.n_runs, r.accuracy_mean, r.accuracy_std);
        for (std::size_t c = 0; c < kNumGrades; ++c) out += fmt::format(",{},{}", r.f1_mean[c], r.f1_std[c]);
        out += '\n';
    }
    return out;
}

}  // namespace kneexnet::cli
