#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kneexnet/data/split.hpp"
#include "kneexnet/data/synthetic.hpp"
#include "kneexnet/explain/cam.hpp"
#include "kneexnet/metrics/metrics.hpp"
#include "kneexnet/training/config.hpp"

namespace kneexnet::cli {

/// Bad invocation (missing arguments, empty inputs). Mapped to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::filesystem::path manifest;
    data::SplitRatios ratios;
    std::uint64_t split_seed = 0;
    data::SplitGranularity granularity = data::SplitGranularity::per_image;
    std::string experiment = "default";
    std::vector<std::string> backbones{"tiny"};
    bool pretrained = false;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    training::TrainConfig train;
    std::string strategy = "vote";
    explain::CamConfig cam;
    std::filesystem::path out = "runs";
    std::vector<std::filesystem::path> plugins;

    /// Field-level checks that need no filesystem or registry access.
    void validate() const;
};

/// TOML layout: top-level scalars plus [split], [train] (with
/// [train.augmentation]) and [cam] tables.
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Overlays the keys present in `j` onto `base`; unknown keys are errors.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

std::string format_ratios(const data::SplitRatios& ratios);

struct SplitOptions {
    std::filesystem::path manifest;
    data::SplitRatios ratios;
    std::uint64_t seed = 0;
    data::SplitGranularity granularity = data::SplitGranularity::per_image;
    std::filesystem::path out;
};

/// Writes the manifest with its split column populated.
data::DatasetManifest cmd_split(const SplitOptions& opts);

struct TrainSummary {
    std::vector<std::filesystem::path> run_dirs;
    std::vector<std::filesystem::path> aggregates;  // one per backbone
};

/// Trains every backbone for every seed under out/<experiment>/<backbone>/<seed>/
/// and writes out/<experiment>/<backbone>/aggregate.json. An unsplit manifest
/// is split first and saved as out/<experiment>/split_manifest.csv.
TrainSummary cmd_train(const ExperimentConfig& cfg, std::ostream& log);

struct EnsembleOptions {
    std::vector<std::filesystem::path> members;  // run directories
    std::string strategy = "vote";
    std::vector<std::uint64_t> seeds{0, 1, 2};   // stacker runs
    training::TrainConfig stacker_train;
    std::size_t hidden_dim = 64;
    std::filesystem::path out;
};

/// Vote: writes out/metrics.json. Stack: trains one stacker per seed on the
/// members' validation logits (with a stratified holdout for selection),
/// writes out/stack/<seed>/ and out/aggregate.json. Both write out/ensemble.json.
/// Returns the metrics (vote) or aggregate (stack) JSON.
nlohmann::json cmd_ensemble(const EnsembleOptions& opts, std::ostream& log);

struct ExplainOptions {
    std::filesystem::path checkpoint;  // file or run directory
    std::vector<std::filesystem::path> images;
    std::optional<int> target_class;   // predicted class when absent
    explain::CamConfig cam;
    double alpha = 0.5;
    bool write_csv = false;
    std::filesystem::path out = ".";
};

/// Writes <stem>_cam_<class>.png (and .csv) per image; returns the PNG paths.
std::vector<std::filesystem::path> cmd_explain(const ExplainOptions& opts);

struct ReportRow {
    std::string name;
    std::size_t n_runs = 1;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    metrics::PerClass f1_mean{};
    metrics::PerClass f1_std{};
};

/// Reads aggregate.json when present, else metrics.json. Sorted by mean
/// accuracy, highest first.
std::vector<ReportRow> collect_report(std::span<const std::filesystem::path> dirs);
std::string format_report_table(std::span<const ReportRow> rows);
std::string format_report_csv(std::span<const ReportRow> rows);

struct SynthOptions {
    std::filesystem::path out;
    data::MarkerDatasetCounts counts;
    std::uint64_t seed = 0;
    bool preassign = true;
};

data::DatasetManifest cmd_synth(const SynthOptions& opts);

/// Parses `args` (without the program name) and dispatches. Returns the exit
/// code: 0 on success, 1 on runtime errors, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kneexnet::cli
