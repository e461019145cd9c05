#include <algorithm>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "kneexnet/backbones/backbone.hpp"
#include "kneexnet/cli/cli.hpp"
#include "kneexnet/toml.hpp"

namespace kneexnet::cli {

namespace {

struct TrainFlags {
    std::string config;
    std::string manifest;
    std::string ratios;
    std::uint64_t split_seed = 0;
    bool by_subject = false;
    std::string experiment;
    std::vector<std::string> backbones;
    std::vector<std::uint64_t> seeds;
    std::string sampling;
    int epochs = 0;
    int batch_size = 0;
    double lr = 0.0;
    int lr_decay_every = 0;
    double hflip_prob = 0.0;
    bool pretrained = false;
    std::string out;
    std::vector<std::string> plugins;
};

bool given(const CLI::App* app, const std::string& name) { return app->count(name) > 0; }

void add_train_overrides(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--epochs", f.epochs, "Training epochs");
    cmd->add_option("--batch-size", f.batch_size, "Minibatch size");
    cmd->add_option("--lr", f.lr, "Base learning rate");
    cmd->add_option("--lr-decay-every", f.lr_decay_every, "Epochs between x0.1 decays");
}

void apply_train_overrides(const CLI::App* cmd, const TrainFlags& f, training::TrainConfig& t) {
    if (given(cmd, "--epochs")) t.epochs = f.epochs;
    if (given(cmd, "--batch-size")) t.batch_size = f.batch_size;
    if (given(cmd, "--lr")) t.base_lr = f.lr;
    if (given(cmd, "--lr-decay-every")) t.lr_decay_every = f.lr_decay_every;
}

ExperimentConfig merged_train_config(const CLI::App* cmd, const TrainFlags& f) {
    ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_experiment_config(f.config);
    if (given(cmd, "--manifest")) cfg.manifest = f.manifest;
    if (given(cmd, "--ratios")) cfg.ratios = data::parse_ratios(f.ratios);
    if (given(cmd, "--split-seed")) cfg.split_seed = f.split_seed;
    if (f.by_subject) cfg.granularity = data::SplitGranularity::by_subject;
    if (given(cmd, "--experiment")) cfg.experiment = f.experiment;
    if (given(cmd, "--backbone")) cfg.backbones = f.backbones;
    if (given(cmd, "--seed")) cfg.seeds = f.seeds;
    if (given(cmd, "--sampling")) cfg.train.sampling_mode = training::parse_sampling_mode(f.sampling);
    if (given(cmd, "--hflip-prob")) cfg.train.augmentation.hflip_prob = f.hflip_prob;
    if (f.pretrained) cfg.pretrained = true;
    if (given(cmd, "--out")) cfg.out = f.out;
    for (const auto& p : f.plugins) cfg.plugins.emplace_back(p);
    apply_train_overrides(cmd, f, cfg.train);
    return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knee osteoarthritis KL-grade classification experiments", "kneexnet"};
    app.require_subcommand(1);

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic marker dataset with a manifest");
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "Image seed");
    synth_cmd->add_option("--train-per-grade", synth.counts.train_per_grade, "Training images per grade");
    synth_cmd->add_option("--val-per-grade", synth.counts.val_per_grade, "Validation images per grade");
    synth_cmd->add_option("--test-per-grade", synth.counts.test_per_grade, "Test images per grade");
    bool unassigned = false;
    synth_cmd->add_flag("--unassigned", unassigned, "Leave the split column empty");

    SplitOptions split;
    std::string split_ratios = "7:1:2";
    bool split_by_subject = false;
    auto* split_cmd = app.add_subcommand("split", "Stratified train/val/test split of a manifest");
    split_cmd->add_option("--manifest", split.manifest, "Input manifest CSV")->required();
    split_cmd->add_option("--ratios", split_ratios, "train:val:test ratios")->capture_default_str();
    split_cmd->add_option("--seed", split.seed, "Split seed");
    split_cmd->add_flag("--by-subject", split_by_subject, "Keep each subject's images in one split");
    split_cmd->add_option("--out", split.out, "Output manifest CSV")->required();

    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "Train backbones over one or more seeds");
    train_cmd->add_option("--config", tf.config, "Experiment TOML; flags override it");
    train_cmd->add_option("--manifest", tf.manifest, "Manifest CSV (split or unsplit)");
    train_cmd->add_option("--ratios", tf.ratios, "Split ratios for an unsplit manifest");
    train_cmd->add_option("--split-seed", tf.split_seed, "Split seed for an unsplit manifest");
    train_cmd->add_flag("--by-subject", tf.by_subject, "Split by subject");
    train_cmd->add_option("--experiment", tf.experiment, "Experiment name");
    train_cmd->add_option("--backbone", tf.backbones, "Backbone name (repeatable)");
    train_cmd->add_option("--seed", tf.seeds, "Training seed (repeatable)");
    train_cmd->add_option("--sampling", tf.sampling, "uniform or inverse_frequency");
    train_cmd->add_option("--hflip-prob", tf.hflip_prob, "Horizontal flip probability");
    train_cmd->add_flag("--pretrained", tf.pretrained, "Request pretrained weights");
    train_cmd->add_option("--out", tf.out, "Run root directory");
    train_cmd->add_option("--plugin", tf.plugins, "Backbone provider library (repeatable)");
    add_train_overrides(train_cmd, tf);

    EnsembleOptions ens;
    TrainFlags ef;
    std::vector<std::string> members;
    auto* ens_cmd = app.add_subcommand("ensemble", "Combine trained runs by soft voting or stacking");
    ens_cmd->add_option("members", members, "Member run directories");
    ens_cmd->add_option("--member", members, "Member run directory (repeatable)");
    ens_cmd->add_option("--strategy", ens.strategy, "vote or stack")->capture_default_str();
    ens_cmd->add_option("--seed", ef.seeds, "Stacker seed (repeatable)");
    ens_cmd->add_option("--hidden", ens.hidden_dim, "Stacker hidden width")->capture_default_str();
    ens_cmd->add_option("--config", ef.config, "Experiment TOML whose [train] table configures the stacker");
    ens_cmd->add_option("--out", ens.out, "Output directory")->required();
    add_train_overrides(ens_cmd, ef);

    ExplainOptions ex;
    int ex_class = -1;
    std::vector<std::string> ex_plugins;
    auto* ex_cmd = app.add_subcommand("explain", "Smooth-GradCAM++ overlays for images");
    ex_cmd->add_option("--checkpoint", ex.checkpoint, "Checkpoint file or run directory")->required();
    ex_cmd->add_option("images", ex.images, "Input images")->required();
    ex_cmd->add_option("--class", ex_class, "Target grade (default: predicted)");
    ex_cmd->add_option("--layer", ex.cam.target_layer, "Target layer (default: the model's last conv block)");
    ex_cmd->add_option("--samples", ex.cam.n_samples, "Noisy samples")->capture_default_str();
    ex_cmd->add_option("--sigma", ex.cam.noise_sigma, "Noise std as a fraction of the value range")->capture_default_str();
    ex_cmd->add_option("--seed", ex.cam.seed, "Noise seed");
    ex_cmd->add_option("--alpha", ex.alpha, "Overlay opacity")->capture_default_str();
    ex_cmd->add_flag("--csv", ex.write_csv, "Also write the raw map as CSV");
    ex_cmd->add_option("--out", ex.out, "Output directory");
    ex_cmd->add_option("--plugin", ex_plugins, "Backbone provider library (repeatable)");

    std::vector<std::filesystem::path> report_dirs;
    std::filesystem::path report_csv;
    auto* rep_cmd = app.add_subcommand("report", "Compare runs, aggregates and ensembles");
    rep_cmd->add_option("dirs", report_dirs, "Run, backbone or ensemble directories");
    rep_cmd->add_option("--csv", report_csv, "Also write the table as CSV");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) {
            synth.preassign = !unassigned;
            const auto m = cmd_synth(synth);
            out << fmt::format("wrote {} images and {}\n", m.size(), (synth.out / "manifest.csv").string());
        } else if (split_cmd->parsed()) {
            split.ratios = data::parse_ratios(split_ratios);
            if (split_by_subject) split.granularity = data::SplitGranularity::by_subject;
            const auto m = cmd_split(split);
            const auto c = [&](data::Split s) { return m.subset(s).size(); };
            out << fmt::format("train {} / val {} / test {} -> {}\n", c(data::Split::train), c(data::Split::val),
                               c(data::Split::test), split.out.string());
        } else if (train_cmd->parsed()) {
            const auto summary = cmd_train(merged_train_config(train_cmd, tf), out);
            for (const auto& a : summary.aggregates) out << "aggregate: " << a.string() << '\n';
        } else if (ens_cmd->parsed()) {
            for (const auto& m : members) ens.members.emplace_back(m);
            if (!ef.config.empty()) ens.stacker_train = load_experiment_config(ef.config).train;
            if (given(ens_cmd, "--seed")) ens.seeds = ef.seeds;
            apply_train_overrides(ens_cmd, ef, ens.stacker_train);
            cmd_ensemble(ens, out);
        } else if (ex_cmd->parsed()) {
            for (const auto& p : ex_plugins) backbones::load_backbone_plugin(p);
            if (given(ex_cmd, "--class")) ex.target_class = ex_class;
            for (const auto& p : cmd_explain(ex)) out << p.string() << '\n';
        } else if (rep_cmd->parsed()) {
            const auto rows = collect_report(report_dirs);
            out << format_report_table(rows);
            if (!report_csv.empty()) {
                if (report_csv.has_parent_path()) std::filesystem::create_directories(report_csv.parent_path());
                std::ofstream csv(report_csv, std::ios::binary);
                csv << format_report_csv(rows);
                if (!csv) throw std::runtime_error(fmt::format("cannot write '{}'", report_csv.string()));
            }
        }
    } catch (const UsageError& e) {
        err << "kneexnet: usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "kneexnet: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace kneexnet::cli
