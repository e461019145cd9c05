// Desk-scale acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "kneexnet/backbones/checkpoint.hpp"
#include "kneexnet/cli/cli.hpp"
#include "kneexnet/data/split.hpp"
#include "kneexnet/data/synthetic.hpp"
#include "kneexnet/ensemble/ensemble.hpp"
#include "kneexnet/ensemble/stacker.hpp"
#include "kneexnet/explain/cam.hpp"
#include "kneexnet/metrics/metrics.hpp"
#include "kneexnet/random.hpp"
#include "kneexnet/sampling/sampling.hpp"
#include "kneexnet/training/run_dir.hpp"
#include "kneexnet/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace kneexnet;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kRoot = ACCEPTANCE_TMP_ROOT;
const std::vector<std::uint64_t> kSeeds{0, 1, 2};

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void cli_or_throw(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    if (const int code = cli::run(args, out, err); code != 0) {
        throw std::runtime_error(fmt::format("kneexnet {} exited {}: {}", args.front(), code, err.str()));
    }
}

/// synth -> train (3 seeds) through the command-line entry point.
double run_pipeline(const fs::path& root) {
    fs::remove_all(root);
    const auto t0 = Clock::now();
    cli_or_throw({"synth", "--out", (root / "data").string(), "--seed", "0"});
    std::vector<std::string> args{"train", "--manifest", (root / "data" / "manifest.csv").string(), "--experiment",
                                  "marker", "--hflip-prob", "0", "--out", (root / "runs").string()};
    for (auto s : kSeeds) {
        args.push_back("--seed");
        args.push_back(std::to_string(s));
    }
    cli_or_throw(args);
    return seconds_since(t0);
}

fs::path run_dir(const fs::path& root, std::uint64_t seed) {
    return root / "runs" / "marker" / "tiny" / std::to_string(seed);
}

// 1 -------------------------------------------------------------------------

Verdict metric_oracle() {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        std::vector<KLGrade> preds, labels;
        for (int i = 0; i < 200; ++i) {
            labels.emplace_back(static_cast<int>(rng.below(5)));
            preds.emplace_back(rng.uniform() < 0.6 ? labels.back().value() : static_cast<int>(rng.below(5)));
        }
        const auto r = metrics::make_run_result(preds, labels);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
        worst = std::max(worst, std::abs(r.accuracy - static_cast<double>(hits) / 200.0));
        for (int c = 0; c < 5; ++c) {
            std::size_t tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                const bool p = preds[i].value() == c, t = labels[i].value() == c;
                tp += p && t;
                fp += p && !t;
                fn += !p && t;
            }
            const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
            worst = std::max(worst, std::abs(r.f1[c] - f1));
        }
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-12 && t < 5.0, fmt::format("max |diff| {:.3g}, {:.2f} s", worst, t)};
}

// 2 -------------------------------------------------------------------------

Verdict split_correctness() {
    const ClassCounts hist{3253, 1495, 2175, 1086, 251};
    std::vector<data::SampleRecord> records;
    for (int g = 0; g < 5; ++g) {
        for (std::size_t i = 0; i < hist[g]; ++i) {
            records.push_back({fmt::format("img/{}_{}.png", g, i), KLGrade(g), fmt::format("S{}_{}", g, i)});
        }
    }
    const data::DatasetManifest manifest(records);
    const auto a = data::stratified_split(manifest, {}, 42);
    const auto b = data::stratified_split(manifest, {}, 42);

    bool ok = a.size() == manifest.size();
    std::array<std::size_t, 3> totals{};
    std::array<std::array<long, 3>, 5> per{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& r = a.records()[i];
        ok = ok && r.image_path == records[i].image_path && r.split != data::Split::unassigned;
        if (r.split == data::Split::unassigned) continue;
        const auto s = static_cast<std::size_t>(r.split) - 1;
        ++totals[s];
        ++per[r.grade.index()][s];
    }
    // Independent largest-remainder targets from integer arithmetic over the 7:1:2 tenths.
    long worst = 0;
    for (int g = 0; g < 5; ++g) {
        const std::array<long, 3> w{7, 1, 2};
        const auto n = static_cast<long>(hist[g]);
        std::array<long, 3> target{}, rem{};
        long left = n;
        for (int s = 0; s < 3; ++s) {
            target[s] = n * w[s] / 10;
            rem[s] = n * w[s] % 10;
            left -= target[s];
        }
        while (left-- > 0) {
            int best = 0;
            for (int s = 1; s < 3; ++s) {
                if (rem[s] > rem[best]) best = s;
            }
            ++target[best];
            rem[best] = -1;
        }
        for (int s = 0; s < 3; ++s) worst = std::max(worst, std::abs(per[g][s] - target[s]));
    }
    const auto off = [&](int s, long want) { return std::abs(static_cast<long>(totals[s]) - want); };
    const bool totals_ok = off(0, 5782) <= 5 && off(1, 826) <= 5 && off(2, 1652) <= 5;
    const bool same = data::format_manifest(a) == data::format_manifest(b);
    return {ok && worst <= 1 && totals_ok && same,
            fmt::format("{}/{}/{}, max per-class deviation {}, reruns identical: {}", totals[0], totals[1], totals[2],
                        worst, same)};
}

// 3 -------------------------------------------------------------------------

Verdict sampler_balance() {
    const auto t0 = Clock::now();
    const ClassCounts counts{2000, 296, 1516, 757, 173};
    std::vector<KLGrade> labels;
    for (int g = 0; g < 5; ++g) labels.insert(labels.end(), counts[g], KLGrade(g));
    const auto weights = sampling::inverse_frequency_weights(counts, labels);
    const auto draws = sampling::weighted_sample(weights, 10000, 7);
    std::array<double, 5> freq{};
    for (auto i : draws) freq[labels[i].index()] += 1.0 / 10000.0;
    const double t = seconds_since(t0);
    bool ok = t < 2.0;
    for (double f : freq) ok = ok && std::abs(f - 0.20) <= 0.02;
    return {ok, fmt::format("frequencies {:.4f}, {:.2f} s", fmt::join(freq, " "), t)};
}

// 4 -------------------------------------------------------------------------

Verdict lr_exactness() {
    const training::TrainConfig cfg;
    const double expect[] = {1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9};
    int mismatches = 0;
    for (int e = 0; e < 30; ++e) mismatches += training::lr_at_epoch(cfg, e) != expect[e / 5];
    return {mismatches == 0, fmt::format("{} of 30 epochs differ", mismatches)};
}

// 5, 7, 8 -------------------------------------------------------------------

Verdict pipeline_accuracy(const fs::path& root, double seconds) {
    std::vector<double> accs;
    for (auto s : kSeeds) {
        accs.push_back(metrics::run_result_from_json(training::read_json(run_dir(root, s) / "metrics.json")).accuracy);
    }
    const auto agg_json = training::read_json(root / "runs" / "marker" / "tiny" / "aggregate.json");
    const auto agg = metrics::aggregate_from_json(agg_json);
    const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / 3.0;
    double ss = 0.0;
    for (double a : accs) ss += (a - mean) * (a - mean);
    const double sd = std::sqrt(ss / 2.0);
    const bool well_formed = agg.n_runs == 3 && std::abs(agg.mean_accuracy - mean) < 1e-12 &&
                             std::abs(agg.std_accuracy - sd) < 1e-12 && std::isfinite(agg.std_accuracy);
    const bool acc_ok = std::all_of(accs.begin(), accs.end(), [](double a) { return a >= 0.95; });
    return {acc_ok && well_formed && seconds < 180.0,
            fmt::format("test accuracy {:.3f} per seed, aggregate {}, {:.1f} s", fmt::join(accs, "/"),
                        metrics::format_mean_std(agg.mean_accuracy, agg.std_accuracy), seconds)};
}

Verdict vote_non_degradation(const fs::path& root) {
    std::vector<std::string> args{"ensemble"};
    double best = 0.0;
    for (auto s : kSeeds) {
        args.push_back(run_dir(root, s).string());
        best = std::max(best, metrics::run_result_from_json(training::read_json(run_dir(root, s) / "metrics.json")).accuracy);
    }
    args.insert(args.end(), {"--strategy", "vote", "--out", (root / "vote").string()});
    cli_or_throw(args);
    const double vote = metrics::run_result_from_json(training::read_json(root / "vote" / "metrics.json")).accuracy;
    return {vote >= best - 0.05, fmt::format("vote {:.3f} vs best member {:.3f}", vote, best)};
}

Verdict cam_checks(const fs::path& root) {
    const auto t0 = Clock::now();
    const auto dir = run_dir(root, 0);
    auto model = backbones::model_from_checkpoint(backbones::load_checkpoint(dir / "checkpoint.kxn"));
    const auto info = training::read_json(dir / "run.json");
    const auto test = training::load_images(
        data::load_manifest(info["split_manifest"].get<std::string>()).subset(data::Split::test));

    // (a) one noiseless sample reduces to plain GradCAM++
    double diff = 0.0;
    explain::CamConfig single;
    single.n_samples = 1;
    single.noise_sigma = 0.0;
    for (std::size_t i = 0; i < test.size(); i += 4) {
        const auto a = explain::smooth_gradcampp(*model, test.images[i], test.labels[i], single);
        const auto b = explain::gradcampp(*model, test.images[i], test.labels[i]);
        for (std::size_t k = 0; k < a.values.size(); ++k) diff = std::max(diff, std::abs(a.values[k] - b.values[k]));
    }

    // (b) range and shape, (c) mass inside the marker quadrant
    bool range_ok = true;
    double mass_sum = 0.0, mass_min = 1.0;
    int counted = 0;
    const int half = data::kInputSize / 2;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto map = explain::smooth_gradcampp(*model, test.images[i], test.labels[i], explain::CamConfig{});
        range_ok = range_ok && map.height == test.images[i].height() && map.width == test.images[i].width();
        for (double v : map.values) range_ok = range_ok && v >= 0.0 && v <= 1.0;
        const auto q = data::marker_quadrant(test.labels[i]);
        if (q == data::Quadrant::centre) continue;
        const int y0 = (q == data::Quadrant::bottom_left || q == data::Quadrant::bottom_right) ? half : 0;
        const int x0 = (q == data::Quadrant::top_right || q == data::Quadrant::bottom_right) ? half : 0;
        const double m = explain::mass_fraction(map, y0, y0 + half, x0, x0 + half);
        mass_sum += m;
        mass_min = std::min(mass_min, m);
        ++counted;
    }
    const double mass = mass_sum / counted;
    const double t = seconds_since(t0);
    return {diff <= 1e-6 && range_ok && mass >= 0.6 && t < 60.0,
            fmt::format("(a) max diff {:.2g}; (b) in range: {}; (c) quadrant mass mean {:.3f}, min {:.3f} over {} "
                        "images; {:.1f} s",
                        diff, range_ok, mass, mass_min, counted, t)};
}

// 6 -------------------------------------------------------------------------

void stacker_task(std::size_t n, std::uint64_t seed, std::vector<ensemble::EnsembleInput>& x, std::vector<KLGrade>& y) {
    // Ten members, each confident (+3) about a random class; the label is member 0's argmax.
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        ensemble::EnsembleInput in;
        in.n_members = 10;
        for (int m = 0; m < 10; ++m) {
            const auto hot = rng.below(5);
            for (std::size_t k = 0; k < 5; ++k) in.values.push_back(rng.normal() + (k == hot ? 3.0 : 0.0));
        }
        y.emplace_back(static_cast<int>(backbones::argmax(std::span(in.values).first(5))));
        x.push_back(std::move(in));
    }
}

Verdict ensemble_properties() {
    const auto t0 = Clock::now();
    Rng rng(606);
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<backbones::LogitsVector> members(1 + rng.below(10));
        for (auto& m : members) {
            for (int k = 0; k < 5; ++k) m.values.push_back(rng.normal() * 4.0);
        }
        const auto base = ensemble::soft_vote(members).prediction;
        auto shifted = members;
        for (auto& m : shifted) {
            const double c = rng.uniform(-100.0, 100.0);
            for (auto& v : m.values) v += c;
        }
        std::vector<backbones::LogitsVector> copies;
        for (std::uint64_t k = 0, n = 2 + rng.below(4); k < n; ++k) copies.insert(copies.end(), members.begin(), members.end());
        violations += ensemble::soft_vote(shifted).prediction != base;
        violations += ensemble::soft_vote(copies).prediction != base;
    }

    std::vector<ensemble::EnsembleInput> xt, xv, xs;
    std::vector<KLGrade> yt, yv, ys;
    stacker_task(50000, 1, xt, yt);
    stacker_task(2000, 2, xv, yv);
    stacker_task(5000, 3, xs, ys);
    training::TrainConfig cfg;
    cfg.base_lr = 1e-3;
    const auto out = ensemble::train_stacker(ensemble::StackerSpec::for_members(10), xt, yt, xv, yv, cfg);
    const auto preds = ensemble::predict_stacked(out.checkpoint, xs);
    const double acc = metrics::make_run_result(preds, ys).accuracy;
    const double t = seconds_since(t0);
    return {violations == 0 && acc >= 0.99 && t < 60.0,
            fmt::format("{} invariance violations; stacker test accuracy {:.4f} after {} epochs; {:.1f} s", violations,
                        acc, cfg.epochs, t)};
}

// 9 -------------------------------------------------------------------------

Verdict determinism(const fs::path& first, const fs::path& second) {
    int differing = 0;
    for (auto s : kSeeds) {
        for (const char* f : {"history.csv", "metrics.json"}) {
            const auto a = read_bytes(run_dir(first, s) / f), b = read_bytes(run_dir(second, s) / f);
            differing += a.empty() || a != b;
        }
    }
    return {differing == 0, fmt::format("{} of {} artifacts differ", differing, 2 * kSeeds.size())};
}

}  // namespace

int main() {
    const auto start = Clock::now();
    fs::create_directories(kRoot);
    std::array<std::optional<Verdict>, 11> results;

    auto attempt = [&](int id, const std::function<Verdict()>& f) {
        try {
            results[id] = f();
        } catch (const std::exception& e) {
            results[id] = Verdict{false, fmt::format("error: {}", e.what())};
        }
    };

    attempt(1, metric_oracle);
    attempt(2, split_correctness);
    attempt(3, sampler_balance);
    attempt(4, lr_exactness);
    attempt(6, ensemble_properties);

    const auto first = kRoot / "pipeline_a", second = kRoot / "pipeline_b";
    double pipeline_seconds = 0.0;
    bool pipeline_ok = true;
    try {
        pipeline_seconds = run_pipeline(first);
    } catch (const std::exception& e) {
        pipeline_ok = false;
        for (int id : {5, 7, 8, 9}) results[id] = Verdict{false, fmt::format("pipeline failed: {}", e.what())};
    }
    if (pipeline_ok) {
        attempt(5, [&] { return pipeline_accuracy(first, pipeline_seconds); });
        attempt(7, [&] { return vote_non_degradation(first); });
        attempt(8, [&] { return cam_checks(first); });
        attempt(9, [&] {
            run_pipeline(second);
            return determinism(first, second);
        });
    }
    const double total = seconds_since(start);
    results[10] = Verdict{total < 600.0, fmt::format("{:.1f} s total", total)};

    const char* names[] = {"",
                           "metric oracle equivalence",
                           "split correctness",
                           "sampler balance",
                           "LR schedule exactness",
                           "end-to-end synthetic pipeline",
                           "ensemble properties",
                           "ensemble non-degradation",
                           "Smooth-GradCAM++ checks",
                           "determinism",
                           "suite runtime"};
    int failed = 0;
    for (int id = 1; id <= 10; ++id) {
        const auto& v = *results[id];
        failed += !v.pass;
        std::cout << fmt::format("{} criterion {:>2}: {} ({})\n", v.pass ? "PASS" : "FAIL", id, names[id], v.detail);
    }
    std::cout << fmt::format("{} of 10 criteria passed\n", 10 - failed);
    return failed == 0 ? 0 : 1;
}
