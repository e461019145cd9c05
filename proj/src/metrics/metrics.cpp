#include "kneexnet/metrics/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace kneexnet::metrics {

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts) {
        for (auto v : row) t += v;
    }
    return t;
}

std::size_t ConfusionMatrix::trace() const {
    std::size_t t = 0;
    for (std::size_t c = 0; c < kNumGrades; ++c) t += counts[c][c];
    return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t c) const {
    std::size_t t = 0;
    for (auto v : counts[c]) t += v;
    return t;
}

std::size_t ConfusionMatrix::col_sum(std::size_t c) const {
    std::size_t t = 0;
    for (const auto& row : counts) t += row[c];
    return t;
}

ConfusionMatrix confusion(std::span<const KLGrade> preds, std::span<const KLGrade> labels) {
    if (preds.size() != labels.size()) {
        throw std::invalid_argument(
            fmt::format("confusion: {} predictions vs {} labels", preds.size(), labels.size()));
    }
    if (preds.empty()) throw std::invalid_argument("confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) ++cm.counts[labels[i].index()][preds[i].index()];
    return cm;
}

PerClass per_class_f1(const ConfusionMatrix& cm) {
    PerClass f1{};
    for (std::size_t c = 0; c < kNumGrades; ++c) {
        const auto tp = static_cast<double>(cm.counts[c][c]);
        const auto col = cm.col_sum(c);
        const auto row = cm.row_sum(c);
        if (col == 0 || row == 0) continue;
        const double precision = tp / static_cast<double>(col);
        const double recall = tp / static_cast<double>(row);
        if (precision + recall == 0.0) continue;
        f1[c] = 2.0 * precision * recall / (precision + recall);
    }
    return f1;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double macro_f1(const PerClass& f1) {
    double s = 0.0;
    for (double v : f1) s += v;
    return s / static_cast<double>(f1.size());
}

RunResult make_run_result(const ConfusionMatrix& cm) { return {cm, accuracy(cm), per_class_f1(cm)}; }

RunResult make_run_result(std::span<const KLGrade> preds, std::span<const KLGrade> labels) {
    return make_run_result(confusion(preds, labels));
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_std: no values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

AggregateResult aggregate(std::span<const RunResult> results) {
    if (results.empty()) throw std::invalid_argument("aggregate: no run results");
    AggregateResult a;
    a.n_runs = results.size();
    std::vector<double> buf(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) buf[i] = results[i].accuracy;
    std::tie(a.mean_accuracy, a.std_accuracy) = mean_std(buf);
    for (std::size_t c = 0; c < kNumGrades; ++c) {
        for (std::size_t i = 0; i < results.size(); ++i) buf[i] = results[i].f1[c];
        std::tie(a.mean_f1[c], a.std_f1[c]) = mean_std(buf);
    }
    return a;
}

nlohmann::json to_json(const RunResult& r) {
    nlohmann::json cm = nlohmann::json::array();
    for (const auto& row : r.confusion.counts) cm.push_back(row);
    return {{"accuracy", r.accuracy}, {"f1", r.f1}, {"confusion", cm}};
}

RunResult run_result_from_json(const nlohmann::json& j) {
    ConfusionMatrix cm;
    const auto& rows = j.at("confusion");
    if (rows.size() != kNumGrades) throw std::invalid_argument("metrics JSON: confusion must be 5x5");
    for (std::size_t t = 0; t < kNumGrades; ++t) {
        if (rows[t].size() != kNumGrades) throw std::invalid_argument("metrics JSON: confusion must be 5x5");
        for (std::size_t p = 0; p < kNumGrades; ++p) cm.counts[t][p] = rows[t][p].get<std::size_t>();
    }
    RunResult r{cm, j.at("accuracy").get<double>(), j.at("f1").get<PerClass>()};
    return r;
}

nlohmann::json to_json(const AggregateResult& a) {
    return {{"n_runs", a.n_runs},
            {"accuracy", {{"mean", a.mean_accuracy}, {"std", a.std_accuracy}}},
            {"f1", {{"mean", a.mean_f1}, {"std", a.std_f1}}}};
}

AggregateResult aggregate_from_json(const nlohmann::json& j) {
    AggregateResult a;
    a.n_runs = j.at("n_runs").get<std::size_t>();
    a.mean_accuracy = j.at("accuracy").at("mean").get<double>();
    a.std_accuracy = j.at("accuracy").at("std").get<double>();
    a.mean_f1 = j.at("f1").at("mean").get<PerClass>();
    a.std_f1 = j.at("f1").at("std").get<PerClass>();
    return a;
}

std::string format_mean_std(double mean, double std, int decimals) {
    return fmt::format("{:.{}f} ± {:.{}f}", mean, decimals, std, decimals);
}

}  // namespace kneexnet::metrics
