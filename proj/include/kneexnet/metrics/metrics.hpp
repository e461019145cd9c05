#pragma once

#include <array>
#include <span>
#include <string>

#include <json.hpp>

#include "kneexnet/grade.hpp"

namespace kneexnet::metrics {

using PerClass = std::array<double, kNumGrades>;

/// counts[true][predicted].
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumGrades>, kNumGrades> counts{};

    std::size_t total() const;
    std::size_t trace() const;
    std::size_t row_sum(std::size_t c) const;
    std::size_t col_sum(std::size_t c) const;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const KLGrade> preds, std::span<const KLGrade> labels);

/// One-vs-rest F1; any zero denominator yields 0 for that class.
PerClass per_class_f1(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);
double macro_f1(const PerClass& f1);

struct RunResult {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    PerClass f1{};
    friend bool operator==(const RunResult&, const RunResult&) = default;
};

RunResult make_run_result(const ConfusionMatrix& cm);
RunResult make_run_result(std::span<const KLGrade> preds, std::span<const KLGrade> labels);

struct AggregateResult {
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    PerClass mean_f1{};
    PerClass std_f1{};
    std::size_t n_runs = 0;
};

/// Sample mean and standard deviation (n-1 denominator; 0 when n = 1).
std::pair<double, double> mean_std(std::span<const double> values);

AggregateResult aggregate(std::span<const RunResult> results);

/// {accuracy, f1: [5], confusion: [[5x5]]}
nlohmann::json to_json(const RunResult& r);
RunResult run_result_from_json(const nlohmann::json& j);
/// {n_runs, accuracy: {mean, std}, f1: {mean: [5], std: [5]}}
nlohmann::json to_json(const AggregateResult& a);
AggregateResult aggregate_from_json(const nlohmann::json& j);

/// "0.70 ± 0.01"
std::string format_mean_std(double mean, double std, int decimals = 2);

}  // namespace kneexnet::metrics
