// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/types.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace intentkit
{

struct EvalRow
{
    IntentLabel gt;
    /// preds[0] is the greedy prediction; further entries are samples for Pass@N.
    std::vector<Prediction> preds;
};

struct EmptyInput: InvalidArgument
{
    EmptyInput(): InvalidArgument("metric input is empty") {}
};

struct InsufficientSamples: InvalidArgument
{
    InsufficientSamples(std::size_t have, std::size_t need)
        : InvalidArgument("row has " + std::to_string(have) + " predictions, need " + std::to_string(need))
    {
    }
};

struct DegenerateRange: InvalidArgument
{
    DegenerateRange(): InvalidArgument("g_max must be greater than g_min") {}
};

struct InsufficientClasses: InvalidArgument
{
    InsufficientClasses(std::size_t have, std::size_t need)
        : InvalidArgument("only " + std::to_string(have) + " classes with support, need " + std::to_string(need))
    {
    }
};

struct ClassStats
{
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct F1Report
{
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::map<IntentLabel, ClassStats> per_class; // every taxonomy class
    /// confusion[gt index][pred index]; the last column counts NoMatch and out-of-taxonomy predictions.
    std::vector<std::vector<std::size_t>> confusion;
};

struct MetricOptions
{
    /// Average macro-F1 over every taxonomy class instead of classes present in gt.
    bool macro_over_taxonomy = false;
};

[[nodiscard]] double accuracy(std::span<EvalRow const> rows);

[[nodiscard]] F1Report f1_report(std::span<EvalRow const> rows, Taxonomy const& taxonomy, MetricOptions options = {});

/// Fraction of rows where any of the first n predictions equals gt.
[[nodiscard]] double pass_at_n(std::span<EvalRow const> rows, std::size_t n);

[[nodiscard]] double gen_gap(double acc_train, double acc_test);

/// (g_max - gap) / (g_max - g_min); 1 is the best generalization.
[[nodiscard]] double gen_gap_vis(double gap, double g_min, double g_max);

struct ClassAccuracy
{
    IntentLabel label;
    std::size_t support = 0;
    double accuracy = 0.0;
};

struct HeadTailReport
{
    std::vector<ClassAccuracy> head;
    std::vector<ClassAccuracy> tail;
};

/// Ranks supported classes by gt frequency (ties by taxonomy order). tail keeps ranking order, least frequent last.
[[nodiscard]] HeadTailReport head_tail_report(std::span<EvalRow const> rows, Taxonomy const& taxonomy, std::size_t top,
                                              std::size_t bottom);

struct MetricReport
{
    std::size_t rows = 0;
    double acc = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::optional<double> pass_at_n;
    std::size_t n = 0;
    std::optional<double> gen_gap;
    std::optional<double> gen_gap_vis;
    std::map<IntentLabel, ClassStats> per_class;
    std::vector<std::vector<std::size_t>> confusion;
    std::vector<std::string> confusion_labels; // rows; columns add "<no_match>"
};

/// Accuracy and F1 always; Pass@N when every row carries at least n predictions.
[[nodiscard]] MetricReport build_report(std::span<EvalRow const> rows, Taxonomy const& taxonomy, std::size_t n = 4,
                                        MetricOptions options = {});

[[nodiscard]] std::string to_json(MetricReport const& report);
/// label,precision,recall,f1,support rows followed by summary rows (metric,value).
[[nodiscard]] std::string to_csv(MetricReport const& report);

} // namespace intentkit
