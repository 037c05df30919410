// SPDX-License-Identifier: Apache-2.0
#include <intentkit/metrics.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>

namespace intentkit
{

namespace
{
    bool hit(Prediction const& p, IntentLabel const& gt)
    {
        return p && *p == gt;
    }

    void require_rows(std::span<EvalRow const> rows)
    {
        if (rows.empty())
            throw EmptyInput();
        for (auto const& r: rows)
        {
            if (r.preds.empty())
                throw InsufficientSamples(0, 1);
        }
    }

    double ratio(std::size_t num, std::size_t den)
    {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    }
} // namespace

double accuracy(std::span<EvalRow const> rows)
{
    require_rows(rows);
    std::size_t correct = 0;
    for (auto const& r: rows)
        correct += hit(r.preds.front(), r.gt) ? 1 : 0;
    return ratio(correct, rows.size());
}

F1Report f1_report(std::span<EvalRow const> rows, Taxonomy const& taxonomy, MetricOptions options)
{
    require_rows(rows);
    auto const K = taxonomy.size();
    F1Report rep;
    rep.confusion.assign(K, std::vector<std::size_t>(K + 1, 0));

    for (auto const& r: rows)
    {
        if (!taxonomy.contains(r.gt))
            throw DataError("ground truth '" + r.gt.name + "' not in taxonomy " + taxonomy.name());
        auto const& p = r.preds.front();
        auto const col = p && taxonomy.contains(*p) ? taxonomy.index_of(*p) : K;
        ++rep.confusion[taxonomy.index_of(r.gt)][col];
    }

    double macroSum = 0.0;
    std::size_t macroCount = 0;
    double weightedSum = 0.0;
    for (std::size_t k = 0; k < K; ++k)
    {
        std::size_t tp = rep.confusion[k][k];
        std::size_t support = 0;
        for (std::size_t j = 0; j <= K; ++j)
            support += rep.confusion[k][j];
        std::size_t predicted = 0;
        for (std::size_t i = 0; i < K; ++i)
            predicted += rep.confusion[i][k];

        ClassStats s;
        s.support = support;
        s.precision = ratio(tp, predicted);
        s.recall = ratio(tp, support);
        s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        rep.per_class.emplace(taxonomy.labels()[k], s);

        if (options.macro_over_taxonomy || support > 0)
        {
            macroSum += s.f1;
            ++macroCount;
        }
        weightedSum += s.f1 * static_cast<double>(support);
    }
    rep.macro_f1 = macroCount ? macroSum / static_cast<double>(macroCount) : 0.0;
    rep.weighted_f1 = weightedSum / static_cast<double>(rows.size());
    return rep;
}

double pass_at_n(std::span<EvalRow const> rows, std::size_t n)
{
    if (rows.empty())
        throw EmptyInput();
    if (n == 0)
        throw InvalidArgument("n must be >= 1");
    std::size_t passed = 0;
    for (auto const& r: rows)
    {
        if (r.preds.size() < n)
            throw InsufficientSamples(r.preds.size(), n);
        if (std::any_of(r.preds.begin(), r.preds.begin() + static_cast<std::ptrdiff_t>(n),
                        [&](auto const& p) { return hit(p, r.gt); }))
            ++passed;
    }
    return ratio(passed, rows.size());
}

double gen_gap(double acc_train, double acc_test)
{
    return acc_train - acc_test;
}

double gen_gap_vis(double gap, double g_min, double g_max)
{
    if (!(g_max > g_min))
        throw DegenerateRange();
    return (g_max - gap) / (g_max - g_min);
}

HeadTailReport head_tail_report(std::span<EvalRow const> rows, Taxonomy const& taxonomy, std::size_t top,
                                std::size_t bottom)
{
    auto const rep = f1_report(rows, taxonomy);
    std::vector<ClassAccuracy> ranked;
    for (auto const& label: taxonomy.labels())
    {
        auto const& s = rep.per_class.at(label);
        if (s.support > 0)
            ranked.push_back({ label, s.support, s.recall });
    }
    if (ranked.size() < top + bottom)
        throw InsufficientClasses(ranked.size(), top + bottom);
    // taxonomy order is already the secondary key
    std::stable_sort(ranked.begin(), ranked.end(), [](auto const& a, auto const& b) { return a.support > b.support; });

    HeadTailReport out;
    out.head.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top));
    out.tail.assign(ranked.end() - static_cast<std::ptrdiff_t>(bottom), ranked.end());
    return out;
}

MetricReport build_report(std::span<EvalRow const> rows, Taxonomy const& taxonomy, std::size_t n, MetricOptions options)
{
    MetricReport m;
    m.rows = rows.size();
    m.acc = accuracy(rows);
    auto f1 = f1_report(rows, taxonomy, options);
    m.macro_f1 = f1.macro_f1;
    m.weighted_f1 = f1.weighted_f1;
    m.per_class = std::move(f1.per_class);
    m.confusion = std::move(f1.confusion);
    for (auto const& l: taxonomy.labels())
        m.confusion_labels.push_back(l.name);
    bool const enoughSamples = n > 0 && std::all_of(rows.begin(), rows.end(), [&](auto const& r) { return r.preds.size() >= n; });
    if (enoughSamples)
    {
        m.n = n;
        m.pass_at_n = pass_at_n(rows, n);
    }
    return m;
}

std::string to_json(MetricReport const& m)
{
    nlohmann::ordered_json j;
    j["rows"] = m.rows;
    j["acc"] = m.acc;
    j["macro_f1"] = m.macro_f1;
    j["weighted_f1"] = m.weighted_f1;
    if (m.pass_at_n)
    {
        j["pass_at_n"] = *m.pass_at_n;
        j["n"] = m.n;
    }
    if (m.gen_gap)
        j["gen_gap"] = *m.gen_gap;
    if (m.gen_gap_vis)
        j["gen_gap_vis"] = *m.gen_gap_vis;
    auto& per = j["per_class"] = nlohmann::ordered_json::object();
    for (auto const& name: m.confusion_labels)
    {
        auto const& s = m.per_class.at(IntentLabel { name });
        per[name] = { { "precision", s.precision }, { "recall", s.recall }, { "f1", s.f1 }, { "support", s.support } };
    }
    auto columns = m.confusion_labels;
    columns.emplace_back("<no_match>");
    j["confusion"] = { { "labels", columns }, { "matrix", m.confusion } };
    return j.dump(2);
}

std::string to_csv(MetricReport const& m)
{
    std::string out = "label,precision,recall,f1,support\n";
    char buf[512];
    for (auto const& name: m.confusion_labels)
    {
        auto const& s = m.per_class.at(IntentLabel { name });
        std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%zu\n", name.c_str(), s.precision, s.recall, s.f1, s.support);
        out += buf;
    }
    auto summary = [&](char const* key, double v) {
        std::snprintf(buf, sizeof buf, "%s,%.10g,,,\n", key, v);
        out += buf;
    };
    summary("acc", m.acc);
    summary("macro_f1", m.macro_f1);
    summary("weighted_f1", m.weighted_f1);
    if (m.pass_at_n)
        summary("pass_at_n", *m.pass_at_n);
    if (m.gen_gap)
        summary("gen_gap", *m.gen_gap);
    if (m.gen_gap_vis)
        summary("gen_gap_vis", *m.gen_gap_vis);
    return out;
}

} // namespace intentkit
