// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <intentkit/metrics.hpp>

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace intentkit;
using namespace testsupport;

namespace
{
Taxonomy const& abc()
{
    static Taxonomy const t("abc", { "a", "b", "c" });
    return t;
}

EvalRow row(std::string gt, std::vector<std::optional<std::string>> preds)
{
    EvalRow r { L(std::move(gt)), {} };
    for (auto& p: preds)
        r.preds.push_back(p ? Prediction { L(*p) } : std::nullopt);
    return r;
}

std::vector<EvalRow> rows_of(std::vector<std::string> const& gt, std::vector<std::optional<std::string>> const& pred)
{
    std::vector<EvalRow> out;
    for (std::size_t i = 0; i < gt.size(); ++i)
        out.push_back(row(gt[i], { pred[i] }));
    return out;
}

struct Oracle
{
    double acc, macro, weighted;
    std::vector<double> f1;
};

// textbook per-class counts, 0 for empty denominators
Oracle oracle(std::vector<EvalRow> const& rows, Taxonomy const& tax, bool overTaxonomy)
{
    std::size_t const K = tax.size();
    std::vector<double> tp(K), fp(K), fn(K), sup(K);
    double correct = 0;
    for (auto const& r: rows)
    {
        std::size_t const g = tax.index_of(r.gt);
        sup[g] += 1;
        auto const& p = r.preds[0];
        bool const inTax = p && tax.contains(*p);
        if (inTax && *p == r.gt)
        {
            tp[g] += 1;
            correct += 1;
        }
        else
        {
            fn[g] += 1;
            if (inTax)
                fp[tax.index_of(*p)] += 1;
        }
    }
    Oracle o { correct / static_cast<double>(rows.size()), 0, 0, std::vector<double>(K) };
    double classes = 0;
    for (std::size_t k = 0; k < K; ++k)
    {
        double const P = tp[k] + fp[k] > 0 ? tp[k] / (tp[k] + fp[k]) : 0;
        double const R = tp[k] + fn[k] > 0 ? tp[k] / (tp[k] + fn[k]) : 0;
        o.f1[k] = P + R > 0 ? 2 * P * R / (P + R) : 0;
        if (overTaxonomy || sup[k] > 0)
        {
            o.macro += o.f1[k];
            classes += 1;
        }
        o.weighted += o.f1[k] * sup[k];
    }
    o.macro /= classes;
    o.weighted /= static_cast<double>(rows.size());
    return o;
}

std::vector<EvalRow> random_rows(std::mt19937_64& rng, Taxonomy const& tax, std::size_t n, std::size_t samples)
{
    std::vector<EvalRow> rows;
    // skew gt so some classes have zero support
    std::size_t const used = 1 + rng() % tax.size();
    for (std::size_t i = 0; i < n; ++i)
    {
        EvalRow r { tax.labels()[rng() % used], {} };
        for (std::size_t j = 0; j < samples; ++j)
        {
            auto const roll = rng() % 10;
            if (roll == 0)
                r.preds.push_back(std::nullopt);
            else if (roll < 5)
                r.preds.push_back(r.gt);
            else
                r.preds.push_back(tax.labels()[rng() % tax.size()]);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}
} // namespace

TEST_CASE("accuracy examples")
{
    CHECK(accuracy(rows_of({ "a", "b", "c" }, { "a", "b", "a" })) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(accuracy(rows_of({ "a", "b" }, { std::nullopt, std::nullopt })) == 0.0);
    CHECK(accuracy(rows_of({ "a", "b" }, { "a", "b" })) == 1.0);
    CHECK_THROWS_AS((void)accuracy(std::vector<EvalRow> {}), EmptyInput);
    CHECK_THROWS_AS((void)accuracy(std::vector<EvalRow> { EvalRow { L("a"), {} } }), InsufficientSamples);
}

TEST_CASE("two-class F1 example")
{
    Taxonomy const ab("ab", { "a", "b" });
    auto const rep = f1_report(rows_of({ "a", "a", "b" }, { "a", "b", "b" }), ab);
    auto const& a = rep.per_class.at(L("a"));
    auto const& b = rep.per_class.at(L("b"));
    CHECK(a.precision == 1.0);
    CHECK(a.recall == 0.5);
    CHECK(a.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(b.precision == 0.5);
    CHECK(b.recall == 1.0);
    CHECK(b.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(rep.macro_f1 == doctest::Approx(2.0 / 3.0));
    CHECK(rep.weighted_f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("zero-support class")
{
    auto const rows = rows_of({ "a", "a", "b" }, { "a", "b", "b" });
    // c has no support and is never predicted: F1 0
    auto const present = f1_report(rows, abc());
    CHECK(present.per_class.at(L("c")).f1 == 0.0);
    CHECK(present.per_class.at(L("c")).support == 0);
    CHECK(present.macro_f1 == doctest::Approx(2.0 / 3.0));

    auto const all = f1_report(rows, abc(), { true });
    CHECK(all.macro_f1 == doctest::Approx((2.0 / 3.0 + 2.0 / 3.0 + 0.0) / 3.0));
    CHECK(all.weighted_f1 == present.weighted_f1);
}

TEST_CASE("perfect predictions")
{
    auto const rep = f1_report(rows_of({ "a", "b", "c", "a" }, { "a", "b", "c", "a" }), abc());
    CHECK(rep.macro_f1 == 1.0);
    CHECK(rep.weighted_f1 == 1.0);
}

TEST_CASE("NoMatch goes to the overflow column")
{
    auto const rows = rows_of({ "a", "b", "b" }, { std::nullopt, "b", "zzz" });
    auto const rep = f1_report(rows, abc());
    REQUIRE(rep.confusion.size() == 3);
    REQUIRE(rep.confusion[0].size() == 4);
    CHECK(rep.confusion[0][3] == 1);
    CHECK(rep.confusion[1][1] == 1);
    CHECK(rep.confusion[1][3] == 1);
    CHECK(rep.per_class.at(L("a")).recall == 0.0);
    CHECK(rep.per_class.at(L("b")).precision == 1.0);
    CHECK(rep.per_class.at(L("b")).recall == 0.5);
    CHECK_THROWS_AS((void)f1_report(rows_of({ "q" }, { "a" }), abc()), DataError);
}

TEST_CASE("F1 matches the oracle on random fixtures, with and without the taxonomy flag")
{
    std::mt19937_64 rng(31);
    auto const& tax = taxonomies::weibo();
    for (int fixture = 0; fixture < 40; ++fixture)
    {
        auto const rows = random_rows(rng, tax, 5 + rng() % 60, 1);
        for (bool flag: { false, true })
        {
            auto const rep = f1_report(rows, tax, { flag });
            auto const o = oracle(rows, tax, flag);
            CHECK(rep.macro_f1 == doctest::Approx(o.macro).epsilon(1e-12));
            CHECK(rep.weighted_f1 == doctest::Approx(o.weighted).epsilon(1e-12));
            for (std::size_t k = 0; k < tax.size(); ++k)
                CHECK(rep.per_class.at(tax.labels()[k]).f1 == doctest::Approx(o.f1[k]).epsilon(1e-12));
            CHECK(accuracy(rows) == doctest::Approx(o.acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("report invariants on random fixtures")
{
    std::mt19937_64 rng(77);
    auto const& tax = taxonomies::highlight();
    for (int fixture = 0; fixture < 40; ++fixture)
    {
        auto rows = random_rows(rng, tax, 10 + rng() % 50, 6);
        auto const rep = f1_report(rows, tax);
        std::size_t total = 0, diag = 0;
        double lo = 2, hi = -1;
        for (std::size_t k = 0; k < tax.size(); ++k)
        {
            std::size_t rowSum = 0;
            for (auto c: rep.confusion[k])
                rowSum += c;
            auto const& s = rep.per_class.at(tax.labels()[k]);
            CHECK(rowSum == s.support);
            total += s.support;
            diag += rep.confusion[k][k];
            if (s.support > 0)
            {
                lo = std::min(lo, s.f1);
                hi = std::max(hi, s.f1);
            }
            for (double v: { s.precision, s.recall, s.f1 })
            {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
        CHECK(total == rows.size());
        CHECK(static_cast<double>(diag) / static_cast<double>(rows.size()) == doctest::Approx(accuracy(rows)));
        CHECK(rep.weighted_f1 >= lo - 1e-12);
        CHECK(rep.weighted_f1 <= hi + 1e-12);

        double prev = 0;
        for (std::size_t n = 1; n <= 6; ++n)
        {
            double const p = pass_at_n(rows, n);
            CHECK(p >= prev);
            prev = p;
        }
        CHECK(pass_at_n(rows, 4) >= pass_at_n(rows, 1));
        CHECK(pass_at_n(rows, 1) == accuracy(rows));

        auto const before = build_report(rows, tax, 4);
        std::shuffle(rows.begin(), rows.end(), rng);
        auto const after = build_report(rows, tax, 4);
        CHECK(to_json(before) == to_json(after));
        CHECK(*before.pass_at_n >= before.acc);
    }
}

TEST_CASE("pass at n")
{
    std::vector<EvalRow> rows { row("a", { "b", "c", "a", std::nullopt }), row("b", { "c", "c", "c", "c" }) };
    CHECK(pass_at_n(rows, 4) == 0.5);
    CHECK(pass_at_n(rows, 2) == 0.0);
    CHECK_THROWS_AS((void)pass_at_n(rows, 5), InsufficientSamples);
    CHECK_THROWS_AS((void)pass_at_n(rows, 0), InvalidArgument);
    CHECK_THROWS_AS((void)pass_at_n(std::vector<EvalRow> {}, 1), EmptyInput);
}

TEST_CASE("generalization gap")
{
    CHECK(gen_gap(0.8, 0.7) == doctest::Approx(0.1));
    CHECK(gen_gap_vis(0.1, 0.0, 0.2) == doctest::Approx(0.5));
    CHECK(gen_gap_vis(0.05, 0.05, 0.3) == 1.0);
    CHECK(gen_gap_vis(0.3, 0.05, 0.3) == 0.0);
    CHECK_THROWS_AS((void)gen_gap_vis(0.1, 0.2, 0.2), DegenerateRange);
}

TEST_CASE("head and tail classes")
{
    // supports: a 4, c 3, d 2, b 1
    Taxonomy const t("t", { "a", "b", "c", "d" });
    std::vector<EvalRow> rows;
    for (int i = 0; i < 4; ++i)
        rows.push_back(row("a", { i < 3 ? "a" : "b" }));
    rows.push_back(row("b", { "b" }));
    for (int i = 0; i < 3; ++i)
        rows.push_back(row("c", { i < 1 ? "c" : "a" }));
    rows.push_back(row("d", { "d" }));
    rows.push_back(row("d", { "a" }));

    auto const r = head_tail_report(rows, t, 1, 1);
    REQUIRE(r.head.size() == 1);
    REQUIRE(r.tail.size() == 1);
    CHECK(r.head[0].label == L("a"));
    CHECK(r.head[0].accuracy == 0.75);
    CHECK(r.tail[0].label == L("b"));
    CHECK(r.tail[0].accuracy == 1.0);

    auto const two = head_tail_report(rows, t, 2, 2);
    CHECK(two.head[0].label == L("a"));
    CHECK(two.head[1].label == L("c"));
    CHECK(two.tail[0].label == L("d"));
    CHECK(two.tail[1].label == L("b"));
    CHECK(two.tail[0].accuracy == 0.5);

    CHECK_THROWS_AS((void)head_tail_report(rows, t, 3, 2), InsufficientClasses);
}

TEST_CASE("head and tail ties follow taxonomy order")
{
    Taxonomy const t("t", { "w", "x", "y", "z" });
    std::vector<EvalRow> rows { row("z", { "z" }), row("y", { "y" }), row("x", { "x" }), row("w", { "w" }) };
    auto const r = head_tail_report(rows, t, 2, 2);
    CHECK(r.head[0].label == L("w"));
    CHECK(r.head[1].label == L("x"));
    CHECK(r.tail[0].label == L("y"));
    CHECK(r.tail[1].label == L("z"));
}

TEST_CASE("head and tail match a brute-force ranking")
{
    std::mt19937_64 rng(12);
    auto const& tax = taxonomies::mintrec();
    for (int fixture = 0; fixture < 20; ++fixture)
    {
        auto const rows = random_rows(rng, tax, 200, 1);
        std::vector<std::pair<std::size_t, std::size_t>> counts; // (support, index)
        for (std::size_t k = 0; k < tax.size(); ++k)
        {
            std::size_t const s = static_cast<std::size_t>(
                std::count_if(rows.begin(), rows.end(), [&](EvalRow const& r) { return r.gt == tax.labels()[k]; }));
            if (s > 0)
                counts.emplace_back(s, k);
        }
        if (counts.size() < 4)
            continue;
        std::sort(counts.begin(), counts.end(), [](auto const& a, auto const& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        auto const r = head_tail_report(rows, tax, 2, 2);
        CHECK(r.head[0].label == tax.labels()[counts[0].second]);
        CHECK(r.head[1].label == tax.labels()[counts[1].second]);
        CHECK(r.tail[0].label == tax.labels()[counts[counts.size() - 2].second]);
        CHECK(r.tail[1].label == tax.labels()[counts.back().second]);
    }
}

TEST_CASE("report serialization")
{
    std::vector<EvalRow> rows { row("a", { "a", "b" }), row("b", { "c", "b" }), row("c", { std::nullopt, "c" }) };
    auto rep = build_report(rows, abc(), 2);
    REQUIRE(rep.pass_at_n.has_value());
    CHECK(*rep.pass_at_n == 1.0);
    CHECK(rep.n == 2);
    CHECK(rep.rows == 3);

    auto const noPass = build_report(rows, abc(), 4);
    CHECK_FALSE(noPass.pass_at_n.has_value());

    auto const j = nlohmann::json::parse(to_json(rep));
    CHECK(j["acc"].get<double>() == doctest::Approx(1.0 / 3.0));
    CHECK(j["confusion"]["labels"].back() == "<no_match>");
    CHECK(j["confusion"]["matrix"][2][3] == 1);
    CHECK(j["per_class"].contains("a"));

    auto const csv = to_csv(rep);
    CHECK(csv.rfind("label,precision,recall,f1,support\n", 0) == 0);
    CHECK(csv.find("\nacc,") != std::string::npos);
    CHECK(csv.find("\npass_at_n,1,,,\n") != std::string::npos);
}
