// SPDX-License-Identifier: Apache-2.0
#include <intentkit/experiments.hpp>
#include <intentkit/history_library.hpp>
#include <intentkit/metrics.hpp>
#include <intentkit/policy_sim.hpp>
#include <intentkit/reward_engine.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace intentkit;

namespace
{

Prediction prediction_of(Taxonomy const& tax, std::optional<std::string> const& raw)
{
    return raw ? tax.canonicalize(*raw) : std::nullopt;
}

std::optional<std::string> label_or_none(Prediction const& p)
{
    return p ? std::optional<std::string>(p->name) : std::nullopt;
}

py::dict hit_dict(RetrievedEntry const& h)
{
    py::dict d;
    d["user"] = h.entry.user.str();
    d["label"] = h.entry.label.name;
    d["explanation"] = h.entry.explanation.text;
    d["similarity"] = h.similarity;
    d["seq"] = h.entry.seq;
    return d;
}

std::vector<EvalRow> rows_of(Taxonomy const& tax, std::vector<std::string> const& gt,
                             std::vector<std::vector<std::optional<std::string>>> const& preds)
{
    if (gt.size() != preds.size())
        throw InvalidArgument("gt and preds must have the same length");
    std::vector<EvalRow> rows;
    for (std::size_t i = 0; i < gt.size(); ++i)
    {
        if (preds[i].empty())
            throw InvalidArgument("row " + std::to_string(i) + " has no prediction");
        EvalRow r { tax.require(gt[i]), {} };
        for (auto const& p: preds[i])
            r.preds.push_back(prediction_of(tax, p));
        rows.push_back(std::move(r));
    }
    return rows;
}

RewardConfig reward_config(py::dict const& overrides)
{
    RewardConfig c;
    for (auto const& [k, v]: overrides)
    {
        auto const key = py::cast<std::string>(k);
        double const x = py::cast<double>(v);
        if (key == "r_d")
            c.r_d = x;
        else if (key == "r_f")
            c.r_f = x;
        else if (key == "r_s")
            c.r_s = x;
        else if (key == "r_e")
            c.r_e = x;
        else if (key == "r_format")
            c.r_format = x;
        else if (key == "easy_threshold")
            c.easy_threshold = x;
        else if (key == "clip_eps")
            c.clip_eps = x;
        else if (key == "kl_beta")
            c.kl_beta = x;
        else
            throw ConfigError("unknown reward key '" + key + "'");
    }
    c.validate();
    return c;
}

RolloutRecord rollout_of(Taxonomy const& tax, std::optional<std::string> const& predicted, std::string const& gt,
                         bool tool_called, std::optional<std::vector<std::string>> const& options)
{
    RolloutRecord r;
    r.gt = tax.require(gt);
    r.predicted = prediction_of(tax, predicted);
    r.tool_called = tool_called;
    r.format_ok = r.predicted.has_value();
    if (options)
        r.options_emitted = canonical_options(*options, tax);
    return r;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "intentkit core bindings";
    m.attr("__version__") = INTENTKIT_VERSION;

    auto base = py::register_exception<Error>(m, "IntentkitError");
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<DataError>(m, "DataError", base);
    py::register_exception<BackendError>(m, "BackendError", base);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base);

    py::class_<Taxonomy>(m, "Taxonomy")
        .def(py::init<std::string, std::vector<std::string> const&>(), py::arg("name"), py::arg("labels"))
        .def_static("load", &taxonomies::load, py::arg("name_or_path"))
        .def_property_readonly("name", &Taxonomy::name)
        .def_property_readonly("labels",
                               [](Taxonomy const& t) {
                                   std::vector<std::string> out;
                                   for (auto const& l: t.labels())
                                       out.push_back(l.name);
                                   return out;
                               })
        .def("canonicalize", [](Taxonomy const& t, std::string const& raw) { return label_or_none(t.canonicalize(raw)); })
        .def("__len__", &Taxonomy::size)
        .def("__repr__", [](Taxonomy const& t) { return "<Taxonomy " + t.name() + " (" + std::to_string(t.size()) + ")>"; });

    m.def("canonical_form", &canonical_form, py::arg("raw"));

    m.def(
        "embed",
        [](std::string const& text, std::size_t dim) {
            EmbedderSpec spec;
            spec.dim = dim;
            return embed(text, spec).values;
        },
        py::arg("text"), py::arg("dim") = 256, "Hashed bag-of-words embedding.");
    m.def(
        "cosine", [](std::vector<double> a, std::vector<double> b) { return cosine({ std::move(a) }, { std::move(b) }); },
        py::arg("a"), py::arg("b"));

    py::class_<HistoryLibrary>(m, "HistoryLibrary")
        .def(py::init([](Taxonomy const& tax, std::size_t dim) {
                 EmbedderSpec spec;
                 spec.dim = dim;
                 return HistoryLibrary(tax, spec);
             }),
             py::arg("taxonomy"), py::arg("dim") = 256)
        .def(
            "insert",
            [](HistoryLibrary& lib, std::string const& user, std::string const& label, std::string const& explanation) {
                auto const e = lib.insert(UserId(user), lib.taxonomy().require(label),
                                          { explanation, ExplanationKind::Generic });
                return e.seq;
            },
            py::arg("user"), py::arg("label"), py::arg("explanation"))
        .def(
            "retrieve",
            [](HistoryLibrary const& lib, std::string const& user, std::vector<std::string> const& options,
               std::string const& query, std::size_t k) {
                auto const res = lib.retrieve(UserId(user), canonical_options(options, lib.taxonomy()), query, k);
                py::list out;
                for (auto const& h: res.entries)
                    out.append(hit_dict(h));
                return out;
            },
            py::arg("user"), py::arg("options"), py::arg("query"), py::arg("k") = 3)
        .def("discriminability",
             [](HistoryLibrary const& lib) {
                 auto const r = discriminability_report(lib.entries());
                 py::dict d;
                 d["intra_sim"] = r.intra_sim;
                 d["inter_sim"] = r.inter_sim;
                 d["user_loo_acc"] = r.user_loo_acc;
                 d["global_r1"] = r.global_r1;
                 d["chance"] = user_loo_chance(lib.entries());
                 return d;
             })
        .def("serialize", &HistoryLibrary::serialize)
        .def("save", &HistoryLibrary::save, py::arg("path"))
        .def_static(
            "load", [](std::string const& path, Taxonomy const& tax) { return HistoryLibrary::load(path, tax); },
            py::arg("path"), py::arg("taxonomy"))
        .def("__len__", &HistoryLibrary::size);

    m.def(
        "parse_output",
        [](std::string const& text) {
            auto const p = parse_output(text);
            py::dict d;
            d["kind"] = p.is_tool_call() ? "tool_call" : p.is_answer() ? "answer" : "malformed";
            d["options"] = p.options;
            d["label"] = p.label_raw;
            d["explanation"] = p.explanation;
            return d;
        },
        py::arg("text"));

    m.def(
        "tool_reward",
        [](Taxonomy const& tax, std::optional<std::string> const& predicted, std::string const& gt, bool tool_called,
           std::optional<std::vector<std::string>> const& options, double alpha, py::dict const& config) {
            auto const r = tool_reward(rollout_of(tax, predicted, gt, tool_called, options), alpha, reward_config(config));
            return py::make_tuple(r.value, std::string(to_string(r.branch)));
        },
        py::arg("taxonomy"), py::arg("predicted"), py::arg("gt"), py::arg("tool_called"), py::arg("options"),
        py::arg("alpha"), py::arg("config") = py::dict());
    m.def(
        "total_reward",
        [](Taxonomy const& tax, std::optional<std::string> const& predicted, std::string const& gt, bool tool_called,
           std::optional<std::vector<std::string>> const& options, double alpha, py::dict const& config) {
            auto const r = total_reward(rollout_of(tax, predicted, gt, tool_called, options), alpha, reward_config(config));
            py::dict d;
            d["format"] = r.format;
            d["accuracy"] = r.accuracy;
            d["tool"] = r.tool;
            d["total"] = r.total;
            d["branch"] = std::string(to_string(r.branch));
            return d;
        },
        py::arg("taxonomy"), py::arg("predicted"), py::arg("gt"), py::arg("tool_called"), py::arg("options"),
        py::arg("alpha"), py::arg("config") = py::dict());
    m.def(
        "group_advantages", [](std::vector<double> const& r) { return group_advantages(r); }, py::arg("rewards"));
    m.def(
        "grpo_surrogate",
        [](std::vector<double> const& lnew, std::vector<double> const& lold, double adv, std::vector<double> const& kl,
           double clip_eps, double kl_beta) {
            RewardConfig c;
            c.clip_eps = clip_eps;
            c.kl_beta = kl_beta;
            return grpo_surrogate(lnew, lold, adv, kl, c);
        },
        py::arg("logp_new"), py::arg("logp_old"), py::arg("advantage"), py::arg("kl") = std::vector<double> {},
        py::arg("clip_eps") = 0.2, py::arg("kl_beta") = 0.0);

    m.def(
        "train_policy",
        [](std::uint64_t seed, int steps, std::size_t group_size, double lr, std::string const& ablation) {
            TrainConfig cfg;
            cfg.steps = steps;
            cfg.G = group_size;
            cfg.lr = lr;
            cfg.reward = RewardConfig {}.ablated(reward_ablation_from_string(ablation));
            auto const res = train(SyntheticWorld::make_default(seed), cfg);
            py::list curve;
            for (auto const& p: res.curve)
            {
                py::dict d;
                d["step"] = p.step;
                d["p_retrieve_easy"] = p.p_retrieve_easy;
                d["p_retrieve_hard"] = p.p_retrieve_hard;
                d["mean_reward"] = p.mean_reward;
                d["mean_alpha"] = p.mean_alpha;
                d["tool_miss_rate"] = p.tool_miss_rate;
                curve.append(d);
            }
            py::dict out;
            out["p_retrieve_easy"] = res.policy.p_retrieve(Difficulty::Easy);
            out["p_retrieve_hard"] = res.policy.p_retrieve(Difficulty::Hard);
            out["curve"] = curve;
            return out;
        },
        py::arg("seed") = 7, py::arg("steps") = 2000, py::arg("group_size") = 8, py::arg("lr") = 0.1,
        py::arg("ablation") = "full");

    m.def(
        "metrics",
        [](Taxonomy const& tax, std::vector<std::string> const& gt,
           std::vector<std::vector<std::optional<std::string>>> const& preds, std::size_t n, bool macro_over_taxonomy) {
            auto const rows = rows_of(tax, gt, preds);
            auto const rep = build_report(rows, tax, n, { macro_over_taxonomy });
            py::dict d;
            d["acc"] = rep.acc;
            d["macro_f1"] = rep.macro_f1;
            d["weighted_f1"] = rep.weighted_f1;
            d["pass_at_n"] = rep.pass_at_n;
            d["confusion"] = rep.confusion;
            return d;
        },
        py::arg("taxonomy"), py::arg("gt"), py::arg("preds"), py::arg("n") = 0, py::arg("macro_over_taxonomy") = false);
    m.def("gen_gap_vis", &gen_gap_vis, py::arg("gap"), py::arg("g_min"), py::arg("g_max"));
}
