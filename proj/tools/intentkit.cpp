// SPDX-License-Identifier: Apache-2.0
#include <intentkit/experiments.hpp>
#include <intentkit/history_library.hpp>
#include <intentkit/metrics.hpp>
#include <intentkit/run_config.hpp>
#include <intentkit/trajectory_gen.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace intentkit;
using json = nlohmann::ordered_json;

namespace
{

struct RunState
{
    std::string command;
    RunConfig config;
    std::vector<std::string> outputs;
    json extra = json::object();
    bool partial = false;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

fs::path out_path(RunState const& st, std::string const& name)
{
    return fs::path(st.config.output_dir) / name;
}

void write_file(RunState& st, std::string const& name, std::string const& content)
{
    auto const path = out_path(st, name);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write '" + path.string() + "'");
    out << content;
    if (!out)
        throw DataError("write to '" + path.string() + "' failed");
    st.outputs.push_back(path.string());
}

Taxonomy taxonomy_of(RunConfig const& c)
{
    return taxonomies::load(c.taxonomy);
}

RecordLoadReport dataset_of(RunConfig const& c, Taxonomy const& tax)
{
    if (c.dataset.empty())
        throw ConfigError("data.dataset is required (--dataset)");
    return load_records(c.dataset, tax);
}

void report_rejected(RunState& st, RecordLoadReport const& rep)
{
    if (rep.rejected.empty())
        return;
    auto& arr = st.extra["rejected_lines"] = json::array();
    for (auto const& [line, reason]: rep.rejected)
    {
        std::cerr << st.config.dataset << ":" << line << ": " << reason << "\n";
        arr.push_back({ { "line", line }, { "reason", reason } });
    }
}

/// data.library when set, else every train-split record that carries an explanation.
HistoryLibrary library_of(RunConfig const& c, Taxonomy const& tax, std::vector<IntentRecord> const& records)
{
    if (!c.library.empty())
        return HistoryLibrary::load(c.library, tax);
    HistoryLibrary lib(tax, c.embedder);
    for (auto const& r: records)
    {
        if (r.split == Split::Train && r.explanation)
            (void)lib.insert(r.context.user, r.gt_label, *r.explanation);
    }
    return lib;
}

std::vector<IntentRecord> split_records(std::vector<IntentRecord> const& records, Split split)
{
    std::vector<IntentRecord> out;
    for (auto const& r: records)
    {
        if (r.split == split)
            out.push_back(r);
    }
    return out;
}

void cmd_build_library(RunState& st)
{
    auto const& c = st.config;
    auto const tax = taxonomy_of(c);
    auto const data = dataset_of(c, tax);
    report_rejected(st, data);

    std::optional<BackendFactory> factory;
    if (c.backend.kind != BackendKind::None)
        factory = make_backend_factory(c.backend, tax);

    HistoryLibrary lib(tax, c.embedder);
    HistoryLibrary empty(tax, c.embedder);
    auto& missing = st.extra["missing_explanation_lines"] = json::array();
    std::size_t session = 0;
    for (std::size_t i = 0; i < data.records.size(); ++i)
    {
        auto const& r = data.records[i];
        if (r.split != Split::Train)
            continue;
        auto explanation = r.explanation;
        if (!explanation && factory)
        {
            auto backend = (*factory)(session++);
            AgentConfig cfg = c.agent;
            cfg.mode = StrategyMode::ForcedNoRetrieval;
            auto const outcome = run_inference(r.context, tax, empty, *backend, cfg);
            if (outcome.predicted == r.gt_label && outcome.trajectory.final_explanation)
                explanation = outcome.trajectory.final_explanation;
        }
        if (!explanation)
        {
            std::cerr << c.dataset << ":" << data.lines[i] << ": record has no explanation\n";
            missing.push_back(data.lines[i]);
            continue;
        }
        (void)lib.insert(r.context.user, r.gt_label, *explanation);
    }
    st.partial = !data.rejected.empty() || !missing.empty();

    auto const entries = lib.entries();
    std::set<UserId> users;
    std::set<IntentLabel> labels;
    for (auto const& e: entries)
    {
        users.insert(e.user);
        labels.insert(e.label);
    }
    write_file(st, "library.jsonl", lib.serialize());
    st.extra["summary"] = { { "entries", entries.size() }, { "users", users.size() }, { "labels", labels.size() } };
    std::cout << "entries=" << entries.size() << " users=" << users.size() << " labels=" << labels.size() << "\n";
}

void cmd_gen_trajectories(RunState& st)
{
    auto const& c = st.config;
    auto const tax = taxonomy_of(c);
    auto const data = dataset_of(c, tax);
    report_rejected(st, data);
    auto const lib = library_of(c, tax, data.records);
    auto const factory = make_backend_factory(c.backend, tax);
    auto const train = split_records(data.records, Split::Train);
    if (train.empty())
        throw DataError("dataset has no train records");

    std::vector<std::optional<GenOutcome>> generated(train.size());
    std::vector<std::string> failures(train.size());
    parallel_for(train.size(), c.effective_jobs(), [&](std::size_t i) {
        try
        {
            auto teacher = factory(i);
            generated[i] = generate_trajectory(train[i], tax, lib, *teacher, c.generation);
        }
        catch (BackendError const& e)
        {
            failures[i] = e.what();
        }
    });
    std::vector<GenOutcome> outcomes;
    json skipped = json::array();
    for (std::size_t i = 0; i < train.size(); ++i)
    {
        if (generated[i])
            outcomes.push_back(std::move(*generated[i]));
        else
            skipped.push_back({ { "record", i }, { "reason", failures[i] } });
    }
    if (outcomes.empty())
        throw BackendError("every record failed: " + failures.front());

    std::map<std::string, std::size_t> byStatus;
    std::size_t violations = 0;
    std::size_t steered = 0;
    std::size_t appended = 0;
    for (auto const& o: outcomes)
    {
        ++byStatus[std::string(to_string(o.status))];
        violations += leakage_audit(o.trajectory, o.gt, c.generation).size();
        for (auto const& ev: o.retrievals)
        {
            steered += ev.steered ? 1 : 0;
            appended += ev.gt_appended ? 1 : 0;
        }
    }
    auto const path = out_path(st, "sft.jsonl");
    auto const exp = export_sft_dataset(outcomes, path.string());
    st.outputs.push_back(path.string());

    json report;
    report["records"] = train.size();
    report["status_counts"] = byStatus;
    report["leakage_violations"] = violations;
    report["steered_retrievals"] = steered;
    report["gt_appended_retrievals"] = appended;
    report["exported"] = exp.written;
    report["skipped"] = skipped;
    report["export_rejected"] = json::array();
    for (auto const& [idx, reason]: exp.rejected)
        report["export_rejected"].push_back({ { "index", idx }, { "reason", reason } });
    write_file(st, "generation.json", report.dump(2) + "\n");
    st.partial = !data.rejected.empty() || !skipped.empty();
}

json prediction_json(Prediction const& p)
{
    return p ? json(p->name) : json(nullptr);
}

void cmd_evaluate(RunState& st)
{
    auto const& c = st.config;
    auto const tax = taxonomy_of(c);
    auto const data = dataset_of(c, tax);
    report_rejected(st, data);
    auto const lib = library_of(c, tax, data.records);
    auto const factory = make_backend_factory(c.backend, tax);

    auto test = split_records(data.records, Split::Test);
    if (test.empty())
        test = data.records;
    if (test.empty())
        throw DataError("dataset has no records to evaluate");

    auto const eval = evaluate_records(test, lib, factory, c.agent, c.samples, c.sample_temperature, c.effective_jobs());
    auto report = build_report(eval.rows, tax, c.samples > 1 ? c.samples : 0, { c.macro_over_taxonomy });

    if (c.gen_gap)
    {
        auto const train = split_records(data.records, Split::Train);
        if (train.empty())
            throw DataError("experiment.gen_gap needs train records");
        auto const trainEval = evaluate_records(train, lib, factory, c.agent, 1, 0.0, c.effective_jobs());
        report.gen_gap = gen_gap(accuracy(trainEval.rows), report.acc);
        if (c.gap_min)
            report.gen_gap_vis = gen_gap_vis(*report.gen_gap, *c.gap_min, *c.gap_max);
    }

    std::string preds;
    for (std::size_t i = 0; i < eval.rows.size(); ++i)
    {
        json row;
        row["index"] = i;
        row["user"] = test[i].context.user.str();
        row["gt"] = eval.rows[i].gt.name;
        row["preds"] = json::array();
        for (auto const& p: eval.rows[i].preds)
            row["preds"].push_back(prediction_json(p));
        row["tool_called"] = static_cast<bool>(eval.tool_called[i]);
        preds += row.dump() + "\n";
    }
    write_file(st, "predictions.jsonl", preds);
    write_file(st, "metrics.json", to_json(report) + "\n");
    write_file(st, "metrics.csv", to_csv(report));
    st.extra["tc_percent"] = tool_call_percent(eval);
    st.partial = !data.rejected.empty();
    std::cout << "acc=" << report.acc << " macro_f1=" << report.macro_f1 << " weighted_f1=" << report.weighted_f1 << "\n";
}

void cmd_simulate_accumulation(RunState& st)
{
    auto const& c = st.config;
    auto const tax = taxonomy_of(c);
    auto const data = dataset_of(c, tax);
    report_rejected(st, data);

    std::string user = c.user;
    if (user.empty())
    {
        std::map<UserId, std::size_t> counts;
        for (auto const& r: data.records)
            ++counts[r.context.user];
        if (counts.empty())
            throw DataError("dataset is empty");
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it)
        {
            if (it->second > best->second)
                best = it;
        }
        user = best->first.str();
    }
    AccumulationPlan plan;
    for (auto const& r: data.records)
    {
        if (r.context.user.str() == user)
            plan.records.push_back(r);
    }
    if (plan.records.empty())
        throw DataError("no records for user '" + user + "'");
    plan.ordering = c.ordering;
    plan.checkpoints = default_checkpoints(plan.records.size(), c.checkpoint_every);

    auto const factory = make_backend_factory(c.backend, tax);
    auto backend = factory(0);
    HistoryLibrary lib(tax, c.embedder);
    auto const res = run_accumulation(plan, c.agent, *backend, lib);
    write_file(st, "accumulation.csv", accumulation_csv(res.curve));
    st.extra["user"] = user;
    st.extra["samples"] = res.ordered.size();
    st.extra["final_cumulative_accuracy"] = res.curve.back().cumulative_accuracy;
    st.partial = !data.rejected.empty();
}

void cmd_simulate_policy(RunState& st)
{
    auto const& c = st.config;
    auto const res = train(c.world(), c.train_config());
    write_file(st, "policy_curve.csv", curve_csv(res.curve));
    json fin;
    fin["ablation"] = std::string(to_string(c.ablation));
    fin["steps"] = c.policy.steps;
    fin["p_retrieve_easy"] = res.policy.p_retrieve(Difficulty::Easy);
    fin["p_retrieve_hard"] = res.policy.p_retrieve(Difficulty::Hard);
    fin["logits"] = { { "easy", res.policy.logits[0] }, { "hard", res.policy.logits[1] } };
    write_file(st, "policy_final.json", fin.dump(2) + "\n");
    std::cout << "p_retrieve_easy=" << fin["p_retrieve_easy"].get<double>()
              << " p_retrieve_hard=" << fin["p_retrieve_hard"].get<double>() << "\n";
}

void cmd_discriminability(RunState& st)
{
    auto const& c = st.config;
    auto const tax = taxonomy_of(c);
    std::vector<HistoryEntry> corpus;
    if (!c.library.empty())
    {
        corpus = HistoryLibrary::load(c.library, tax).entries();
    }
    else
    {
        auto const data = dataset_of(c, tax);
        report_rejected(st, data);
        HistoryLibrary lib(tax, c.embedder);
        for (auto const& r: data.records)
        {
            if (r.explanation)
                (void)lib.insert(r.context.user, r.gt_label, *r.explanation);
        }
        corpus = lib.entries();
        st.partial = !data.rejected.empty();
    }
    auto const rep = discriminability_report(corpus);
    json j;
    j["entries"] = corpus.size();
    j["intra_sim"] = rep.intra_sim;
    j["inter_sim"] = rep.inter_sim;
    j["user_loo_acc"] = rep.user_loo_acc;
    j["global_r1"] = rep.global_r1;
    j["qualifying_users"] = rep.qualifying_users;
    j["qualifying_samples"] = rep.qualifying_samples;
    if (c.shuffles > 0)
    {
        std::vector<double> accs;
        for (std::size_t s = 0; s < c.shuffles; ++s)
            accs.push_back(discriminability_report(shuffle_labels_within_users(corpus, splitmix64(c.seed + s))).user_loo_acc);
        double mean = 0.0;
        for (double a: accs)
            mean += a;
        mean /= static_cast<double>(accs.size());
        double var = 0.0;
        for (double a: accs)
            var += (a - mean) * (a - mean);
        j["shuffled"] = { { "shuffles", c.shuffles },
                          { "user_loo_acc_mean", mean },
                          { "user_loo_acc_std", std::sqrt(var / static_cast<double>(accs.size())) },
                          { "chance", user_loo_chance(corpus) } };
    }
    write_file(st, "discriminability.json", j.dump(2) + "\n");
}

void cmd_strategy_grid(RunState& st)
{
    auto const& c = st.config;
    auto const tax = taxonomy_of(c);
    auto const data = dataset_of(c, tax);
    report_rejected(st, data);
    auto const lib = library_of(c, tax, data.records);
    auto const factory = make_backend_factory(c.backend, tax);
    auto evalSet = split_records(data.records, Split::Test);
    if (evalSet.empty())
        evalSet = data.records;

    auto const res = run_strategy_grid(c.grid, evalSet, lib, factory, c.agent, c.world(), c.train_config(),
                                       c.effective_jobs());
    write_file(st, "grid.csv", grid_csv(res));
    write_file(st, "grid_policy.csv", grid_policy_csv(res));
    st.partial = !data.rejected.empty();
}

struct Failure
{
    int exit_code = 1;
    std::string type;
    std::string kind;
    std::string message;
    std::optional<int> http_status;
};

Failure classify(std::exception_ptr ep)
{
    Failure f;
    try
    {
        std::rethrow_exception(ep);
    }
    catch (InferenceFailed const& e)
    {
        if (e.cause)
            return classify(e.cause);
        f = { 4, "InferenceFailed", "backend", e.what(), {} };
    }
    catch (RemoteUnavailable const& e)
    {
        f = { 4, "RemoteUnavailable", "backend", e.what(), e.status };
    }
    catch (Timeout const& e)
    {
        f = { 4, "Timeout", "backend", e.what(), {} };
    }
    catch (ScriptExhausted const& e)
    {
        f = { 4, "ScriptExhausted", "backend", e.what(), {} };
    }
    catch (Error const& e)
    {
        switch (e.kind())
        {
            case ErrorKind::Config: f = { 2, "ConfigError", "config", e.what(), {} }; break;
            case ErrorKind::Data: f = { 3, "DataError", "data", e.what(), {} }; break;
            case ErrorKind::Backend: f = { 4, "BackendError", "backend", e.what(), {} }; break;
            case ErrorKind::Logic: f = { 2, "InvalidArgument", "config", e.what(), {} }; break;
        }
    }
    catch (std::exception const& e)
    {
        f = { 1, "InternalError", "internal", e.what(), {} };
    }
    return f;
}

void write_manifest(RunState const& st, std::optional<Failure> const& failure)
{
    json m;
    m["command"] = st.command;
    m["version"] = INTENTKIT_VERSION;
    m["config_hash"] = st.config.hash();
    m["seed"] = st.config.seed;
    m["status"] = failure ? "error" : "ok";
    if (failure)
    {
        json err = { { "type", failure->type }, { "kind", failure->kind }, { "message", failure->message } };
        if (failure->http_status)
            err["http_status"] = *failure->http_status;
        m["error"] = err;
    }
    else
    {
        m["error"] = nullptr;
    }
    m["outputs"] = st.outputs;
    m["partial"] = st.partial || (failure && !st.outputs.empty());
    for (auto const& [k, v]: st.extra.items())
        m[k] = v;
    json cfg = json::object();
    for (auto const& key: RunConfig::keys())
        cfg[key] = st.config.get(key);
    m["config"] = cfg;
    auto const ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - st.started).count();
    m["timings_ms"] = { { "total", ms } };

    std::error_code ec;
    fs::create_directories(st.config.output_dir, ec);
    std::ofstream out(fs::path(st.config.output_dir) / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Retrieval-conditioned intent inference toolkit" };
    app.set_version_flag("--version", std::string(INTENTKIT_VERSION));
    app.require_subcommand(1);
    app.fallthrough();

    std::string configFile;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> outDir;
    std::optional<unsigned> jobs;
    std::optional<std::string> dataset;
    std::optional<std::string> taxonomy;
    std::optional<std::string> library;
    std::optional<std::string> backend;
    std::optional<std::string> script;
    bool macroOverTaxonomy = false;

    app.add_option("-c,--config", configFile, "Sectioned key=value config file")->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "Override a key: section.key=value (repeatable)");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("-o,--out", outDir, "Output directory");
    app.add_option("-j,--jobs", jobs, "Worker threads (0 = logical cores)");
    app.add_option("--dataset", dataset, "IntentRecord JSONL");
    app.add_option("--taxonomy", taxonomy, "mintrec | weibo | highlight | label file");
    app.add_option("--library", library, "Existing history library file");
    app.add_option("--backend", backend, "none | scripted | history_echo | remote");
    app.add_option("--script", script, "Scripted backend sessions (JSONL)");
    app.add_flag("--macro-over-taxonomy", macroOverTaxonomy, "Macro-F1 over every taxonomy class");

    using Handler = void (*)(RunState&);
    std::vector<std::pair<CLI::App*, Handler>> commands {
        { app.add_subcommand("build-library", "Embed explanations into a history library"), cmd_build_library },
        { app.add_subcommand("gen-trajectories", "Generate supervised trajectories with a teacher"), cmd_gen_trajectories },
        { app.add_subcommand("evaluate", "Run inference and compute metrics"), cmd_evaluate },
        { app.add_subcommand("simulate-accumulation", "Progressive history accumulation for one user"),
          cmd_simulate_accumulation },
        { app.add_subcommand("simulate-policy", "Train the tabular policy on the synthetic world"), cmd_simulate_policy },
        { app.add_subcommand("discriminability", "Explanation separability statistics"), cmd_discriminability },
        { app.add_subcommand("strategy-grid", "Retrieval strategy and reward ablation grid"), cmd_strategy_grid },
    };

    RunState st;
    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        if (app.exit(e) == 0)
            return 0;
        if (outDir)
            st.config.output_dir = *outDir;
        write_manifest(st, Failure { 2, "ConfigError", "config", e.what(), {} });
        return 2;
    }

    Handler handler = nullptr;
    for (auto const& [sub, h]: commands)
    {
        if (sub->parsed())
        {
            st.command = sub->get_name();
            handler = h;
        }
    }

    std::optional<Failure> failure;
    try
    {
        if (!configFile.empty())
            st.config.apply_ini_file(configFile);
        st.config.apply_process_env();
        if (seed)
            st.config.seed = *seed;
        if (outDir)
            st.config.output_dir = *outDir;
        if (jobs)
            st.config.jobs = *jobs;
        if (dataset)
            st.config.dataset = *dataset;
        if (taxonomy)
            st.config.taxonomy = *taxonomy;
        if (library)
            st.config.library = *library;
        if (backend)
            st.config.set("backend.kind", *backend);
        if (script)
            st.config.backend.script = *script;
        if (macroOverTaxonomy)
            st.config.macro_over_taxonomy = true;
        for (auto const& o: overrides)
        {
            auto const eq = o.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects section.key=value, got '" + o + "'");
            st.config.set(o.substr(0, eq), o.substr(eq + 1));
        }
        st.config.validate();
        fs::create_directories(st.config.output_dir);
        handler(st);
    }
    catch (...)
    {
        failure = classify(std::current_exception());
        std::cerr << "error: " << failure->message << "\n";
    }
    try
    {
        write_manifest(st, failure);
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: cannot write manifest: " << e.what() << "\n";
        return failure ? failure->exit_code : 3;
    }
    return failure ? failure->exit_code : 0;
}
