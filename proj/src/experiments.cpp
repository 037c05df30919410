// SPDX-License-Identifier: Apache-2.0
#include <intentkit/experiments.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

namespace intentkit
{

void parallel_for(std::size_t n, unsigned jobs, std::function<void(std::size_t)> const& fn)
{
    if (jobs <= 1 || n <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next { 0 };
    std::atomic<bool> stop { false };
    std::exception_ptr first;
    std::mutex errMutex;
    auto worker = [&] {
        while (!stop.load())
        {
            auto const i = next.fetch_add(1);
            if (i >= n)
                return;
            try
            {
                fn(i);
            }
            catch (...)
            {
                std::lock_guard lock(errMutex);
                if (!first)
                    first = std::current_exception();
                stop = true;
            }
        }
    };
    std::vector<std::thread> threads;
    auto const count = std::min<std::size_t>(jobs, n);
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t)
        threads.emplace_back(worker);
    for (auto& t: threads)
        t.join();
    if (first)
        std::rethrow_exception(first);
}

unsigned default_jobs()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string_view to_string(Ordering o)
{
    return o == Ordering::AsGiven ? "as_given" : "round_robin_by_freq_desc";
}

Ordering ordering_from_string(std::string_view s)
{
    if (s == "as_given")
        return Ordering::AsGiven;
    if (s == "round_robin_by_freq_desc" || s == "round_robin")
        return Ordering::RoundRobinByFreqDesc;
    throw ConfigError("unknown ordering '" + std::string(s) + "'");
}

std::vector<IntentRecord> round_robin_order(std::span<IntentRecord const> records, Taxonomy const& taxonomy)
{
    std::map<std::size_t, std::vector<IntentRecord const*>> byIndex;
    for (auto const& r: records)
        byIndex[taxonomy.index_of(r.gt_label)].push_back(&r);

    std::vector<std::vector<IntentRecord const*>*> groups;
    for (auto& [idx, g]: byIndex)
        groups.push_back(&g);
    std::stable_sort(groups.begin(), groups.end(), [](auto const* a, auto const* b) { return a->size() > b->size(); });

    std::vector<IntentRecord> out;
    out.reserve(records.size());
    for (std::size_t round = 0; out.size() < records.size(); ++round)
    {
        for (auto const* g: groups)
        {
            if (round < g->size())
                out.push_back(*(*g)[round]);
        }
    }
    return out;
}

std::vector<std::size_t> default_checkpoints(std::size_t total, std::size_t every)
{
    if (every == 0)
        throw InvalidArgument("checkpoint spacing must be >= 1");
    std::vector<std::size_t> out;
    for (std::size_t c = every; c < total; c += every)
        out.push_back(c);
    if (total > 0)
        out.push_back(total);
    return out;
}

AccumulationResult run_accumulation(AccumulationPlan const& plan, AgentConfig const& agent, ChatBackend& backend,
                                    HistoryLibrary& lib)
{
    agent.validate();
    if (plan.records.empty())
        throw InvalidArgument("accumulation plan has no records");
    auto const& user = plan.records.front().context.user;
    for (auto const& r: plan.records)
    {
        if (r.context.user != user)
            throw InvalidArgument("accumulation plan mixes users");
    }
    auto const& taxonomy = lib.taxonomy();

    AccumulationResult res;
    res.ordered = plan.ordering == Ordering::AsGiven ? plan.records : round_robin_order(plan.records, taxonomy);
    auto checkpoints = plan.checkpoints.empty() ? default_checkpoints(res.ordered.size()) : plan.checkpoints;
    std::sort(checkpoints.begin(), checkpoints.end());
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
    if (checkpoints.front() == 0 || checkpoints.back() > res.ordered.size())
        throw InvalidArgument("checkpoints must lie in [1, number of records]");

    std::size_t correct = 0;
    std::size_t errors = 0;
    std::size_t windowStart = 0;
    std::size_t windowCorrect = 0;
    auto nextCheckpoint = checkpoints.begin();

    for (std::size_t i = 0; i < res.ordered.size(); ++i)
    {
        auto const& rec = res.ordered[i];
        bool ok = false;
        bool failed = false;
        std::optional<IntentExplanation> emitted;
        try
        {
            auto const outcome = run_inference(rec.context, taxonomy, lib, backend, agent);
            ok = outcome.predicted && *outcome.predicted == rec.gt_label;
            emitted = outcome.trajectory.final_explanation;
        }
        catch (BackendError const&)
        {
            failed = true;
            ++errors;
        }
        res.correct.push_back(ok);
        res.failed.push_back(failed);
        correct += ok ? 1 : 0;
        windowCorrect += ok ? 1 : 0;

        auto explanation = emitted ? *emitted : templated_explanation(rec.gt_label, rec.context);
        (void)lib.insert(rec.context.user, rec.gt_label, std::move(explanation));

        auto const n = i + 1;
        if (nextCheckpoint != checkpoints.end() && *nextCheckpoint == n)
        {
            res.curve.push_back({ n, static_cast<double>(correct) / static_cast<double>(n), errors,
                                  static_cast<double>(windowCorrect) / static_cast<double>(n - windowStart) });
            windowStart = n;
            windowCorrect = 0;
            ++nextCheckpoint;
        }
    }
    return res;
}

std::string accumulation_csv(std::vector<AccumulationPoint> const& curve)
{
    std::string out = "n_history,cumulative_accuracy,errors,window_accuracy\n";
    char buf[160];
    for (auto const& p: curve)
    {
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%zu,%.10g\n", p.n_history, p.cumulative_accuracy, p.errors,
                      p.window_accuracy);
        out += buf;
    }
    return out;
}

EvalResult evaluate_records(std::span<IntentRecord const> records, HistoryLibrary const& lib,
                            BackendFactory const& factory, AgentConfig const& agent, std::size_t n_samples,
                            double sample_temperature, unsigned jobs)
{
    agent.validate();
    if (records.empty())
        throw EmptyInput();
    if (n_samples == 0)
        throw InvalidArgument("n_samples must be >= 1");

    EvalResult res;
    res.rows.resize(records.size());
    std::vector<char> tool(records.size(), 0);
    std::vector<char> answered(records.size(), 0);
    parallel_for(records.size(), jobs, [&](std::size_t i) {
        auto const& rec = records[i];
        auto& row = res.rows[i];
        row.gt = rec.gt_label;
        for (std::size_t j = 0; j < n_samples; ++j)
        {
            auto cfg = agent;
            if (j > 0)
                cfg.temperature = sample_temperature;
            auto backend = factory(i * n_samples + j);
            auto const outcome = run_inference(rec.context, lib.taxonomy(), lib, *backend, cfg);
            row.preds.push_back(outcome.predicted);
            if (j == 0)
            {
                tool[i] = outcome.tool_called;
                answered[i] = outcome.format_ok;
            }
        }
    });
    res.tool_called.assign(tool.begin(), tool.end());
    res.answered.assign(answered.begin(), answered.end());
    return res;
}

double tool_call_percent(EvalResult const& result)
{
    if (result.tool_called.empty())
        return 0.0;
    auto const n = std::count(result.tool_called.begin(), result.tool_called.end(), true);
    return 100.0 * static_cast<double>(n) / static_cast<double>(result.tool_called.size());
}

void StrategyGrid::validate() const
{
    if (modes.empty())
        throw ConfigError("strategy grid needs at least one mode");
    if (k_values.empty())
        throw ConfigError("strategy grid needs at least one k");
    if (std::find(k_values.begin(), k_values.end(), 0) != k_values.end())
        throw ConfigError("k values must be >= 1");
}

GridResult run_strategy_grid(StrategyGrid const& grid, std::span<IntentRecord const> eval_set, HistoryLibrary const& lib,
                             BackendFactory const& factory, AgentConfig const& base, SyntheticWorld const& world,
                             TrainConfig const& train_cfg, unsigned jobs)
{
    grid.validate();
    if (eval_set.empty())
        throw EmptyInput();

    GridResult out;
    for (auto mode: grid.modes)
    {
        for (auto k: grid.k_values)
        {
            GridCell c;
            c.mode = mode;
            c.k = k;
            out.cells.push_back(std::move(c));
        }
    }
    for (auto a: grid.reward_ablations)
        out.policy.push_back({ a });

    auto const nCells = out.cells.size();
    parallel_for(nCells + out.policy.size(), jobs, [&](std::size_t idx) {
        if (idx < nCells)
        {
            auto& cell = out.cells[idx];
            auto cfg = base;
            cfg.mode = cell.mode;
            cfg.k = cell.k;
            cell.eval = evaluate_records(eval_set, lib, factory, cfg);
            cell.report = build_report(cell.eval.rows, lib.taxonomy(), 0);
            cell.tc_percent = tool_call_percent(cell.eval);
            return;
        }
        auto& pc = out.policy[idx - nCells];
        auto tc = train_cfg;
        tc.reward = train_cfg.reward.ablated(pc.ablation);
        auto const res = train(world, tc);
        pc.p_retrieve_easy = res.policy.p_retrieve(Difficulty::Easy);
        pc.p_retrieve_hard = res.policy.p_retrieve(Difficulty::Hard);
        pc.final_mean_reward = res.curve.back().mean_reward;
        double rate = 0.0;
        for (auto const& ctx: world.contexts)
            rate += res.policy.p_retrieve(ctx.difficulty);
        pc.tc_percent = 100.0 * rate / static_cast<double>(world.contexts.size());
    });
    return out;
}

std::string grid_csv(GridResult const& result)
{
    std::string out = "mode,k,ablation,acc,macro_f1,weighted_f1,tc_percent\n";
    char buf[256];
    for (auto const& c: result.cells)
    {
        std::snprintf(buf, sizeof buf, "%s,%zu,n/a,%.10g,%.10g,%.10g,%.10g\n", std::string(to_string(c.mode)).c_str(),
                      c.k, c.report.acc, c.report.macro_f1, c.report.weighted_f1, c.tc_percent);
        out += buf;
    }
    return out;
}

std::string grid_policy_csv(GridResult const& result)
{
    std::string out = "ablation,p_retrieve_easy,p_retrieve_hard,final_mean_reward,tc_percent\n";
    char buf[256];
    for (auto const& p: result.policy)
    {
        std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g,%.10g\n", std::string(to_string(p.ablation)).c_str(),
                      p.p_retrieve_easy, p.p_retrieve_hard, p.final_mean_reward, p.tc_percent);
        out += buf;
    }
    return out;
}

} // namespace intentkit
