// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/agent_runtime.hpp>
#include <intentkit/metrics.hpp>
#include <intentkit/policy_sim.hpp>
#include <intentkit/reward_engine.hpp>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace intentkit
{

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. jobs <= 1 runs inline.
/// The first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned jobs, std::function<void(std::size_t)> const& fn);

/// Logical core count, at least 1.
[[nodiscard]] unsigned default_jobs();

enum class Ordering
{
    RoundRobinByFreqDesc,
    AsGiven,
};

[[nodiscard]] std::string_view to_string(Ordering o);
[[nodiscard]] Ordering ordering_from_string(std::string_view s);

/// Groups by gt label, orders groups by frequency descending (ties by taxonomy order)
/// and emits one record per group cyclically, skipping exhausted groups. Stable within a group.
[[nodiscard]] std::vector<IntentRecord> round_robin_order(std::span<IntentRecord const> records, Taxonomy const& taxonomy);

/// every, 2*every, ... below total, then total itself.
[[nodiscard]] std::vector<std::size_t> default_checkpoints(std::size_t total, std::size_t every = 50);

struct AccumulationPlan
{
    std::vector<IntentRecord> records; // one user
    Ordering ordering = Ordering::RoundRobinByFreqDesc;
    std::vector<std::size_t> checkpoints; // empty means default_checkpoints(records.size())
};

struct AccumulationPoint
{
    std::size_t n_history = 0;
    double cumulative_accuracy = 0.0;
    std::size_t errors = 0; // backend failures so far
    /// Accuracy over the samples since the previous checkpoint.
    double window_accuracy = 0.0;
};

struct AccumulationResult
{
    std::vector<AccumulationPoint> curve;
    std::vector<IntentRecord> ordered;
    std::vector<bool> correct;
    std::vector<bool> failed;
};

/// Streams the plan through the agent: predict with the current library, record
/// correctness, then insert (user, gt, explanation). The explanation is the model's when
/// it emitted one, otherwise a template. Backend failures count as wrong and the run continues.
/// lib is extended in place.
[[nodiscard]] AccumulationResult run_accumulation(AccumulationPlan const& plan, AgentConfig const& agent,
                                                  ChatBackend& backend, HistoryLibrary& lib);

/// n_history,cumulative_accuracy,errors,window_accuracy
[[nodiscard]] std::string accumulation_csv(std::vector<AccumulationPoint> const& curve);

struct EvalResult
{
    std::vector<EvalRow> rows;
    std::vector<bool> tool_called;
    std::vector<bool> answered;
};

/// Greedy inference per record, plus (n_samples - 1) extra runs at sample_temperature for Pass@N.
/// Backend session for record i, sample j is i * n_samples + j.
[[nodiscard]] EvalResult evaluate_records(std::span<IntentRecord const> records, HistoryLibrary const& lib,
                                          BackendFactory const& factory, AgentConfig const& agent,
                                          std::size_t n_samples = 1, double sample_temperature = 1.0, unsigned jobs = 1);

/// Percentage of rows whose inference executed a retrieval.
[[nodiscard]] double tool_call_percent(EvalResult const& result);

struct StrategyGrid
{
    std::vector<StrategyMode> modes { StrategyMode::ForcedNoRetrieval, StrategyMode::SelfDecided,
                                      StrategyMode::ForcedRetrieval };
    std::vector<std::size_t> k_values { 3 };
    std::vector<RewardAblation> reward_ablations { RewardAblation::Full };

    void validate() const;
};

struct GridCell
{
    StrategyMode mode = StrategyMode::SelfDecided;
    std::size_t k = 3;
    MetricReport report;
    double tc_percent = 0.0;
    EvalResult eval;
};

struct PolicyCell
{
    RewardAblation ablation = RewardAblation::Full;
    double p_retrieve_easy = 0.0;
    double p_retrieve_hard = 0.0;
    double final_mean_reward = 0.0;
    /// Retrieval rate of the trained policy averaged over the world's contexts, in percent.
    double tc_percent = 0.0;
};

struct GridResult
{
    std::vector<GridCell> cells;
    std::vector<PolicyCell> policy;
};

/// Inference cells cover modes x k_values; reward ablations train the toy policy on `world`.
/// Cells are independent and run on up to `jobs` threads; output order follows the grid.
[[nodiscard]] GridResult run_strategy_grid(StrategyGrid const& grid, std::span<IntentRecord const> eval_set,
                                           HistoryLibrary const& lib, BackendFactory const& factory,
                                           AgentConfig const& base, SyntheticWorld const& world,
                                           TrainConfig const& train_cfg, unsigned jobs = 1);

/// mode,k,ablation,acc,macro_f1,weighted_f1,tc_percent
[[nodiscard]] std::string grid_csv(GridResult const& result);
/// ablation,p_retrieve_easy,p_retrieve_hard,final_mean_reward,tc_percent
[[nodiscard]] std::string grid_policy_csv(GridResult const& result);

} // namespace intentkit
