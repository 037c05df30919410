// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/agent_runtime.hpp>
#include <intentkit/types.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace intentkit
{

enum class RewardAblation
{
    Full,
    NoRs,
    NoRf,
    NoRd,
    NoRe,
    NoTool,
};

[[nodiscard]] std::string_view to_string(RewardAblation ablation);
[[nodiscard]] RewardAblation reward_ablation_from_string(std::string_view s);

struct RewardConfig
{
    double r_d = 0.1;  // easy, direct and correct
    double r_f = -0.1; // easy, retrieval whose options missed gt
    double r_s = 0.5;  // hard, retrieval whose options contained gt
    double r_e = -0.1; // hard, direct and wrong
    double r_format = 0.1;
    double easy_threshold = 0.5;
    double clip_eps = 0.2;
    double kl_beta = 0.0;

    /// Tool and format magnitudes must stay below the unit accuracy reward.
    void validate() const;
    [[nodiscard]] RewardConfig ablated(RewardAblation ablation) const;
};

enum class RewardBranch
{
    EasyDirectCorrect,
    EasyToolMiss,
    HardToolHit,
    HardDirectWrong,
    Otherwise,
};

[[nodiscard]] std::string_view to_string(RewardBranch branch);

struct RolloutRecord
{
    Prediction predicted;
    IntentLabel gt;
    bool tool_called = false;
    std::optional<LabelSet> options_emitted;
    bool format_ok = false;

    [[nodiscard]] bool correct() const { return predicted && *predicted == gt; }
    [[nodiscard]] static RolloutRecord from_outcome(InferenceOutcome const& outcome, IntentLabel gt);
};

struct RewardBreakdown
{
    double format = 0.0;
    double accuracy = 0.0;
    double tool = 0.0;
    double total = 0.0;
    RewardBranch branch = RewardBranch::Otherwise;
};

struct GroupRollout
{
    std::vector<RolloutRecord> rollouts;
    double alpha = 0.0;
    std::vector<RewardBreakdown> rewards;
    std::vector<double> advantages;
};

struct MissingOptions: InvalidArgument
{
    MissingOptions(): InvalidArgument("rollout called the tool but carries no emitted options") {}
};

struct GroupTooSmall: InvalidArgument
{
    explicit GroupTooSmall(std::size_t n): InvalidArgument("group needs >= 2 rollouts, got " + std::to_string(n)) {}
};

struct LengthMismatch: InvalidArgument
{
    LengthMismatch(): InvalidArgument("per-token inputs must have equal length") {}
};

struct NonFiniteInput: InvalidArgument
{
    NonFiniteInput(): InvalidArgument("non-finite value in surrogate input") {}
};

/// 1 when the prediction canonically equals gt, else 0 (NoMatch scores 0).
[[nodiscard]] double accuracy_reward(Prediction const& predicted, IntentLabel const& gt);

struct ToolReward
{
    double value = 0.0;
    RewardBranch branch = RewardBranch::Otherwise;
};

/// Five-branch tool-aware reward. alpha >= easy_threshold classifies the context as easy.
[[nodiscard]] ToolReward tool_reward(RolloutRecord const& rollout, double alpha, RewardConfig const& config);

/// format + accuracy + tool, summed in that order. Format is judged on the final output only.
[[nodiscard]] RewardBreakdown total_reward(RolloutRecord const& rollout, double alpha, RewardConfig const& config);

/// Fraction of rollouts whose prediction equals gt.
[[nodiscard]] double group_accuracy(std::span<RolloutRecord const> rollouts);

/// (R_i - mean) / sigma with the population standard deviation; all zeros when sigma < 1e-12.
[[nodiscard]] std::vector<double> group_advantages(std::span<double const> rewards);

/// Rewards every rollout against the on-group accuracy and normalizes the totals.
[[nodiscard]] GroupRollout score_group(std::vector<RolloutRecord> rollouts, RewardConfig const& config);

/// Negative clipped surrogate for one sequence, averaged over its tokens:
/// -(1/T) sum_t [min(rho_t A, clip(rho_t, 1-eps, 1+eps) A) - beta KL_t], rho_t = exp(new_t - old_t).
/// kl_terms may be empty (treated as zero).
[[nodiscard]] double grpo_surrogate(std::span<double const> token_logp_new, std::span<double const> token_logp_old,
                                    double advantage, std::span<double const> kl_terms, RewardConfig const& config);

/// Exact KL(p || q) for two categorical distributions.
[[nodiscard]] double categorical_kl(std::span<double const> p, std::span<double const> q);

/// {"alpha", "rewards", "branches", "advantages"} on one line.
[[nodiscard]] std::string reward_report_line(GroupRollout const& group);

} // namespace intentkit
