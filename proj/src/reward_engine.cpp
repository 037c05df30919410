// SPDX-License-Identifier: Apache-2.0
#include <intentkit/reward_engine.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace intentkit
{

std::string_view to_string(RewardAblation ablation)
{
    switch (ablation)
    {
        case RewardAblation::Full: return "full";
        case RewardAblation::NoRs: return "no_rs";
        case RewardAblation::NoRf: return "no_rf";
        case RewardAblation::NoRd: return "no_rd";
        case RewardAblation::NoRe: return "no_re";
        case RewardAblation::NoTool: return "no_tool";
    }
    return "full";
}

RewardAblation reward_ablation_from_string(std::string_view s)
{
    for (auto a: { RewardAblation::Full, RewardAblation::NoRs, RewardAblation::NoRf, RewardAblation::NoRd,
                   RewardAblation::NoRe, RewardAblation::NoTool })
    {
        if (to_string(a) == s)
            return a;
    }
    throw ConfigError("unknown reward ablation '" + std::string(s) + "'");
}

std::string_view to_string(RewardBranch branch)
{
    switch (branch)
    {
        case RewardBranch::EasyDirectCorrect: return "easy_direct_correct";
        case RewardBranch::EasyToolMiss: return "easy_tool_miss";
        case RewardBranch::HardToolHit: return "hard_tool_hit";
        case RewardBranch::HardDirectWrong: return "hard_direct_wrong";
        case RewardBranch::Otherwise: return "otherwise";
    }
    return "otherwise";
}

void RewardConfig::validate() const
{
    for (double v: { r_d, r_f, r_s, r_e })
    {
        if (!std::isfinite(v) || std::abs(v) >= 1.0)
            throw ConfigError("tool reward magnitudes must be < 1");
    }
    if (!std::isfinite(r_format) || r_format < 0.0 || r_format >= 1.0)
        throw ConfigError("r_format must lie in [0, 1)");
    if (easy_threshold < 0.0 || easy_threshold > 1.0)
        throw ConfigError("easy_threshold must lie in [0, 1]");
    if (clip_eps < 0.0 || clip_eps >= 1.0)
        throw ConfigError("clip_eps must lie in [0, 1)");
    if (kl_beta < 0.0)
        throw ConfigError("kl_beta must be >= 0");
}

RewardConfig RewardConfig::ablated(RewardAblation ablation) const
{
    auto c = *this;
    switch (ablation)
    {
        case RewardAblation::Full: break;
        case RewardAblation::NoRs: c.r_s = 0.0; break;
        case RewardAblation::NoRf: c.r_f = 0.0; break;
        case RewardAblation::NoRd: c.r_d = 0.0; break;
        case RewardAblation::NoRe: c.r_e = 0.0; break;
        case RewardAblation::NoTool: c.r_d = c.r_f = c.r_s = c.r_e = 0.0; break;
    }
    return c;
}

RolloutRecord RolloutRecord::from_outcome(InferenceOutcome const& outcome, IntentLabel gt)
{
    return { outcome.predicted, std::move(gt), outcome.tool_called, outcome.options_emitted, outcome.format_ok };
}

double accuracy_reward(Prediction const& predicted, IntentLabel const& gt)
{
    return predicted && canonical_form(predicted->name) == canonical_form(gt.name) ? 1.0 : 0.0;
}

ToolReward tool_reward(RolloutRecord const& r, double alpha, RewardConfig const& config)
{
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw InvalidArgument("group accuracy must lie in [0, 1]");
    if (r.tool_called && !r.options_emitted)
        throw MissingOptions();

    bool const easy = alpha >= config.easy_threshold;
    bool const correct = accuracy_reward(r.predicted, r.gt) == 1.0;
    bool const gtInOptions = r.tool_called && r.options_emitted->contains(r.gt);

    if (easy && !r.tool_called && correct)
        return { config.r_d, RewardBranch::EasyDirectCorrect };
    if (easy && r.tool_called && !gtInOptions)
        return { config.r_f, RewardBranch::EasyToolMiss };
    if (!easy && r.tool_called && gtInOptions)
        return { config.r_s, RewardBranch::HardToolHit };
    if (!easy && !r.tool_called && !correct)
        return { config.r_e, RewardBranch::HardDirectWrong };
    return { 0.0, RewardBranch::Otherwise };
}

RewardBreakdown total_reward(RolloutRecord const& r, double alpha, RewardConfig const& config)
{
    RewardBreakdown b;
    auto const tool = tool_reward(r, alpha, config);
    b.format = r.format_ok ? config.r_format : 0.0;
    b.accuracy = accuracy_reward(r.predicted, r.gt);
    b.tool = tool.value;
    b.branch = tool.branch;
    b.total = b.format + b.accuracy + b.tool;
    return b;
}

double group_accuracy(std::span<RolloutRecord const> rollouts)
{
    if (rollouts.empty())
        throw GroupTooSmall(0);
    double hits = 0.0;
    for (auto const& r: rollouts)
        hits += accuracy_reward(r.predicted, r.gt);
    return hits / static_cast<double>(rollouts.size());
}

std::vector<double> group_advantages(std::span<double const> rewards)
{
    if (rewards.size() < 2)
        throw GroupTooSmall(rewards.size());
    auto const n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r: rewards)
        mean += r;
    mean /= n;
    double var = 0.0;
    for (double r: rewards)
        var += (r - mean) * (r - mean);
    double const sigma = std::sqrt(var / n);

    std::vector<double> adv(rewards.size(), 0.0);
    if (sigma < 1e-12)
        return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i)
        adv[i] = (rewards[i] - mean) / sigma;
    return adv;
}

GroupRollout score_group(std::vector<RolloutRecord> rollouts, RewardConfig const& config)
{
    if (rollouts.size() < 2)
        throw GroupTooSmall(rollouts.size());
    GroupRollout g;
    g.alpha = group_accuracy(rollouts);
    std::vector<double> totals;
    totals.reserve(rollouts.size());
    for (auto const& r: rollouts)
    {
        g.rewards.push_back(total_reward(r, g.alpha, config));
        totals.push_back(g.rewards.back().total);
    }
    g.advantages = group_advantages(totals);
    g.rollouts = std::move(rollouts);
    return g;
}

double grpo_surrogate(std::span<double const> token_logp_new, std::span<double const> token_logp_old,
                      double advantage, std::span<double const> kl_terms, RewardConfig const& config)
{
    if (token_logp_new.size() != token_logp_old.size() || (!kl_terms.empty() && kl_terms.size() != token_logp_new.size()))
        throw LengthMismatch();
    if (token_logp_new.empty())
        throw InvalidArgument("surrogate needs at least one token");
    auto finite = [](double x) { return std::isfinite(x); };
    if (!std::isfinite(advantage) || !std::ranges::all_of(token_logp_new, finite)
        || !std::ranges::all_of(token_logp_old, finite) || !std::ranges::all_of(kl_terms, finite))
        throw NonFiniteInput();

    auto term = [&](std::size_t t) {
        double const ratio = std::exp(token_logp_new[t] - token_logp_old[t]);
        double const clipped = std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
        double const kl = kl_terms.empty() ? 0.0 : kl_terms[t];
        return std::min(ratio * advantage, clipped * advantage) - config.kl_beta * kl;
    };
    // mean taken around the first term, so equal terms give that term exactly
    double const first = term(0);
    double dev = 0.0;
    for (std::size_t t = 1; t < token_logp_new.size(); ++t)
        dev += term(t) - first;
    return -(first + dev / static_cast<double>(token_logp_new.size()));
}

double categorical_kl(std::span<double const> p, std::span<double const> q)
{
    if (p.size() != q.size())
        throw LengthMismatch();
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
    {
        if (p[i] > 0.0)
            kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

std::string reward_report_line(GroupRollout const& group)
{
    nlohmann::json rewards = nlohmann::json::array();
    nlohmann::json branches = nlohmann::json::array();
    for (auto const& r: group.rewards)
    {
        rewards.push_back(r.total);
        branches.push_back(std::string(to_string(r.branch)));
    }
    nlohmann::json const j = {
        { "alpha", group.alpha },
        { "rewards", std::move(rewards) },
        { "branches", std::move(branches) },
        { "advantages", group.advantages },
    };
    return j.dump();
}

} // namespace intentkit
