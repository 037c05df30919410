// SPDX-License-Identifier: Apache-2.0
#include <intentkit/policy_sim.hpp>

#include <cmath>
#include <cstdio>
#include <random>

namespace intentkit
{

std::string_view to_string(Difficulty d)
{
    return d == Difficulty::Easy ? "easy" : "hard";
}

SyntheticWorld SyntheticWorld::make_default(std::uint64_t seed)
{
    static constexpr std::array<char const*, 8> kLabels { "complain", "praise",  "inform", "joke",
                                                          "thank",    "criticize", "agree", "taunt" };
    SyntheticWorld w;
    w.seed = seed;
    for (std::size_t i = 0; i < kLabels.size(); ++i)
    {
        w.contexts.push_back({ i % 2 == 0 ? Difficulty::Easy : Difficulty::Hard, IntentLabel { kLabels[i] },
                               IntentLabel { kLabels[(i + 1) % kLabels.size()] } });
    }
    return w;
}

void SyntheticWorld::validate() const
{
    if (contexts.empty())
        throw ConfigError("synthetic world needs at least one context");
    auto inUnit = [](double p) { return p >= 0.0 && p <= 1.0; };
    for (int d = 0; d < 2; ++d)
    {
        if (!inUnit(p_direct_correct[d]) || !inUnit(p_retrieval_correct[d]))
            throw ConfigError("world probabilities must lie in [0, 1]");
    }
    if (!inUnit(p_options_hit))
        throw ConfigError("p_options_hit must lie in [0, 1]");
    for (auto const& c: contexts)
    {
        if (c.gt == c.distractor)
            throw ConfigError("distractor must differ from gt");
    }
}

std::array<double, 2> TabularPolicy::probs(Difficulty d) const
{
    auto const& l = logits[static_cast<int>(d)];
    double const m = std::max(l[0], l[1]);
    double const e0 = std::exp(l[0] - m);
    double const e1 = std::exp(l[1] - m);
    return { e0 / (e0 + e1), e1 / (e0 + e1) };
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace
{
    double uniform(std::mt19937_64& rng)
    {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    }
} // namespace

SimGroup rollout_group(SyntheticWorld const& world, TabularPolicy const& policy, std::size_t ctx_index, std::size_t G,
                       RewardConfig const& reward_cfg, std::uint64_t stream)
{
    if (G < 2)
        throw GroupTooSmall(G);
    auto const& ctx = world.contexts.at(ctx_index);
    auto const d = static_cast<int>(ctx.difficulty);
    double const pRetrieve = policy.p_retrieve(ctx.difficulty);

    std::mt19937_64 rng(splitmix64(splitmix64(world.seed) + stream));
    SimGroup group;
    group.difficulty = ctx.difficulty;
    std::vector<RolloutRecord> rollouts;
    rollouts.reserve(G);
    for (std::size_t i = 0; i < G; ++i)
    {
        double const uAction = uniform(rng);
        double const uCorrect = uniform(rng);
        double const uHit = uniform(rng);

        RolloutRecord r;
        r.gt = ctx.gt;
        r.format_ok = true;
        bool correct = false;
        if (uAction < pRetrieve)
        {
            group.actions.push_back(SimAction::Retrieve);
            r.tool_called = true;
            r.options_emitted = uHit < world.p_options_hit ? LabelSet { ctx.gt, ctx.distractor } : LabelSet { ctx.distractor };
            correct = uCorrect < world.p_retrieval_correct[d];
        }
        else
        {
            group.actions.push_back(SimAction::Direct);
            correct = uCorrect < world.p_direct_correct[d];
        }
        r.predicted = correct ? ctx.gt : ctx.distractor;
        rollouts.push_back(std::move(r));
    }
    group.scored = score_group(std::move(rollouts), reward_cfg);
    return group;
}

TabularPolicy update_policy(TabularPolicy policy, SimGroup const& group, double lr)
{
    if (!(lr >= 0.0))
        throw InvalidArgument("lr must be >= 0");
    auto const pi = policy.probs(group.difficulty);
    std::array<double, 2> grad {};
    for (std::size_t i = 0; i < group.actions.size(); ++i)
    {
        auto const a = static_cast<int>(group.actions[i]);
        double const adv = group.scored.advantages[i];
        for (int j = 0; j < 2; ++j)
            grad[j] += adv * ((j == a ? 1.0 : 0.0) - pi[j]);
    }
    auto& l = policy.logits[static_cast<int>(group.difficulty)];
    l[0] += lr * grad[0];
    l[1] += lr * grad[1];
    return policy;
}

void TrainConfig::validate() const
{
    if (steps < 1)
        throw ConfigError("steps must be >= 1");
    if (G < 2)
        throw ConfigError("G must be >= 2");
    if (!(lr >= 0.0) || !std::isfinite(lr))
        throw ConfigError("lr must be a finite value >= 0");
    reward.validate();
}

TrainResult train(SyntheticWorld const& world, TrainConfig const& config, TabularPolicy initial)
{
    world.validate();
    config.validate();
    TrainResult result;
    result.policy = initial;
    result.curve.reserve(static_cast<std::size_t>(config.steps));
    for (int step = 0; step < config.steps; ++step)
    {
        auto const ctxIndex = static_cast<std::size_t>(step) % world.contexts.size();
        auto const group =
            rollout_group(world, result.policy, ctxIndex, config.G, config.reward, static_cast<std::uint64_t>(step));
        if (config.lr > 0.0)
            result.policy = update_policy(result.policy, group, config.lr);

        CurvePoint p;
        p.step = step + 1;
        p.p_retrieve_easy = result.policy.p_retrieve(Difficulty::Easy);
        p.p_retrieve_hard = result.policy.p_retrieve(Difficulty::Hard);
        p.mean_alpha = group.scored.alpha;
        std::size_t misses = 0;
        for (std::size_t i = 0; i < config.G; ++i)
        {
            p.mean_reward += group.scored.rewards[i].total;
            auto const& r = group.scored.rollouts[i];
            if (r.tool_called && !r.options_emitted->contains(r.gt))
                ++misses;
        }
        p.mean_reward /= static_cast<double>(config.G);
        p.tool_miss_rate = static_cast<double>(misses) / static_cast<double>(config.G);
        result.curve.push_back(p);
    }
    return result;
}

std::string curve_csv(std::vector<CurvePoint> const& curve)
{
    std::string out = "step,p_retrieve_easy,p_retrieve_hard,mean_reward,mean_alpha,tool_miss_rate\n";
    char buf[256];
    for (auto const& p: curve)
    {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.step, p.p_retrieve_easy,
                      p.p_retrieve_hard, p.mean_reward, p.mean_alpha, p.tool_miss_rate);
        out += buf;
    }
    return out;
}

} // namespace intentkit
