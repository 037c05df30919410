// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/reward_engine.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace intentkit
{

enum class Difficulty
{
    Easy = 0,
    Hard = 1,
};

[[nodiscard]] std::string_view to_string(Difficulty d);

enum class SimAction
{
    Direct = 0,
    Retrieve = 1,
};

struct SimContext
{
    Difficulty difficulty = Difficulty::Easy;
    IntentLabel gt;
    /// Predicted on a wrong outcome; also the single option of a missed retrieval.
    IntentLabel distractor;
};

struct SyntheticWorld
{
    std::vector<SimContext> contexts;
    std::array<double, 2> p_direct_correct { 0.9, 0.2 };    // indexed by Difficulty
    std::array<double, 2> p_retrieval_correct { 0.9, 0.8 }; // indexed by Difficulty
    double p_options_hit = 0.9;
    std::uint64_t seed = 7;

    /// Eight contexts alternating easy/hard with the default probabilities.
    [[nodiscard]] static SyntheticWorld make_default(std::uint64_t seed = 7);
    void validate() const;
};

struct TabularPolicy
{
    /// logits[difficulty][action]
    std::array<std::array<double, 2>, 2> logits {};

    [[nodiscard]] std::array<double, 2> probs(Difficulty d) const;
    [[nodiscard]] double p_retrieve(Difficulty d) const { return probs(d)[1]; }
};

struct SimGroup
{
    GroupRollout scored;
    std::vector<SimAction> actions;
    Difficulty difficulty = Difficulty::Easy;
};

/// Deterministic 64-bit generator for (seed, step). Every rollout consumes three uniforms.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x);

/// Samples G action/outcome pairs on one context and scores them with the reward engine.
/// Uniforms come from a generator seeded with splitmix64(splitmix64(world.seed) + stream), so
/// nearby seeds do not share streams.
[[nodiscard]] SimGroup rollout_group(SyntheticWorld const& world, TabularPolicy const& policy, std::size_t ctx_index,
                                     std::size_t G, RewardConfig const& reward_cfg, std::uint64_t stream);

/// logits[d] += lr * sum_i A_i * (onehot(a_i) - pi(d)).
[[nodiscard]] TabularPolicy update_policy(TabularPolicy policy, SimGroup const& group, double lr);

struct TrainConfig
{
    int steps = 2000;
    std::size_t G = 8;
    double lr = 0.1;
    RewardConfig reward;

    void validate() const;
};

struct CurvePoint
{
    int step = 0;
    double p_retrieve_easy = 0.0;
    double p_retrieve_hard = 0.0;
    double mean_reward = 0.0;
    double mean_alpha = 0.0;
    double tool_miss_rate = 0.0;
};

struct TrainResult
{
    std::vector<CurvePoint> curve;
    TabularPolicy policy;
};

/// Step s trains on context s mod |contexts| with generator stream s. Bit-reproducible for a fixed world seed.
[[nodiscard]] TrainResult train(SyntheticWorld const& world, TrainConfig const& config, TabularPolicy initial = {});

/// step,p_retrieve_easy,p_retrieve_hard,mean_reward,mean_alpha,tool_miss_rate
[[nodiscard]] std::string curve_csv(std::vector<CurvePoint> const& curve);

} // namespace intentkit
