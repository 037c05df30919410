// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/agent_runtime.hpp>
#include <intentkit/embedding.hpp>
#include <intentkit/experiments.hpp>
#include <intentkit/llm_client.hpp>
#include <intentkit/policy_sim.hpp>
#include <intentkit/reward_engine.hpp>
#include <intentkit/trajectory_gen.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace intentkit
{

enum class BackendKind
{
    None,
    Scripted,
    HistoryEcho,
    Remote,
};

[[nodiscard]] std::string_view to_string(BackendKind kind);
[[nodiscard]] BackendKind backend_kind_from_string(std::string_view s);

struct BackendSettings
{
    BackendKind kind = BackendKind::None;
    std::string script;         // scripted: JSONL, line i = session i {"steps": [...]}
    std::string fallback_label; // history_echo: answer when nothing is retrieved
    RemoteConfig remote;
};

/// Every knob of a CLI run. Keys are addressed as "section.key".
struct RunConfig
{
    // [data]
    std::string dataset;
    std::string taxonomy = "mintrec";
    std::string library;
    std::string user;

    EmbedderSpec embedder;
    BackendSettings backend;

    // [agent]
    AgentConfig agent;
    std::size_t samples = 1;
    double sample_temperature = 1.0;

    GenConfig generation;

    RewardConfig reward;
    RewardAblation ablation = RewardAblation::Full;

    // [policy]
    TrainConfig policy;
    std::array<double, 2> p_direct_correct { 0.9, 0.2 };
    std::array<double, 2> p_retrieval_correct { 0.9, 0.8 };
    double p_options_hit = 0.9;

    // [experiment]
    Ordering ordering = Ordering::RoundRobinByFreqDesc;
    std::size_t checkpoint_every = 50;
    StrategyGrid grid;
    std::size_t shuffles = 0;
    bool gen_gap = false;
    std::optional<double> gap_min;
    std::optional<double> gap_max;

    // [run]
    std::uint64_t seed = 7;
    std::string output_dir = "out";
    unsigned jobs = 0; // 0 = logical cores
    bool macro_over_taxonomy = false;

    /// All recognized "section.key" names in canonical order.
    [[nodiscard]] static std::vector<std::string> const& keys();

    /// Throws ConfigError for unknown keys or unparseable values.
    void set(std::string_view key, std::string_view value);
    [[nodiscard]] std::string get(std::string_view key) const;

    /// Applies a sectioned key=value file. Unknown sections or keys are rejected.
    void apply_ini(std::string const& text);
    void apply_ini_file(std::string const& path);

    /// INTENTKIT_<SECTION>_<KEY> (upper case) for every known key, read via lookup.
    void apply_env(std::function<std::optional<std::string>(std::string const&)> const& lookup);
    void apply_process_env();

    /// "key=value" lines in canonical order, without run.output_dir and run.jobs.
    [[nodiscard]] std::string canonical() const;
    /// 16 hex digits of FNV-1a over canonical().
    [[nodiscard]] std::string hash() const;

    void validate() const;

    [[nodiscard]] unsigned effective_jobs() const;
    [[nodiscard]] SyntheticWorld world() const;
    [[nodiscard]] TrainConfig train_config() const;
};

[[nodiscard]] std::string env_name(std::string_view key);

/// Reads a script file: one {"steps": [...]} object per line, one line per session.
[[nodiscard]] std::vector<ScriptedBehavior> load_script_sessions(std::string const& path);

/// Backend per session for the configured kind. BackendKind::None throws ConfigError.
[[nodiscard]] BackendFactory make_backend_factory(BackendSettings const& settings, Taxonomy const& taxonomy);

} // namespace intentkit
