// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/history_library.hpp>
#include <intentkit/llm_client.hpp>
#include <intentkit/protocol.hpp>
#include <intentkit/types.hpp>

#include <exception>
#include <optional>
#include <string>

namespace intentkit
{

struct AgentConfig
{
    StrategyMode mode = StrategyMode::SelfDecided;
    int max_turns = 6;
    std::size_t k = 3;
    double temperature = 0.0;
    int max_tokens = 512;
    std::string prompt_template = default_prompt_template();

    void validate() const;
};

namespace reminders
{
    inline constexpr std::string_view kFormat =
        "Your output did not follow the required format. Either call retrieve_intent_context(user, intent_options) "
        "or reply with <answer>intent_label</answer><intent_explanation>...</intent_explanation>.";
    inline constexpr std::string_view kMustRetrieve =
        "Call retrieve_intent_context with 2+ intent_options before giving your final answer.";
    inline constexpr std::string_view kNoTool = "Retrieval is not available. Answer directly in the required format.";
} // namespace reminders

struct InferenceOutcome
{
    Trajectory trajectory;
    Prediction predicted;
    /// A retrieval was actually executed.
    bool tool_called = false;
    std::optional<LabelSet> options_emitted;
    int turns_used = 0;
    /// The final output parsed as an answer whose label is in the taxonomy.
    bool format_ok = false;
};

/// A backend failure during inference, carrying the trajectory built so far.
class InferenceFailed: public BackendError
{
  public:
    InferenceFailed(std::string const& what, Trajectory partial, std::exception_ptr cause):
        BackendError(what), partial(std::move(partial)), cause(std::move(cause))
    {
    }

    Trajectory partial;
    std::exception_ptr cause;
};

/// Drives the model over one context until it answers or the turn budget runs out.
///
/// Tool calls (when the mode permits) retrieve from the context user's partition
/// with the action text as query; repeated identical option sets are answered from
/// a per-session memo. Malformed outputs and answers rejected by ForcedRetrieval get
/// a reminder and count toward the budget. Exhaustion yields predicted == nullopt.
[[nodiscard]] InferenceOutcome run_inference(Context const& ctx, Taxonomy const& taxonomy, HistoryLibrary const& lib,
                                             ChatBackend& backend, AgentConfig const& config);

/// Valid taxonomy labels among raw options; out-of-vocabulary entries are dropped.
[[nodiscard]] LabelSet canonical_options(std::vector<std::string> const& raw, Taxonomy const& taxonomy);

} // namespace intentkit
