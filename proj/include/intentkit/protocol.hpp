// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/history_library.hpp>
#include <intentkit/types.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace intentkit
{

inline constexpr std::string_view kToolName = "retrieve_intent_context";
inline constexpr std::string_view kNoHistorySentinel = "No matching intent history found.";

enum class StrategyMode
{
    ForcedNoRetrieval,
    SelfDecided,
    ForcedRetrieval,
};

[[nodiscard]] std::string_view to_string(StrategyMode mode);
[[nodiscard]] StrategyMode strategy_mode_from_string(std::string_view s);

/// One model output, classified.
struct ParsedOutput
{
    enum class Kind
    {
        ToolCall,
        Answer,
        Malformed,
    };

    Kind kind = Kind::Malformed;
    std::vector<std::string> options; // ToolCall: deduplicated by canonical form, emission order
    std::string label_raw;            // Answer
    std::optional<std::string> explanation;

    [[nodiscard]] bool is_tool_call() const noexcept { return kind == Kind::ToolCall; }
    [[nodiscard]] bool is_answer() const noexcept { return kind == Kind::Answer; }
};

/// Classifies raw model text.
///
/// An `<answer>...</answer>` block wins when it appears before any tool invocation
/// (first occurrence; `<intent_explanation>` is optional). A tool invocation is
/// `retrieve_intent_context(...)` whose arguments carry an `intent_options` list of
/// quoted strings, in either `intent_options=[...]` or `"intent_options": [...]` form.
/// Everything else is Malformed.
[[nodiscard]] ParsedOutput parse_output(std::string_view text);

[[nodiscard]] std::string format_answer(std::string_view label, std::optional<std::string_view> explanation = {});
[[nodiscard]] std::string format_tool_call(std::string_view user, std::vector<std::string> const& options);
[[nodiscard]] std::string format_tool_call(std::string_view user, LabelSet const& options);

/// Numbered ("user", "label", "explanation") triples in rank order, or the no-history sentinel.
[[nodiscard]] std::string render_tool_response(RetrievalResult const& result);

struct RetrievedTriple
{
    std::string user;
    std::string label;
    std::string explanation;

    bool operator==(RetrievedTriple const&) const = default;
};

/// Inverse of render_tool_response. Unparseable lines are skipped.
[[nodiscard]] std::vector<RetrievedTriple> parse_tool_response(std::string_view text);

[[nodiscard]] std::string const& default_prompt_template();

/// Expands {taxonomy}, {tool_signature} and {output_format}. The tool section is
/// omitted for ForcedNoRetrieval.
[[nodiscard]] std::string render_system_prompt(std::string_view prompt_template, Taxonomy const& taxonomy,
                                               StrategyMode mode);

/// "User: ...", optional "Context: ..." and "Meta: k=v; ..." lines, then "Action: ..." last.
[[nodiscard]] std::string render_context_message(Context const& ctx);

struct ContextFields
{
    std::string user;
    std::string action_text;
};

/// Recovers user and action text from render_context_message output.
[[nodiscard]] std::optional<ContextFields> parse_context_message(std::string_view content);

/// Whether a system prompt advertises the retrieval tool.
[[nodiscard]] bool prompt_offers_tool(std::string_view system_prompt);

/// Deterministic stand-in explanation in [PersonalMotivation][Context][Strategy] layout.
[[nodiscard]] IntentExplanation templated_explanation(IntentLabel const& label, Context const& ctx);

} // namespace intentkit
