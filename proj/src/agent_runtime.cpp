// SPDX-License-Identifier: Apache-2.0
#include <intentkit/agent_runtime.hpp>

#include <map>

namespace intentkit
{

void AgentConfig::validate() const
{
    if (max_turns < 1)
        throw ConfigError("max_turns must be >= 1");
    if (mode != StrategyMode::ForcedNoRetrieval && max_turns < 2)
        throw ConfigError("max_turns must be >= 2 when retrieval is possible");
    if (k == 0)
        throw ConfigError("k must be >= 1");
    if (temperature < 0.0)
        throw ConfigError("temperature must be >= 0");
}

LabelSet canonical_options(std::vector<std::string> const& raw, Taxonomy const& taxonomy)
{
    LabelSet out;
    for (auto const& r: raw)
    {
        if (auto l = taxonomy.canonicalize(r))
            out.insert(*l);
    }
    return out;
}

InferenceOutcome run_inference(Context const& ctx, Taxonomy const& taxonomy, HistoryLibrary const& lib,
                               ChatBackend& backend, AgentConfig const& config)
{
    config.validate();
    bool const toolAllowed = config.mode != StrategyMode::ForcedNoRetrieval;

    InferenceOutcome outcome;
    auto& traj = outcome.trajectory;
    traj.messages.push_back(Message::system(render_system_prompt(config.prompt_template, taxonomy, config.mode)));
    traj.messages.push_back(Message::user(render_context_message(ctx)));

    std::map<LabelSet, std::string> memo;

    for (int turn = 1; turn <= config.max_turns; ++turn)
    {
        ChatRequest request { traj.messages, config.temperature, config.max_tokens, 1, toolAllowed };
        std::string output;
        try
        {
            output = backend.complete(request).at(0);
        }
        catch (BackendError const& e)
        {
            throw InferenceFailed(e.what(), traj, std::current_exception());
        }
        outcome.turns_used = turn;
        traj.messages.push_back(Message::assistant(output));

        auto const parsed = parse_output(output);
        if (parsed.is_answer())
        {
            if (config.mode == StrategyMode::ForcedRetrieval && !outcome.tool_called)
            {
                traj.messages.push_back(Message::user(std::string(reminders::kMustRetrieve)));
                continue;
            }
            outcome.predicted = taxonomy.canonicalize(parsed.label_raw);
            outcome.format_ok = outcome.predicted.has_value();
            traj.final_label = outcome.predicted;
            if (parsed.explanation && !parsed.explanation->empty())
            {
                IntentExplanation exp { *parsed.explanation, ExplanationKind::Generic };
                if (exp.has_personalized_segments())
                    exp.kind = ExplanationKind::Personalized;
                traj.final_explanation = std::move(exp);
            }
            return outcome;
        }

        if (parsed.is_tool_call())
        {
            traj.tool_called = true;
            if (!toolAllowed)
            {
                traj.messages.push_back(Message::user(std::string(reminders::kNoTool)));
                continue;
            }
            auto const options = canonical_options(parsed.options, taxonomy);
            outcome.tool_called = true;
            if (!outcome.options_emitted)
                outcome.options_emitted.emplace();
            outcome.options_emitted->insert(options.begin(), options.end());
            traj.options_emitted = outcome.options_emitted;

            std::string response;
            if (options.empty())
            {
                response = std::string(kNoHistorySentinel);
            }
            else if (auto it = memo.find(options); it != memo.end())
            {
                response = it->second;
            }
            else
            {
                try
                {
                    response = render_tool_response(lib.retrieve(ctx.user, options, ctx.action_text, config.k));
                }
                catch (BackendError const& e)
                {
                    throw InferenceFailed(e.what(), traj, std::current_exception());
                }
                memo.emplace(options, response);
            }
            traj.messages.push_back(Message::tool(std::move(response)));
            continue;
        }

        traj.messages.push_back(Message::user(std::string(reminders::kFormat)));
    }
    return outcome;
}

} // namespace intentkit
