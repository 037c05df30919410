// SPDX-License-Identifier: Apache-2.0
#include <intentkit/llm_client.hpp>
#include <intentkit/protocol.hpp>

#include "http.hpp"

namespace intentkit
{

void ChatRequest::validate() const
{
    if (messages.empty() || messages.front().role != Role::System)
        throw InvalidArgument("chat request must start with a system message");
    if (temperature < 0.0)
        throw InvalidArgument("temperature must be >= 0");
    if (max_tokens <= 0 || n_samples <= 0)
        throw InvalidArgument("max_tokens and n_samples must be positive");
}

ScriptStep ScriptStep::tool_call(std::vector<std::string> options)
{
    ScriptStep s;
    s.kind = Kind::ToolCall;
    s.options = std::move(options);
    return s;
}

ScriptStep ScriptStep::answer(std::string label, std::optional<std::string> explanation)
{
    ScriptStep s;
    s.kind = Kind::Answer;
    s.label = std::move(label);
    s.explanation = std::move(explanation);
    return s;
}

ScriptStep ScriptStep::malformed(std::string text)
{
    ScriptStep s;
    s.kind = Kind::Malformed;
    s.text = std::move(text);
    return s;
}

ScriptStep ScriptStep::from_json(nlohmann::json const& j)
{
    try
    {
        if (j.contains("tool_call"))
            return tool_call(j.at("tool_call").get<std::vector<std::string>>());
        if (j.contains("answer"))
        {
            std::optional<std::string> exp;
            if (auto it = j.find("explanation"); it != j.end() && !it->is_null())
                exp = it->get<std::string>();
            return answer(j.at("answer").get<std::string>(), std::move(exp));
        }
        if (j.contains("malformed"))
            return malformed(j.at("malformed").get<std::string>());
    }
    catch (nlohmann::json::exception const& e)
    {
        throw DataError(std::string("bad script step: ") + e.what());
    }
    throw DataError("script step needs one of tool_call / answer / malformed");
}

nlohmann::json ScriptStep::to_json() const
{
    switch (kind)
    {
        case Kind::ToolCall: return { { "tool_call", options } };
        case Kind::Answer:
            if (explanation)
                return { { "answer", label }, { "explanation", *explanation } };
            return { { "answer", label } };
        case Kind::Malformed: return { { "malformed", text } };
    }
    return nullptr;
}

std::string render_step(ScriptStep const& step, ChatRequest const& request)
{
    switch (step.kind)
    {
        case ScriptStep::Kind::ToolCall:
        {
            std::string user = "user";
            for (auto const& m: request.messages)
            {
                if (m.role != Role::User)
                    continue;
                if (auto fields = parse_context_message(m.content))
                {
                    user = fields->user;
                    break;
                }
            }
            return format_tool_call(user, step.options);
        }
        case ScriptStep::Kind::Answer:
            if (step.explanation)
                return format_answer(step.label, *step.explanation);
            return format_answer(step.label);
        case ScriptStep::Kind::Malformed: return step.text;
    }
    return step.text;
}

ScriptedBackend::ScriptedBackend(ScriptedBehavior steps): _steps(std::move(steps)) {}

std::vector<std::string> ScriptedBackend::complete(ChatRequest const& request)
{
    request.validate();
    if (_cursor >= _steps.size())
        throw ScriptExhausted();
    auto const text = render_step(_steps[_cursor++], request);
    return std::vector<std::string>(static_cast<std::size_t>(request.n_samples), text);
}

std::vector<std::string> CallbackBackend::complete(ChatRequest const& request)
{
    request.validate();
    auto const text = _fn(request);
    return std::vector<std::string>(static_cast<std::size_t>(request.n_samples), text);
}

NearestHistoryBackend::NearestHistoryBackend(Taxonomy taxonomy, IntentLabel fallback):
    _taxonomy(std::move(taxonomy)), _fallback(std::move(fallback))
{
    if (!_taxonomy.contains(_fallback))
        throw ConfigError("fallback label '" + _fallback.name + "' not in taxonomy");
}

std::vector<std::string> NearestHistoryBackend::complete(ChatRequest const& request)
{
    request.validate();
    bool const toolOffered = prompt_offers_tool(request.messages.front().content);

    Context ctx;
    Message const* lastTool = nullptr;
    for (auto const& m: request.messages)
    {
        if (m.role == Role::User)
        {
            if (auto fields = parse_context_message(m.content))
            {
                ctx.user = UserId(fields->user);
                ctx.action_text = fields->action_text;
            }
        }
        else if (m.role == Role::Tool)
        {
            lastTool = &m;
        }
    }

    std::string text;
    if (toolOffered && lastTool == nullptr)
    {
        std::vector<std::string> all;
        for (auto const& l: _taxonomy.labels())
            all.push_back(l.name);
        text = format_tool_call(ctx.user.str(), all);
    }
    else
    {
        IntentLabel label = _fallback;
        if (lastTool)
        {
            auto const hits = parse_tool_response(lastTool->content);
            if (!hits.empty())
            {
                if (auto l = _taxonomy.canonicalize(hits.front().label))
                    label = *l;
            }
        }
        text = format_answer(label.name, templated_explanation(label, ctx).text);
    }
    return std::vector<std::string>(static_cast<std::size_t>(request.n_samples), text);
}

RemoteBackend::RemoteBackend(RemoteConfig config): _config(std::move(config))
{
    if (_config.endpoint_url.empty())
        throw ConfigError("remote backend requires an endpoint URL");
}

nlohmann::json RemoteBackend::request_body(ChatRequest const& request, std::string const& model)
{
    nlohmann::json messages = nlohmann::json::array();
    for (auto const& m: request.messages)
        messages.push_back({ { "role", std::string(to_string(m.role)) }, { "content", m.content } });

    nlohmann::json body = {
        { "model", model },
        { "messages", std::move(messages) },
        { "temperature", request.temperature },
        { "n", request.n_samples },
        { "max_tokens", request.max_tokens },
        { "tools", nlohmann::json::array() },
    };
    if (request.tool_enabled)
    {
        body["tools"].push_back({
            { "type", "function" },
            { "function",
              {
                  { "name", std::string(kToolName) },
                  { "description", "Retrieve this user's historical intent patterns for the candidate intents." },
                  { "parameters",
                    {
                        { "type", "object" },
                        { "properties",
                          {
                              { "user", { { "type", "string" } } },
                              { "intent_options", { { "type", "array" }, { "items", { { "type", "string" } } } } },
                          } },
                        { "required", { "user", "intent_options" } },
                    } },
              } },
        });
    }
    return body;
}

std::vector<std::string> RemoteBackend::parse_reply(nlohmann::json const& reply)
{
    std::vector<std::string> out;
    try
    {
        for (auto const& choice: reply.at("choices"))
        {
            auto const& msg = choice.at("message");
            std::string content;
            if (auto it = msg.find("content"); it != msg.end() && it->is_string())
                content = it->get<std::string>();
            if (auto it = msg.find("tool_calls"); it != msg.end() && it->is_array())
            {
                for (auto const& call: *it)
                {
                    auto const& fn = call.at("function");
                    if (fn.value("name", std::string {}) != kToolName)
                        continue;
                    auto const& rawArgs = fn.at("arguments");
                    auto const args = rawArgs.is_string() ? nlohmann::json::parse(rawArgs.get<std::string>()) : rawArgs;
                    auto const inline_call = format_tool_call(args.value("user", std::string {}),
                                                              args.at("intent_options").get<std::vector<std::string>>());
                    content = content.empty() ? inline_call : content + "\n" + inline_call;
                }
            }
            out.push_back(std::move(content));
        }
    }
    catch (nlohmann::json::exception const& e)
    {
        throw BackendError(std::string("unexpected chat response: ") + e.what());
    }
    return out;
}

std::vector<std::string> RemoteBackend::complete(ChatRequest const& request)
{
    request.validate();
    auto const wanted = static_cast<std::size_t>(request.n_samples);
    std::vector<std::string> out;
    // servers that ignore "n" return a single choice; top up with further calls
    for (std::size_t round = 0; out.size() < wanted && round < wanted; ++round)
    {
        auto partial = request;
        partial.n_samples = static_cast<int>(wanted - out.size());
        auto const reply = detail::post_json(_config.endpoint_url, request_body(partial, _config.model),
                                             { _config.timeout_ms, _config.retries, _config.backoff_ms });
        auto got = parse_reply(reply);
        if (got.empty())
            throw BackendError("chat response carried no choices");
        for (auto& g: got)
            out.push_back(std::move(g));
    }
    out.resize(wanted);
    return out;
}

} // namespace intentkit
