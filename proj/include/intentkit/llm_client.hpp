// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/error.hpp>
#include <intentkit/types.hpp>

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace intentkit
{

struct ChatRequest
{
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 512;
    int n_samples = 1;
    /// Advertise the retrieval tool in the structured "tools" field.
    bool tool_enabled = true;

    /// Throws InvalidArgument unless messages start with a system message and the numeric fields are in range.
    void validate() const;
};

/// Chat-completion backend. Returns n_samples assistant contents.
class ChatBackend
{
  public:
    virtual ~ChatBackend() = default;
    [[nodiscard]] virtual std::vector<std::string> complete(ChatRequest const& request) = 0;
};

/// Creates one backend per independent session (scripted cursors are per session).
using BackendFactory = std::function<std::unique_ptr<ChatBackend>(std::size_t session)>;

struct ScriptStep
{
    enum class Kind
    {
        ToolCall,
        Answer,
        Malformed,
    };

    Kind kind = Kind::Malformed;
    std::vector<std::string> options;       // ToolCall
    std::string label;                      // Answer
    std::optional<std::string> explanation; // Answer
    std::string text;                       // Malformed

    [[nodiscard]] static ScriptStep tool_call(std::vector<std::string> options);
    [[nodiscard]] static ScriptStep answer(std::string label, std::optional<std::string> explanation = {});
    [[nodiscard]] static ScriptStep malformed(std::string text);

    /// {"tool_call": [..]} | {"answer": "..", "explanation": ".."} | {"malformed": ".."}
    [[nodiscard]] static ScriptStep from_json(nlohmann::json const& j);
    [[nodiscard]] nlohmann::json to_json() const;
};

using ScriptedBehavior = std::vector<ScriptStep>;

/// Replays canned steps in order, each rendered in the assistant output format and
/// replicated n_samples times. Throws ScriptExhausted past the end.
class ScriptedBackend final: public ChatBackend
{
  public:
    explicit ScriptedBackend(ScriptedBehavior steps);

    [[nodiscard]] std::vector<std::string> complete(ChatRequest const& request) override;

    [[nodiscard]] std::size_t consumed() const noexcept { return _cursor; }
    [[nodiscard]] std::size_t remaining() const noexcept { return _steps.size() - _cursor; }

  private:
    ScriptedBehavior _steps;
    std::size_t _cursor = 0;
};

/// Renders a step. Tool calls name the user found in the request's context message.
[[nodiscard]] std::string render_step(ScriptStep const& step, ChatRequest const& request);

/// Test double driven by a callback that sees the full request.
class CallbackBackend final: public ChatBackend
{
  public:
    using Fn = std::function<std::string(ChatRequest const&)>;
    explicit CallbackBackend(Fn fn): _fn(std::move(fn)) {}

    [[nodiscard]] std::vector<std::string> complete(ChatRequest const& request) override;

  private:
    Fn _fn;
};

/// Deterministic reactive mock. When the tool is offered and not yet used it requests
/// every taxonomy label; after a tool response it answers the top-ranked label; with no
/// history (or no tool) it answers the fallback label. Explanations are templated from
/// the action text.
class NearestHistoryBackend final: public ChatBackend
{
  public:
    NearestHistoryBackend(Taxonomy taxonomy, IntentLabel fallback);

    [[nodiscard]] std::vector<std::string> complete(ChatRequest const& request) override;

  private:
    Taxonomy _taxonomy;
    IntentLabel _fallback;
};

struct RemoteConfig
{
    std::string endpoint_url; // full URL of the chat completions route
    std::string model;
    int timeout_ms = 30000;
    int retries = 2;
    int backoff_ms = 200;
};

/// OpenAI-style chat completions over HTTP. Structured tool_calls are folded into
/// inline `retrieve_intent_context(...)` text so one parser serves both forms.
class RemoteBackend final: public ChatBackend
{
  public:
    explicit RemoteBackend(RemoteConfig config);

    [[nodiscard]] std::vector<std::string> complete(ChatRequest const& request) override;

    [[nodiscard]] static nlohmann::json request_body(ChatRequest const& request, std::string const& model);
    [[nodiscard]] static std::vector<std::string> parse_reply(nlohmann::json const& reply);

  private:
    RemoteConfig _config;
};

} // namespace intentkit
