// SPDX-License-Identifier: Apache-2.0
#include <intentkit/protocol.hpp>

#include <nlohmann/json.hpp>

#include <cctype>
#include <set>
#include <sstream>

namespace intentkit
{

std::string_view to_string(StrategyMode mode)
{
    switch (mode)
    {
        case StrategyMode::ForcedNoRetrieval: return "forced_no_retrieval";
        case StrategyMode::SelfDecided: return "self_decided";
        case StrategyMode::ForcedRetrieval: return "forced_retrieval";
    }
    return "self_decided";
}

StrategyMode strategy_mode_from_string(std::string_view s)
{
    if (s == "forced_no_retrieval")
        return StrategyMode::ForcedNoRetrieval;
    if (s == "self_decided")
        return StrategyMode::SelfDecided;
    if (s == "forced_retrieval")
        return StrategyMode::ForcedRetrieval;
    throw ConfigError("unknown strategy mode '" + std::string(s) + "'");
}

namespace
{
    std::string_view trim(std::string_view s)
    {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
            s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            s.remove_suffix(1);
        return s;
    }

    std::string quote(std::string_view s)
    {
        return nlohmann::json(std::string(s)).dump();
    }

    void skip_ws(std::string_view text, std::size_t& i)
    {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
    }

    /// Reads a "..." (JSON escapes) or '...' (backslash escapes) literal at text[i].
    std::optional<std::string> read_quoted(std::string_view text, std::size_t& i)
    {
        if (i >= text.size() || (text[i] != '"' && text[i] != '\''))
            return std::nullopt;
        char const q = text[i];
        std::size_t j = i + 1;
        std::string raw;
        while (j < text.size() && text[j] != q)
        {
            if (text[j] == '\\' && j + 1 < text.size())
            {
                raw.push_back(text[j]);
                ++j;
            }
            raw.push_back(text[j]);
            ++j;
        }
        if (j >= text.size())
            return std::nullopt;
        i = j + 1;
        if (q == '"')
        {
            try
            {
                return nlohmann::json::parse("\"" + raw + "\"").get<std::string>();
            }
            catch (nlohmann::json::exception const&)
            {
                return std::nullopt;
            }
        }
        std::string out;
        for (std::size_t k = 0; k < raw.size(); ++k)
        {
            if (raw[k] == '\\' && k + 1 < raw.size())
                ++k;
            out.push_back(raw[k]);
        }
        return out;
    }

    struct ToolHit
    {
        std::size_t pos;
        std::vector<std::string> options;
    };

    std::optional<std::vector<std::string>> read_options(std::string_view text, std::size_t openParen)
    {
        auto key = text.find("intent_options", openParen);
        if (key == std::string_view::npos)
            return std::nullopt;
        std::size_t i = key + std::string_view("intent_options").size();
        if (i < text.size() && (text[i] == '"' || text[i] == '\''))
            ++i;
        skip_ws(text, i);
        if (i >= text.size() || (text[i] != '=' && text[i] != ':'))
            return std::nullopt;
        ++i;
        skip_ws(text, i);
        if (i >= text.size() || text[i] != '[')
            return std::nullopt;
        ++i;

        std::vector<std::string> options;
        std::set<std::string> seen;
        for (;;)
        {
            skip_ws(text, i);
            if (i < text.size() && text[i] == ']')
                break;
            auto item = read_quoted(text, i);
            if (!item)
                return std::nullopt;
            auto canon = canonical_form(*item);
            if (!canon.empty() && seen.insert(canon).second)
                options.push_back(std::string(trim(*item)));
            skip_ws(text, i);
            if (i < text.size() && text[i] == ',')
            {
                ++i;
                continue;
            }
            if (i < text.size() && text[i] == ']')
                break;
            return std::nullopt;
        }
        return options;
    }

    std::optional<ToolHit> find_tool_call(std::string_view text)
    {
        std::size_t from = 0;
        while (true)
        {
            auto const pos = text.find(kToolName, from);
            if (pos == std::string_view::npos)
                return std::nullopt;
            std::size_t i = pos + kToolName.size();
            skip_ws(text, i);
            if (i < text.size() && text[i] == '(')
            {
                if (auto options = read_options(text, i); options && !options->empty())
                    return ToolHit { pos, std::move(*options) };
            }
            from = pos + 1;
        }
    }

    std::optional<std::string> tag_content(std::string_view text, std::string_view open, std::string_view close,
                                           std::size_t* openPos = nullptr)
    {
        auto const a = text.find(open);
        if (a == std::string_view::npos)
            return std::nullopt;
        auto const b = text.find(close, a + open.size());
        if (b == std::string_view::npos)
            return std::nullopt;
        if (openPos)
            *openPos = a;
        return std::string(trim(text.substr(a + open.size(), b - a - open.size())));
    }
} // namespace

ParsedOutput parse_output(std::string_view text)
{
    ParsedOutput out;
    std::size_t answerPos = std::string_view::npos;
    auto answer = tag_content(text, "<answer>", "</answer>", &answerPos);
    if (answer && answer->empty())
        answer.reset();
    auto tool = find_tool_call(text);

    if (answer && (!tool || answerPos < tool->pos))
    {
        out.kind = ParsedOutput::Kind::Answer;
        out.label_raw = std::move(*answer);
        out.explanation = tag_content(text, "<intent_explanation>", "</intent_explanation>");
        return out;
    }
    if (tool)
    {
        out.kind = ParsedOutput::Kind::ToolCall;
        out.options = std::move(tool->options);
        return out;
    }
    return out;
}

std::string format_answer(std::string_view label, std::optional<std::string_view> explanation)
{
    std::string out = "<answer>" + std::string(label) + "</answer>";
    if (explanation)
        out += "<intent_explanation>" + std::string(*explanation) + "</intent_explanation>";
    return out;
}

std::string format_tool_call(std::string_view user, std::vector<std::string> const& options)
{
    std::string out = std::string(kToolName) + "(user=" + quote(user) + ", intent_options=[";
    for (std::size_t i = 0; i < options.size(); ++i)
    {
        if (i > 0)
            out += ", ";
        out += quote(options[i]);
    }
    out += "])";
    return out;
}

std::string format_tool_call(std::string_view user, LabelSet const& options)
{
    std::vector<std::string> names;
    for (auto const& l: options)
        names.push_back(l.name);
    return format_tool_call(user, names);
}

std::string render_tool_response(RetrievalResult const& result)
{
    if (result.empty())
        return std::string(kNoHistorySentinel);
    std::ostringstream out;
    out << "Retrieved intent history (" << result.entries.size() << " entries):";
    std::size_t rank = 0;
    for (auto const& hit: result.entries)
    {
        out << '\n'
            << ++rank << ". (" << quote(hit.entry.user.str()) << ", " << quote(hit.entry.label.name) << ", "
            << quote(hit.entry.explanation.text) << ')';
    }
    return out.str();
}

std::vector<RetrievedTriple> parse_tool_response(std::string_view text)
{
    std::vector<RetrievedTriple> triples;
    std::istringstream in { std::string(text) };
    std::string line;
    while (std::getline(in, line))
    {
        std::size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i])))
            ++i;
        if (i == 0 || line.compare(i, 3, ". (") != 0 || line.back() != ')')
            continue;
        auto body = line.substr(i + 2);
        body.front() = '[';
        body.back() = ']';
        try
        {
            auto const j = nlohmann::json::parse(body);
            if (j.size() == 3)
                triples.push_back({ j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>() });
        }
        catch (nlohmann::json::exception const&)
        {
        }
    }
    return triples;
}

std::string const& default_prompt_template()
{
    static std::string const t = "Role: You are an intent recognition expert. Given user context, infer the underlying "
                                 "intent.\n"
                                 "\n"
                                 "Tool Available:\n"
                                 "{tool_signature}\n"
                                 "\n"
                                 "Output Format:\n"
                                 "{output_format}\n"
                                 "\n"
                                 "Intent Categories: {taxonomy}\n";
    return t;
}

std::string render_system_prompt(std::string_view prompt_template, Taxonomy const& taxonomy, StrategyMode mode)
{
    std::string labels;
    for (auto const& l: taxonomy.labels())
    {
        if (!labels.empty())
            labels += ", ";
        labels += l.name;
    }

    std::string tool;
    switch (mode)
    {
        case StrategyMode::ForcedNoRetrieval: tool = "None. Answer directly from the given context."; break;
        case StrategyMode::SelfDecided:
            tool = "- retrieve_intent_context(user, intent_options)\n"
                   "  Returns: [(user, intent_label, intent_explanation), ...]\n"
                   "Workflow:\n"
                   "- If confident: directly output <answer> and <intent_explanation>.\n"
                   "- If uncertain: call retrieve_intent_context with 2+ intent_options, review retrieved "
                   "patterns, then output the final answer.";
            break;
        case StrategyMode::ForcedRetrieval:
            tool = "- retrieve_intent_context(user, intent_options)\n"
                   "  Returns: [(user, intent_label, intent_explanation), ...]\n"
                   "Workflow:\n"
                   "- Always call retrieve_intent_context with 2+ intent_options first, review retrieved "
                   "patterns, then output the final answer.";
            break;
    }
    std::string const format = "- <answer>intent_label</answer>\n"
                               "- <intent_explanation>[PersonalMotivation] + [Context] + [Strategy]"
                               "</intent_explanation>";

    std::string out(prompt_template);
    auto replace = [&out](std::string_view key, std::string const& value) {
        for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
            out.replace(pos, key.size(), value);
    };
    replace("{tool_signature}", tool);
    replace("{output_format}", format);
    replace("{taxonomy}", labels);
    return out;
}

std::string render_context_message(Context const& ctx)
{
    std::string out = "User: " + ctx.user.str() + "\n";
    if (!ctx.situational_text.empty())
        out += "Context: " + ctx.situational_text + "\n";
    if (!ctx.meta.empty())
    {
        out += "Meta: ";
        bool first = true;
        for (auto const& [k, v]: ctx.meta)
        {
            if (!first)
                out += "; ";
            out += k + "=" + v;
            first = false;
        }
        out += "\n";
    }
    out += "Action: " + ctx.action_text;
    return out;
}

std::optional<ContextFields> parse_context_message(std::string_view content)
{
    if (!content.starts_with("User: "))
        return std::nullopt;
    auto const eol = content.find('\n');
    if (eol == std::string_view::npos)
        return std::nullopt;
    auto const action = content.rfind("\nAction: ");
    if (action == std::string_view::npos)
        return std::nullopt;
    return ContextFields { std::string(content.substr(6, eol - 6)), std::string(content.substr(action + 9)) };
}

bool prompt_offers_tool(std::string_view system_prompt)
{
    return system_prompt.find("retrieve_intent_context(user, intent_options)") != std::string_view::npos;
}

IntentExplanation templated_explanation(IntentLabel const& label, Context const& ctx)
{
    return {
        "[PersonalMotivation] This user tends to " + label.name + " in comparable situations. [Context] "
            + ctx.action_text + " [Strategy] Read the action as " + label.name + ".",
        ExplanationKind::Personalized,
    };
}

} // namespace intentkit
