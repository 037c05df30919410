// SPDX-License-Identifier: Apache-2.0
#include <intentkit/types.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace intentkit
{

UserId::UserId(std::string id): _id(std::move(id))
{
    if (_id.empty())
        throw InvalidArgument("user id must be non-empty");
}

std::string canonical_form(std::string_view raw)
{
    std::string out;
    out.reserve(raw.size());
    bool pendingSpace = false;
    for (char c: raw)
    {
        auto const uc = static_cast<unsigned char>(c);
        if (std::isspace(uc))
        {
            pendingSpace = !out.empty();
            continue;
        }
        if (pendingSpace)
        {
            out.push_back(' ');
            pendingSpace = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

Taxonomy::Taxonomy(std::string name, std::vector<std::string> const& labels): _name(std::move(name))
{
    if (labels.empty())
        throw InvalidArgument("taxonomy '" + _name + "' is empty");
    for (auto const& raw: labels)
    {
        auto canon = canonical_form(raw);
        if (canon.empty())
            throw InvalidArgument("taxonomy '" + _name + "' contains a blank label");
        if (!_index.emplace(canon, _labels.size()).second)
            throw InvalidArgument("taxonomy '" + _name + "' has duplicate label '" + canon + "'");
        _labels.push_back(IntentLabel { std::move(canon) });
    }
}

Prediction Taxonomy::canonicalize(std::string_view raw) const
{
    auto const it = _index.find(canonical_form(raw));
    if (it == _index.end())
        return std::nullopt;
    return _labels[it->second];
}

bool Taxonomy::contains(IntentLabel const& label) const
{
    return _index.contains(label.name);
}

std::size_t Taxonomy::index_of(IntentLabel const& label) const
{
    auto const it = _index.find(label.name);
    if (it == _index.end())
        throw InvalidArgument("label '" + label.name + "' not in taxonomy '" + _name + "'");
    return it->second;
}

IntentLabel Taxonomy::require(std::string_view raw) const
{
    auto label = canonicalize(raw);
    if (!label)
        throw DataError("label '" + std::string(raw) + "' not in taxonomy '" + _name + "'");
    return *label;
}

namespace taxonomies
{
    Taxonomy const& mintrec()
    {
        static Taxonomy const t("mintrec",
                                { "doubt",     "acknowledge", "refuse",  "warn",    "emphasize",        "complain",
                                  "praise",    "apologize",   "thank",   "criticize", "care",           "agree",
                                  "oppose",    "taunt",       "flaunt",  "joke",    "ask for opinions", "confirm",
                                  "explain",   "invite",      "plan",    "inform",  "advise",           "arrange",
                                  "introduce", "comfort",     "leave",   "prevent", "greet",            "ask for help" });
        return t;
    }

    Taxonomy const& weibo()
    {
        static Taxonomy const t("weibo",
                                { "advertisement", "exhibition", "identity clarification", "intimate interaction",
                                  "personal record", "emotional venting", "social approval" });
        return t;
    }

    Taxonomy const& highlight()
    {
        static Taxonomy const t("highlight",
                                { "define or explain", "find subtypes or classifications", "compare with similar terms",
                                  "investigate historical context", "explore how-to operations",
                                  "verify and compare data", "analyze trends", "explore applications",
                                  "trace source and context", "understand reasons", "analyze viewpoints",
                                  "trace controversies" });
        return t;
    }

    Taxonomy load(std::string const& name_or_path)
    {
        if (name_or_path == "mintrec")
            return mintrec();
        if (name_or_path == "weibo")
            return weibo();
        if (name_or_path == "highlight")
            return highlight();

        std::ifstream in(name_or_path);
        if (!in)
            throw ConfigError("unknown taxonomy '" + name_or_path + "' (not a built-in and not a readable file)");
        std::vector<std::string> labels;
        std::string line;
        while (std::getline(in, line))
        {
            if (!canonical_form(line).empty())
                labels.push_back(line);
        }
        try
        {
            return Taxonomy(name_or_path, labels);
        }
        catch (InvalidArgument const& e)
        {
            throw ConfigError(e.what());
        }
    }
} // namespace taxonomies

bool IntentExplanation::has_personalized_segments() const
{
    auto const a = text.find("[PersonalMotivation]");
    if (a == std::string::npos)
        return false;
    auto const b = text.find("[Context]", a);
    if (b == std::string::npos)
        return false;
    return text.find("[Strategy]", b) != std::string::npos;
}

std::string_view to_string(Role role)
{
    switch (role)
    {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "user";
}

Role role_from_string(std::string_view s)
{
    if (s == "system")
        return Role::System;
    if (s == "user")
        return Role::User;
    if (s == "assistant")
        return Role::Assistant;
    if (s == "tool")
        return Role::Tool;
    throw DataError("unknown message role '" + std::string(s) + "'");
}

std::string_view to_string(ExplanationKind kind)
{
    return kind == ExplanationKind::Personalized ? "personalized" : "generic";
}

std::string_view to_string(Split split)
{
    return split == Split::Test ? "test" : "train";
}

std::vector<std::string> validate_trajectory(Trajectory const& t)
{
    std::vector<std::string> problems;
    auto const& m = t.messages;
    if (m.empty() || m.front().role != Role::System)
        problems.emplace_back("first message must have role system");
    bool anyToolCall = false;
    for (std::size_t i = 0; i < m.size(); ++i)
    {
        bool const shouldMask = m[i].role != Role::Assistant;
        if (m[i].loss_masked != shouldMask)
            problems.push_back("message " + std::to_string(i) + " has wrong loss mask");
        if (m[i].role == Role::Tool)
        {
            anyToolCall = true;
            if (i == 0 || m[i - 1].role != Role::Assistant)
                problems.push_back("tool message " + std::to_string(i) + " does not follow an assistant message");
        }
    }
    if (anyToolCall && !t.tool_called)
        problems.emplace_back("tool messages present but tool_called is false");
    return problems;
}

namespace
{
    std::string string_field(nlohmann::json const& j, char const* key, bool required)
    {
        auto const it = j.find(key);
        if (it == j.end() || it->is_null())
        {
            if (required)
                throw DataError(std::string("missing field '") + key + "'");
            return {};
        }
        if (!it->is_string())
            throw DataError(std::string("field '") + key + "' must be a string");
        return it->get<std::string>();
    }

    IntentRecord record_from_json(nlohmann::json const& j, Taxonomy const& taxonomy)
    {
        if (!j.is_object())
            throw DataError("record must be a JSON object");
        IntentRecord r;
        auto user = string_field(j, "user", true);
        if (user.empty())
            throw DataError("field 'user' must be non-empty");
        r.context.user = UserId(std::move(user));
        r.context.situational_text = string_field(j, "situational_text", false);
        r.context.action_text = string_field(j, "action_text", true);
        if (canonical_form(r.context.action_text).empty())
            throw DataError("field 'action_text' must be non-empty");
        r.gt_label = taxonomy.require(string_field(j, "gt_label", true));

        auto explanation = string_field(j, "explanation", false);
        if (!explanation.empty())
        {
            auto const kind = string_field(j, "explanation_kind", false);
            if (!kind.empty() && kind != "generic" && kind != "personalized")
                throw DataError("explanation_kind must be generic or personalized");
            r.explanation = IntentExplanation {
                std::move(explanation),
                kind == "personalized" ? ExplanationKind::Personalized : ExplanationKind::Generic,
            };
        }

        auto const split = string_field(j, "split", false);
        if (split == "test")
            r.split = Split::Test;
        else if (split.empty() || split == "train")
            r.split = Split::Train;
        else
            throw DataError("split must be train or test");

        if (auto const it = j.find("meta"); it != j.end() && !it->is_null())
        {
            if (!it->is_object())
                throw DataError("field 'meta' must be an object");
            for (auto const& [k, v]: it->items())
            {
                if (!v.is_string())
                    throw DataError("meta values must be strings");
                r.context.meta.emplace(k, v.get<std::string>());
            }
        }
        return r;
    }
} // namespace

RecordLoadReport parse_records(std::string_view jsonl, Taxonomy const& taxonomy)
{
    RecordLoadReport report;
    std::istringstream in { std::string(jsonl) };
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (canonical_form(line).empty())
            continue;
        try
        {
            report.records.push_back(record_from_json(nlohmann::json::parse(line), taxonomy));
            report.lines.push_back(lineNo);
        }
        catch (nlohmann::json::exception const& e)
        {
            report.rejected.emplace_back(lineNo, std::string("invalid JSON: ") + e.what());
        }
        catch (Error const& e)
        {
            report.rejected.emplace_back(lineNo, e.what());
        }
    }
    return report;
}

RecordLoadReport load_records(std::string const& path, Taxonomy const& taxonomy)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot read dataset '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_records(ss.str(), taxonomy);
}

std::string record_to_json_line(IntentRecord const& r)
{
    nlohmann::json j;
    j["user"] = r.context.user.str();
    j["situational_text"] = r.context.situational_text;
    j["action_text"] = r.context.action_text;
    j["gt_label"] = r.gt_label.name;
    if (r.explanation)
    {
        j["explanation"] = r.explanation->text;
        j["explanation_kind"] = std::string(to_string(r.explanation->kind));
    }
    else
    {
        j["explanation"] = nullptr;
        j["explanation_kind"] = nullptr;
    }
    j["split"] = std::string(to_string(r.split));
    j["meta"] = r.context.meta;
    return j.dump();
}

} // namespace intentkit
