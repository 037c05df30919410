// SPDX-License-Identifier: Apache-2.0
#include <intentkit/trajectory_gen.hpp>

#include <nlohmann/json.hpp>

#include <cctype>
#include <fstream>

namespace intentkit
{

void GenConfig::validate() const
{
    if (i_max < 1)
        throw ConfigError("i_max must be >= 1");
    if (i_max > 1 && (feedback_escalation_turn < 1 || feedback_escalation_turn >= i_max))
        throw ConfigError("feedback_escalation_turn must satisfy 1 <= turn < i_max");
    if (k == 0)
        throw ConfigError("k must be >= 1");
    if (steering_template.find("{label}") == std::string::npos)
        throw ConfigError("steering_template must contain {label}");
}

std::string_view to_string(GenStatus status)
{
    switch (status)
    {
        case GenStatus::CorrectDirect: return "correct_direct";
        case GenStatus::CorrectAfterRetrieval: return "correct_after_retrieval";
        case GenStatus::Revealed: return "revealed";
        case GenStatus::Exhausted: return "exhausted";
    }
    return "exhausted";
}

namespace
{
    std::string steering_message(GenConfig const& config, IntentLabel const& gt)
    {
        auto text = config.steering_template;
        text.replace(text.find("{label}"), 7, gt.name);
        return text;
    }

    std::string steering_marker(GenConfig const& config)
    {
        return config.steering_template.substr(0, config.steering_template.find("{label}"));
    }

    std::string lower(std::string_view s)
    {
        std::string out(s);
        for (auto& c: out)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    }

    bool names_label(std::string_view content, IntentLabel const& label)
    {
        auto const hay = lower(content);
        auto const& needle = label.name;
        auto isWord = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
        for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1))
        {
            bool const leftOk = pos == 0 || !isWord(hay[pos - 1]);
            auto const end = pos + needle.size();
            bool const rightOk = end >= hay.size() || !isWord(hay[end]);
            if (leftOk && rightOk)
                return true;
        }
        return false;
    }

    std::string ask(ChatBackend& teacher, std::vector<Message> const& messages, GenConfig const& config)
    {
        ChatRequest request { messages, config.temperature, 512, 1, true };
        return teacher.complete(request).at(0);
    }
} // namespace

GenOutcome generate_trajectory(IntentRecord const& record, Taxonomy const& taxonomy, HistoryLibrary const& lib,
                               ChatBackend& teacher, GenConfig const& config)
{
    config.validate();
    auto const& gt = record.gt_label;
    if (!taxonomy.contains(gt))
        throw InvalidArgument("ground truth '" + gt.name + "' not in taxonomy");
    auto const& ctx = record.context;

    GenOutcome out;
    out.user = ctx.user;
    out.gt = gt;
    auto& traj = out.trajectory;
    auto& msgs = traj.messages;
    msgs.push_back(Message::system(render_system_prompt(config.prompt_template, taxonomy, StrategyMode::SelfDecided)));
    msgs.push_back(Message::user(render_context_message(ctx)));

    for (int turn = 1; turn <= config.i_max; ++turn)
    {
        out.attempts = turn;
        auto const output = ask(teacher, msgs, config);
        msgs.push_back(Message::assistant(output));
        auto const parsed = parse_output(output);

        if (parsed.is_tool_call())
        {
            traj.tool_called = true;
            RetrievalEvent event;
            auto options = canonical_options(parsed.options, taxonomy);
            if (!options.contains(gt))
            {
                msgs.pop_back();
                msgs.push_back(Message::user(steering_message(config, gt)));
                auto const retry = ask(teacher, msgs, config);
                msgs.pop_back();

                auto const reparsed = parse_output(retry);
                auto retryOptions = reparsed.is_tool_call() ? canonical_options(reparsed.options, taxonomy) : LabelSet {};
                if (retryOptions.contains(gt))
                {
                    options = std::move(retryOptions);
                    msgs.push_back(Message::assistant(retry));
                    event.steered = true;
                }
                else
                {
                    options.insert(gt);
                    msgs.push_back(Message::assistant(format_tool_call(ctx.user.str(), options)));
                    event.gt_appended = true;
                }
            }
            event.options = options;
            event.gt_in_options = options.contains(gt);
            out.retrievals.push_back(event);

            if (!traj.options_emitted)
                traj.options_emitted.emplace();
            traj.options_emitted->insert(options.begin(), options.end());
            msgs.push_back(Message::tool(render_tool_response(lib.retrieve(ctx.user, options, ctx.action_text, config.k))));
            continue;
        }

        if (parsed.is_answer())
        {
            if (taxonomy.canonicalize(parsed.label_raw) == gt)
            {
                traj.final_label = gt;
                if (parsed.explanation && !parsed.explanation->empty())
                    traj.final_explanation = IntentExplanation { *parsed.explanation, ExplanationKind::Personalized };
                out.status = out.retrievals.empty() ? GenStatus::CorrectDirect : GenStatus::CorrectAfterRetrieval;
                return out;
            }
            msgs.push_back(Message::user(turn > config.feedback_escalation_turn ? config.escalated_feedback_text
                                                                               : config.feedback_text));
            continue;
        }

        msgs.push_back(Message::user(std::string(reminders::kFormat)));
    }

    if (!config.reveal_on_exhaustion)
    {
        out.status = GenStatus::Exhausted;
        return out;
    }
    auto explanation = record.explanation ? *record.explanation : templated_explanation(gt, ctx);
    msgs.push_back(Message::assistant(format_answer(gt.name, explanation.text)));
    traj.final_label = gt;
    traj.final_explanation = std::move(explanation);
    out.status = GenStatus::Revealed;
    return out;
}

std::vector<LeakageViolation> leakage_audit(Trajectory const& trajectory, IntentLabel const& gt,
                                            GenConfig const& config)
{
    std::vector<LeakageViolation> violations;
    auto const marker = steering_marker(config);
    auto const& msgs = trajectory.messages;

    std::size_t firstTool = msgs.size();
    for (std::size_t i = 0; i < msgs.size(); ++i)
    {
        if (msgs[i].role == Role::Tool)
        {
            firstTool = i;
            break;
        }
    }

    for (std::size_t i = 0; i < msgs.size(); ++i)
    {
        auto const& m = msgs[i];
        if (m.role != Role::Assistant && !marker.empty() && m.content.find(marker) != std::string::npos)
        {
            violations.push_back({ i, "gt-steering prompt retained" });
            continue;
        }
        // index 0 is the system prompt (lists every label), index 1 the original context
        if (i >= 2 && i < firstTool && (m.role == Role::User || m.role == Role::Tool) && names_label(m.content, gt))
            violations.push_back({ i, "names the ground-truth label before retrieval" });
    }
    return violations;
}

std::string sft_json_line(GenOutcome const& outcome)
{
    nlohmann::json messages = nlohmann::json::array();
    for (auto const& m: outcome.trajectory.messages)
        messages.push_back({ { "role", std::string(to_string(m.role)) }, { "content", m.content }, { "loss_masked", m.loss_masked } });
    nlohmann::json const j = {
        { "messages", std::move(messages) },
        { "status", std::string(to_string(outcome.status)) },
        { "gt_label", outcome.gt.name },
        { "user", outcome.user.str() },
    };
    return j.dump();
}

ExportReport export_sft_dataset(std::span<GenOutcome const> outcomes, std::string const& path)
{
    if (outcomes.empty())
        throw InvalidArgument("nothing to export");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write '" + path + "'");

    ExportReport report;
    for (std::size_t i = 0; i < outcomes.size(); ++i)
    {
        auto const& o = outcomes[i];
        if (o.status == GenStatus::Exhausted || !o.trajectory.final_label)
        {
            report.rejected.emplace_back(i, "no final answer");
            continue;
        }
        bool emptyAssistant = false;
        for (auto const& m: o.trajectory.messages)
        {
            if (m.role == Role::Assistant && canonical_form(m.content).empty())
                emptyAssistant = true;
        }
        if (emptyAssistant)
        {
            report.rejected.emplace_back(i, "empty assistant content");
            continue;
        }
        out << sft_json_line(o) << '\n';
        ++report.written;
    }
    if (!out)
        throw DataError("write to '" + path + "' failed");
    return report;
}

std::vector<SftExample> load_sft_dataset(std::string const& path, bool include_revealed)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read '" + path + "'");
    std::vector<SftExample> examples;
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (line.empty())
            continue;
        try
        {
            auto const j = nlohmann::json::parse(line);
            SftExample ex;
            ex.status = j.at("status").get<std::string>();
            if (ex.status == "revealed" && !include_revealed)
                continue;
            ex.gt_label = j.at("gt_label").get<std::string>();
            ex.user = j.at("user").get<std::string>();
            for (auto const& m: j.at("messages"))
            {
                ex.messages.push_back({ role_from_string(m.at("role").get<std::string>()),
                                        m.at("content").get<std::string>(), m.at("loss_masked").get<bool>() });
            }
            examples.push_back(std::move(ex));
        }
        catch (nlohmann::json::exception const& e)
        {
            throw DataError(path + ":" + std::to_string(lineNo) + ": " + e.what());
        }
    }
    return examples;
}

} // namespace intentkit
