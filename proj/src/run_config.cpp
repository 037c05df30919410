// SPDX-License-Identifier: Apache-2.0
#include <intentkit/run_config.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace intentkit
{

std::string_view to_string(BackendKind kind)
{
    switch (kind)
    {
        case BackendKind::None: return "none";
        case BackendKind::Scripted: return "scripted";
        case BackendKind::HistoryEcho: return "history_echo";
        case BackendKind::Remote: return "remote";
    }
    return "none";
}

BackendKind backend_kind_from_string(std::string_view s)
{
    for (auto k: { BackendKind::None, BackendKind::Scripted, BackendKind::HistoryEcho, BackendKind::Remote })
    {
        if (to_string(k) == s)
            return k;
    }
    throw ConfigError("unknown backend kind '" + std::string(s) + "'");
}

namespace
{
    std::string trim(std::string_view s)
    {
        auto const b = s.find_first_not_of(" \t\r\n");
        if (b == std::string_view::npos)
            return {};
        auto const e = s.find_last_not_of(" \t\r\n");
        return std::string(s.substr(b, e - b + 1));
    }

    std::vector<std::string> split_list(std::string_view s)
    {
        std::vector<std::string> out;
        std::size_t start = 0;
        while (start <= s.size())
        {
            auto const comma = s.find(',', start);
            auto const item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (!item.empty())
                out.push_back(item);
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        return out;
    }

    [[noreturn]] void bad_value(std::string_view key, std::string_view value, char const* expected)
    {
        throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " + expected + ")");
    }

    double to_double(std::string_view key, std::string_view v)
    {
        auto const s = trim(v);
        char* end = nullptr;
        double const d = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d))
            bad_value(key, v, "a number");
        return d;
    }

    template <typename T>
    T to_integer(std::string_view key, std::string_view v)
    {
        auto const s = trim(v);
        T out {};
        auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
            bad_value(key, v, "an integer");
        return out;
    }

    bool to_bool(std::string_view key, std::string_view v)
    {
        auto const s = trim(v);
        if (s == "true" || s == "1" || s == "yes" || s == "on")
            return true;
        if (s == "false" || s == "0" || s == "no" || s == "off")
            return false;
        bad_value(key, v, "a boolean");
    }

    std::string fmt(double d)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", d);
        return buf;
    }

    template <typename T, typename F>
    std::string join(std::vector<T> const& items, F f)
    {
        std::string out;
        for (auto const& i: items)
        {
            if (!out.empty())
                out += ",";
            out += f(i);
        }
        return out;
    }

    struct Field
    {
        std::string key;
        std::function<void(RunConfig&, std::string_view)> set;
        std::function<std::string(RunConfig const&)> get;
    };

    template <typename M>
    Field str_field(std::string key, M member)
    {
        return { key, [member](RunConfig& c, std::string_view v) { member(c) = trim(v); },
                 [member](RunConfig const& c) { return member(const_cast<RunConfig&>(c)); } };
    }

    template <typename M>
    Field text_field(std::string key, M member)
    {
        return { key, [member](RunConfig& c, std::string_view v) { member(c) = std::string(v); },
                 [member](RunConfig const& c) { return member(const_cast<RunConfig&>(c)); } };
    }

    template <typename M>
    Field real_field(std::string key, M member)
    {
        return { key, [member, key](RunConfig& c, std::string_view v) { member(c) = to_double(key, v); },
                 [member](RunConfig const& c) { return fmt(member(const_cast<RunConfig&>(c))); } };
    }

    template <typename T, typename M>
    Field int_field(std::string key, M member)
    {
        return { key, [member, key](RunConfig& c, std::string_view v) { member(c) = to_integer<T>(key, v); },
                 [member](RunConfig const& c) { return std::to_string(member(const_cast<RunConfig&>(c))); } };
    }

    template <typename M>
    Field bool_field(std::string key, M member)
    {
        return { key, [member, key](RunConfig& c, std::string_view v) { member(c) = to_bool(key, v); },
                 [member](RunConfig const& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false"); } };
    }

    std::vector<Field> const& fields()
    {
        static std::vector<Field> const table = [] {
            std::vector<Field> f;
            f.push_back(str_field("data.dataset", [](RunConfig& c) -> auto& { return c.dataset; }));
            f.push_back(str_field("data.taxonomy", [](RunConfig& c) -> auto& { return c.taxonomy; }));
            f.push_back(str_field("data.library", [](RunConfig& c) -> auto& { return c.library; }));
            f.push_back(str_field("data.user", [](RunConfig& c) -> auto& { return c.user; }));

            f.push_back({ "embedder.backend",
                          [](RunConfig& c, std::string_view v) {
                              auto const s = trim(v);
                              if (s == "hashed_bow")
                                  c.embedder.backend = EmbedderBackend::HashedBow;
                              else if (s == "remote")
                                  c.embedder.backend = EmbedderBackend::Remote;
                              else
                                  bad_value("embedder.backend", v, "hashed_bow or remote");
                          },
                          [](RunConfig const& c) {
                              return std::string(c.embedder.backend == EmbedderBackend::Remote ? "remote" : "hashed_bow");
                          } });
            f.push_back(int_field<std::size_t>("embedder.dim", [](RunConfig& c) -> auto& { return c.embedder.dim; }));
            f.push_back(str_field("embedder.endpoint", [](RunConfig& c) -> auto& { return c.embedder.endpoint_url; }));
            f.push_back(str_field("embedder.model", [](RunConfig& c) -> auto& { return c.embedder.model_name; }));
            f.push_back(int_field<int>("embedder.timeout_ms", [](RunConfig& c) -> auto& { return c.embedder.timeout_ms; }));
            f.push_back(int_field<int>("embedder.retries", [](RunConfig& c) -> auto& { return c.embedder.retries; }));

            f.push_back({ "backend.kind",
                          [](RunConfig& c, std::string_view v) { c.backend.kind = backend_kind_from_string(trim(v)); },
                          [](RunConfig const& c) { return std::string(to_string(c.backend.kind)); } });
            f.push_back(str_field("backend.script", [](RunConfig& c) -> auto& { return c.backend.script; }));
            f.push_back(str_field("backend.fallback_label", [](RunConfig& c) -> auto& { return c.backend.fallback_label; }));
            f.push_back(str_field("backend.endpoint", [](RunConfig& c) -> auto& { return c.backend.remote.endpoint_url; }));
            f.push_back(str_field("backend.model", [](RunConfig& c) -> auto& { return c.backend.remote.model; }));
            f.push_back(int_field<int>("backend.timeout_ms", [](RunConfig& c) -> auto& { return c.backend.remote.timeout_ms; }));
            f.push_back(int_field<int>("backend.retries", [](RunConfig& c) -> auto& { return c.backend.remote.retries; }));
            f.push_back(int_field<int>("backend.backoff_ms", [](RunConfig& c) -> auto& { return c.backend.remote.backoff_ms; }));

            f.push_back({ "agent.mode",
                          [](RunConfig& c, std::string_view v) { c.agent.mode = strategy_mode_from_string(trim(v)); },
                          [](RunConfig const& c) { return std::string(to_string(c.agent.mode)); } });
            f.push_back(int_field<std::size_t>("agent.k", [](RunConfig& c) -> auto& { return c.agent.k; }));
            f.push_back(int_field<int>("agent.max_turns", [](RunConfig& c) -> auto& { return c.agent.max_turns; }));
            f.push_back(real_field("agent.temperature", [](RunConfig& c) -> auto& { return c.agent.temperature; }));
            f.push_back(int_field<int>("agent.max_tokens", [](RunConfig& c) -> auto& { return c.agent.max_tokens; }));
            f.push_back(int_field<std::size_t>("agent.samples", [](RunConfig& c) -> auto& { return c.samples; }));
            f.push_back(real_field("agent.sample_temperature", [](RunConfig& c) -> auto& { return c.sample_temperature; }));

            f.push_back(int_field<int>("generation.i_max", [](RunConfig& c) -> auto& { return c.generation.i_max; }));
            f.push_back(int_field<int>("generation.escalation_turn",
                                       [](RunConfig& c) -> auto& { return c.generation.feedback_escalation_turn; }));
            f.push_back(bool_field("generation.reveal", [](RunConfig& c) -> auto& { return c.generation.reveal_on_exhaustion; }));
            f.push_back(int_field<std::size_t>("generation.k", [](RunConfig& c) -> auto& { return c.generation.k; }));
            f.push_back(text_field("generation.feedback", [](RunConfig& c) -> auto& { return c.generation.feedback_text; }));
            f.push_back(text_field("generation.escalated_feedback",
                                   [](RunConfig& c) -> auto& { return c.generation.escalated_feedback_text; }));
            f.push_back(text_field("generation.steering", [](RunConfig& c) -> auto& { return c.generation.steering_template; }));

            f.push_back(real_field("reward.r_d", [](RunConfig& c) -> auto& { return c.reward.r_d; }));
            f.push_back(real_field("reward.r_f", [](RunConfig& c) -> auto& { return c.reward.r_f; }));
            f.push_back(real_field("reward.r_s", [](RunConfig& c) -> auto& { return c.reward.r_s; }));
            f.push_back(real_field("reward.r_e", [](RunConfig& c) -> auto& { return c.reward.r_e; }));
            f.push_back(real_field("reward.r_format", [](RunConfig& c) -> auto& { return c.reward.r_format; }));
            f.push_back(real_field("reward.easy_threshold", [](RunConfig& c) -> auto& { return c.reward.easy_threshold; }));
            f.push_back(real_field("reward.clip_eps", [](RunConfig& c) -> auto& { return c.reward.clip_eps; }));
            f.push_back(real_field("reward.kl_beta", [](RunConfig& c) -> auto& { return c.reward.kl_beta; }));
            f.push_back({ "reward.ablation",
                          [](RunConfig& c, std::string_view v) { c.ablation = reward_ablation_from_string(trim(v)); },
                          [](RunConfig const& c) { return std::string(to_string(c.ablation)); } });

            f.push_back(int_field<int>("policy.steps", [](RunConfig& c) -> auto& { return c.policy.steps; }));
            f.push_back(int_field<std::size_t>("policy.group_size", [](RunConfig& c) -> auto& { return c.policy.G; }));
            f.push_back(real_field("policy.lr", [](RunConfig& c) -> auto& { return c.policy.lr; }));
            f.push_back(real_field("policy.p_direct_easy", [](RunConfig& c) -> auto& { return c.p_direct_correct[0]; }));
            f.push_back(real_field("policy.p_direct_hard", [](RunConfig& c) -> auto& { return c.p_direct_correct[1]; }));
            f.push_back(real_field("policy.p_retrieval_easy", [](RunConfig& c) -> auto& { return c.p_retrieval_correct[0]; }));
            f.push_back(real_field("policy.p_retrieval_hard", [](RunConfig& c) -> auto& { return c.p_retrieval_correct[1]; }));
            f.push_back(real_field("policy.p_options_hit", [](RunConfig& c) -> auto& { return c.p_options_hit; }));

            f.push_back({ "experiment.ordering",
                          [](RunConfig& c, std::string_view v) { c.ordering = ordering_from_string(trim(v)); },
                          [](RunConfig const& c) { return std::string(to_string(c.ordering)); } });
            f.push_back(int_field<std::size_t>("experiment.checkpoint_every", [](RunConfig& c) -> auto& { return c.checkpoint_every; }));
            f.push_back({ "experiment.modes",
                          [](RunConfig& c, std::string_view v) {
                              c.grid.modes.clear();
                              for (auto const& m: split_list(v))
                                  c.grid.modes.push_back(strategy_mode_from_string(m));
                          },
                          [](RunConfig const& c) {
                              return join(c.grid.modes, [](StrategyMode m) { return std::string(to_string(m)); });
                          } });
            f.push_back({ "experiment.k_values",
                          [](RunConfig& c, std::string_view v) {
                              c.grid.k_values.clear();
                              for (auto const& k: split_list(v))
                                  c.grid.k_values.push_back(to_integer<std::size_t>("experiment.k_values", k));
                          },
                          [](RunConfig const& c) { return join(c.grid.k_values, [](std::size_t k) { return std::to_string(k); }); } });
            f.push_back({ "experiment.ablations",
                          [](RunConfig& c, std::string_view v) {
                              c.grid.reward_ablations.clear();
                              for (auto const& a: split_list(v))
                                  c.grid.reward_ablations.push_back(reward_ablation_from_string(a));
                          },
                          [](RunConfig const& c) {
                              return join(c.grid.reward_ablations, [](RewardAblation a) { return std::string(to_string(a)); });
                          } });
            f.push_back(int_field<std::size_t>("experiment.shuffles", [](RunConfig& c) -> auto& { return c.shuffles; }));
            f.push_back(bool_field("experiment.gen_gap", [](RunConfig& c) -> auto& { return c.gen_gap; }));
            auto optReal = [](std::string key, auto member) {
                return Field { key,
                               [member, key](RunConfig& c, std::string_view v) {
                                   if (trim(v).empty())
                                       member(c).reset();
                                   else
                                       member(c) = to_double(key, v);
                               },
                               [member](RunConfig const& c) {
                                   auto const& o = member(const_cast<RunConfig&>(c));
                                   return o ? fmt(*o) : std::string();
                               } };
            };
            f.push_back(optReal("experiment.gap_min", [](RunConfig& c) -> auto& { return c.gap_min; }));
            f.push_back(optReal("experiment.gap_max", [](RunConfig& c) -> auto& { return c.gap_max; }));

            f.push_back(int_field<std::uint64_t>("run.seed", [](RunConfig& c) -> auto& { return c.seed; }));
            f.push_back(str_field("run.output_dir", [](RunConfig& c) -> auto& { return c.output_dir; }));
            f.push_back(int_field<unsigned>("run.jobs", [](RunConfig& c) -> auto& { return c.jobs; }));
            f.push_back(bool_field("run.macro_over_taxonomy", [](RunConfig& c) -> auto& { return c.macro_over_taxonomy; }));
            return f;
        }();
        return table;
    }

    Field const& field(std::string_view key)
    {
        for (auto const& f: fields())
        {
            if (f.key == key)
                return f;
        }
        throw ConfigError("unknown config key '" + std::string(key) + "'");
    }
} // namespace

std::vector<std::string> const& RunConfig::keys()
{
    static std::vector<std::string> const k = [] {
        std::vector<std::string> out;
        for (auto const& f: fields())
            out.push_back(f.key);
        return out;
    }();
    return k;
}

void RunConfig::set(std::string_view key, std::string_view value)
{
    field(key).set(*this, value);
}

std::string RunConfig::get(std::string_view key) const
{
    return field(key).get(*this);
}

void RunConfig::apply_ini(std::string const& text)
{
    CLI::ConfigBase parser;
    parser.comment('#');
    // values are taken verbatim; list keys split on commas themselves
    parser.arrayBounds('\x1e', '\x1e');
    parser.arrayDelimiter('\x1f');
    std::istringstream in(text);
    std::vector<CLI::ConfigItem> items;
    try
    {
        items = parser.from_config(in);
    }
    catch (CLI::Error const& e)
    {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    for (auto const& item: items)
    {
        if (item.name == "++" || item.name == "--")
            continue;
        if (item.parents.size() != 1)
            throw ConfigError("config key '" + item.name + "' must appear inside a single [section]");
        std::string value;
        for (auto const& part: item.inputs)
        {
            if (!value.empty())
                value += ' ';
            value += part;
        }
        set(item.parents.front() + "." + item.name, value);
    }
}

void RunConfig::apply_ini_file(std::string const& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_ini(ss.str());
}

std::string env_name(std::string_view key)
{
    std::string out = "INTENTKIT_";
    for (char c: key)
        out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

void RunConfig::apply_env(std::function<std::optional<std::string>(std::string const&)> const& lookup)
{
    for (auto const& key: keys())
    {
        if (auto v = lookup(env_name(key)))
            set(key, *v);
    }
}

void RunConfig::apply_process_env()
{
    apply_env([](std::string const& name) -> std::optional<std::string> {
        if (char const* v = std::getenv(name.c_str()))
            return std::string(v);
        return std::nullopt;
    });
}

std::string RunConfig::canonical() const
{
    std::string out;
    for (auto const& f: fields())
    {
        if (f.key == "run.output_dir" || f.key == "run.jobs")
            continue;
        out += f.key + "=" + f.get(*this) + "\n";
    }
    return out;
}

std::string RunConfig::hash() const
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_token_hash(canonical())));
    return buf;
}

void RunConfig::validate() const
{
    if (taxonomy.empty())
        throw ConfigError("data.taxonomy must be set");
    embedder.validate();
    agent.validate();
    if (samples == 0)
        throw ConfigError("agent.samples must be >= 1");
    if (sample_temperature < 0.0)
        throw ConfigError("agent.sample_temperature must be >= 0");
    generation.validate();
    reward.validate();
    policy.validate();
    world().validate();
    grid.validate();
    if (checkpoint_every == 0)
        throw ConfigError("experiment.checkpoint_every must be >= 1");
    if (gap_min.has_value() != gap_max.has_value())
        throw ConfigError("experiment.gap_min and experiment.gap_max must be set together");
    if (gap_min && !(*gap_max > *gap_min))
        throw ConfigError("experiment.gap_max must exceed experiment.gap_min");
    if (output_dir.empty())
        throw ConfigError("run.output_dir must be set");
    switch (backend.kind)
    {
        case BackendKind::Scripted:
            if (backend.script.empty())
                throw ConfigError("backend.script is required for the scripted backend");
            break;
        case BackendKind::Remote:
            if (backend.remote.endpoint_url.empty() || backend.remote.model.empty())
                throw ConfigError("backend.endpoint and backend.model are required for the remote backend");
            if (backend.remote.timeout_ms <= 0 || backend.remote.retries < 0 || backend.remote.backoff_ms < 0)
                throw ConfigError("backend timeout/retries/backoff out of range");
            break;
        default: break;
    }
}

unsigned RunConfig::effective_jobs() const
{
    return jobs == 0 ? default_jobs() : jobs;
}

SyntheticWorld RunConfig::world() const
{
    auto w = SyntheticWorld::make_default(seed);
    w.p_direct_correct = p_direct_correct;
    w.p_retrieval_correct = p_retrieval_correct;
    w.p_options_hit = p_options_hit;
    return w;
}

TrainConfig RunConfig::train_config() const
{
    auto t = policy;
    t.reward = reward.ablated(ablation);
    return t;
}

std::vector<ScriptedBehavior> load_script_sessions(std::string const& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read script file '" + path + "'");
    std::vector<ScriptedBehavior> sessions;
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (trim(line).empty())
            continue;
        try
        {
            auto const j = nlohmann::json::parse(line);
            ScriptedBehavior steps;
            for (auto const& s: j.at("steps"))
                steps.push_back(ScriptStep::from_json(s));
            sessions.push_back(std::move(steps));
        }
        catch (nlohmann::json::exception const& e)
        {
            throw DataError(path + ":" + std::to_string(lineNo) + ": " + e.what());
        }
        catch (DataError const& e)
        {
            throw DataError(path + ":" + std::to_string(lineNo) + ": " + e.what());
        }
    }
    return sessions;
}

BackendFactory make_backend_factory(BackendSettings const& settings, Taxonomy const& taxonomy)
{
    switch (settings.kind)
    {
        case BackendKind::None: throw ConfigError("this command needs a model backend (backend.kind)");
        case BackendKind::Scripted:
        {
            auto sessions = std::make_shared<std::vector<ScriptedBehavior> const>(load_script_sessions(settings.script));
            return [sessions](std::size_t session) -> std::unique_ptr<ChatBackend> {
                if (session >= sessions->size())
                    throw DataError("script has no session " + std::to_string(session) + " (only "
                                    + std::to_string(sessions->size()) + ")");
                return std::make_unique<ScriptedBackend>((*sessions)[session]);
            };
        }
        case BackendKind::HistoryEcho:
        {
            auto fallback = settings.fallback_label.empty() ? taxonomy.labels().front()
                                                            : taxonomy.require(settings.fallback_label);
            return [taxonomy, fallback](std::size_t) -> std::unique_ptr<ChatBackend> {
                return std::make_unique<NearestHistoryBackend>(taxonomy, fallback);
            };
        }
        case BackendKind::Remote:
        {
            auto const remote = settings.remote;
            return [remote](std::size_t) -> std::unique_ptr<ChatBackend> { return std::make_unique<RemoteBackend>(remote); };
        }
    }
    throw ConfigError("unknown backend kind");
}

} // namespace intentkit
