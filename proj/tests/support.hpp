// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/history_library.hpp>
#include <intentkit/llm_client.hpp>
#include <intentkit/types.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testsupport
{

using namespace intentkit;

inline Taxonomy const& toy_taxonomy()
{
    static Taxonomy const t("toy", { "complain", "praise", "taunt", "inform", "joke", "thank", "agree", "warn" });
    return t;
}

inline IntentLabel L(std::string name)
{
    return IntentLabel { std::move(name) };
}

inline Context ctx(std::string user, std::string action, std::string situational = {})
{
    Context c;
    c.user = UserId(std::move(user));
    c.action_text = std::move(action);
    c.situational_text = std::move(situational);
    return c;
}

inline IntentRecord record(std::string user, std::string action, std::string gt,
                           std::optional<std::string> explanation = {}, Split split = Split::Train)
{
    IntentRecord r;
    r.context = ctx(std::move(user), std::move(action));
    r.gt_label = L(std::move(gt));
    if (explanation)
        r.explanation = IntentExplanation { *explanation, ExplanationKind::Generic };
    r.split = split;
    return r;
}

inline EmbedderSpec bow(std::size_t dim = 256)
{
    EmbedderSpec s;
    s.backend = EmbedderBackend::HashedBow;
    s.dim = dim;
    return s;
}

inline ScriptedBackend scripted(std::vector<ScriptStep> steps)
{
    return ScriptedBackend(std::move(steps));
}

/// One user whose label is determined by a distinct token in the action text.
/// n_per_label records per label, in label-major order.
inline std::vector<IntentRecord> separability_records(std::string const& user, Taxonomy const& tax,
                                                      std::size_t labels, std::size_t n_per_label)
{
    std::vector<IntentRecord> out;
    for (std::size_t l = 0; l < labels; ++l)
    {
        for (std::size_t i = 0; i < n_per_label; ++i)
        {
            auto const token = "sigtok" + std::to_string(l);
            out.push_back(record(user, "message " + token + " " + token + " " + token, tax.labels()[l].name));
        }
    }
    return out;
}

struct TempDir
{
    std::filesystem::path path;

    TempDir()
    {
        static std::mt19937_64 rng(std::random_device {}());
        path = std::filesystem::temp_directory_path() / ("intentkit_test_" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(TempDir const&) = delete;
    TempDir& operator=(TempDir const&) = delete;

    [[nodiscard]] std::string file(std::string const& name) const { return (path / name).string(); }
};

inline std::string slurp(std::string const& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(std::string const& path, std::string const& content)
{
    std::ofstream out(path, std::ios::binary);
    out << content;
}

} // namespace testsupport
