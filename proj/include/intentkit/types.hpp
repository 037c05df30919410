// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/error.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace intentkit
{

/// Opaque user identity. Compared by exact, case-sensitive string match.
class UserId
{
  public:
    UserId() = default;
    explicit UserId(std::string id);

    [[nodiscard]] std::string const& str() const noexcept { return _id; }

    auto operator<=>(UserId const&) const = default;

  private:
    std::string _id;
};

/// A taxonomy member in canonical form. Obtain one through Taxonomy::canonicalize.
struct IntentLabel
{
    std::string name;

    auto operator<=>(IntentLabel const&) const = default;
};

using LabelSet = std::set<IntentLabel>;

/// Prediction outcome: a taxonomy label, or std::nullopt for an out-of-vocabulary answer.
using Prediction = std::optional<IntentLabel>;

/// Lowercase, trim, and collapse runs of internal whitespace to a single space.
[[nodiscard]] std::string canonical_form(std::string_view raw);

class Taxonomy
{
  public:
    Taxonomy(std::string name, std::vector<std::string> const& labels);

    [[nodiscard]] std::string const& name() const noexcept { return _name; }
    [[nodiscard]] std::vector<IntentLabel> const& labels() const noexcept { return _labels; }
    [[nodiscard]] std::size_t size() const noexcept { return _labels.size(); }

    /// Taxonomy member matching the canonical form of raw, or nullopt (NoMatch).
    [[nodiscard]] Prediction canonicalize(std::string_view raw) const;
    [[nodiscard]] bool contains(IntentLabel const& label) const;
    /// Position in declaration order; throws InvalidArgument for non-members.
    [[nodiscard]] std::size_t index_of(IntentLabel const& label) const;
    /// Canonicalize or throw DataError.
    [[nodiscard]] IntentLabel require(std::string_view raw) const;

  private:
    std::string _name;
    std::vector<IntentLabel> _labels;
    std::map<std::string, std::size_t> _index;
};

namespace taxonomies
{
    [[nodiscard]] Taxonomy const& mintrec();   // 30 intents
    [[nodiscard]] Taxonomy const& weibo();     // 7 intents
    [[nodiscard]] Taxonomy const& highlight(); // 12 intents

    /// Built-in by name ("mintrec", "weibo", "highlight"), else a file with one label per line.
    [[nodiscard]] Taxonomy load(std::string const& name_or_path);
} // namespace taxonomies

struct Context
{
    UserId user;
    std::string situational_text;
    std::string action_text;
    std::map<std::string, std::string> meta;
};

enum class ExplanationKind
{
    Generic,
    Personalized,
};

struct IntentExplanation
{
    std::string text;
    ExplanationKind kind = ExplanationKind::Generic;

    /// True when [PersonalMotivation], [Context] and [Strategy] markers appear in that order.
    [[nodiscard]] bool has_personalized_segments() const;
};

enum class Split
{
    Train,
    Test,
};

struct IntentRecord
{
    Context context;
    IntentLabel gt_label;
    std::optional<IntentExplanation> explanation;
    Split split = Split::Train;
};

enum class Role
{
    System,
    User,
    Assistant,
    Tool,
};

[[nodiscard]] std::string_view to_string(Role role);
[[nodiscard]] Role role_from_string(std::string_view s);
[[nodiscard]] std::string_view to_string(ExplanationKind kind);
[[nodiscard]] std::string_view to_string(Split split);

struct Message
{
    Role role = Role::User;
    std::string content;
    bool loss_masked = true;

    [[nodiscard]] static Message system(std::string content) { return { Role::System, std::move(content), true }; }
    [[nodiscard]] static Message user(std::string content) { return { Role::User, std::move(content), true }; }
    [[nodiscard]] static Message assistant(std::string content) { return { Role::Assistant, std::move(content), false }; }
    [[nodiscard]] static Message tool(std::string content) { return { Role::Tool, std::move(content), true }; }

    bool operator==(Message const&) const = default;
};

struct Trajectory
{
    std::vector<Message> messages;
    std::optional<IntentLabel> final_label;
    std::optional<IntentExplanation> final_explanation;
    bool tool_called = false;
    std::optional<LabelSet> options_emitted;
};

/// Structural check of message ordering and loss masks. Returns the problems found (empty when valid).
[[nodiscard]] std::vector<std::string> validate_trajectory(Trajectory const& t);

struct RecordLoadReport
{
    std::vector<IntentRecord> records;
    /// 1-based source line of each record.
    std::vector<std::size_t> lines;
    /// (1-based line number, reason) for rejected lines.
    std::vector<std::pair<std::size_t, std::string>> rejected;
};

/// Parse an IntentRecord JSONL file. Bad lines are reported, not fatal. Throws DataError if unreadable.
[[nodiscard]] RecordLoadReport load_records(std::string const& path, Taxonomy const& taxonomy);
[[nodiscard]] RecordLoadReport parse_records(std::string_view jsonl, Taxonomy const& taxonomy);
[[nodiscard]] std::string record_to_json_line(IntentRecord const& record);

} // namespace intentkit
