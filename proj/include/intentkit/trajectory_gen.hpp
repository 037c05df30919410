// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/agent_runtime.hpp>
#include <intentkit/history_library.hpp>
#include <intentkit/llm_client.hpp>
#include <intentkit/types.hpp>

#include <span>
#include <string>
#include <vector>

namespace intentkit
{

struct GenConfig
{
    int i_max = 6;
    /// Feedback after a wrong answer on a turn later than this suggests retrieval.
    int feedback_escalation_turn = 2;
    bool reveal_on_exhaustion = true;
    std::size_t k = 3;
    double temperature = 0.0;
    std::string prompt_template = default_prompt_template();
    std::string feedback_text = "Your answer is incorrect; reconsider the context.";
    std::string escalated_feedback_text =
        "Your answer is incorrect. Consider retrieving this user's intent history.";
    /// Temporary gt-steering prompt; "{label}" is replaced. Never kept in the trajectory.
    std::string steering_template =
        "Before retrieving, make sure your intent_options also include \"{label}\". Reissue the tool call.";

    void validate() const;
};

enum class GenStatus
{
    CorrectDirect,
    CorrectAfterRetrieval,
    Revealed,
    /// No correct answer and reveal disabled; not a training example.
    Exhausted,
};

[[nodiscard]] std::string_view to_string(GenStatus status);

struct RetrievalEvent
{
    LabelSet options;
    bool gt_in_options = false;
    /// The steering regeneration produced a call that included gt.
    bool steered = false;
    /// gt had to be appended to the options directly.
    bool gt_appended = false;
};

struct GenOutcome
{
    Trajectory trajectory;
    GenStatus status = GenStatus::Exhausted;
    int attempts = 0;
    UserId user;
    IntentLabel gt;
    std::vector<RetrievalEvent> retrievals;
};

/// Produces one supervised trajectory for a labeled record with a teacher model.
///
/// Direct answers are checked against the ground truth; wrong ones get label-free
/// feedback, which starts suggesting retrieval after feedback_escalation_turn.
/// Tool calls whose options miss the ground truth trigger one regeneration under a
/// temporary steering message that is removed before retrieval; if the teacher still
/// omits it, it is added to the options. On exhaustion the ground truth is revealed as
/// the final assistant answer (reveal_on_exhaustion) or the outcome is Exhausted.
[[nodiscard]] GenOutcome generate_trajectory(IntentRecord const& record, Taxonomy const& taxonomy,
                                             HistoryLibrary const& lib, ChatBackend& teacher, GenConfig const& config);

struct LeakageViolation
{
    std::size_t index;
    std::string reason;
};

/// Empty when the trajectory is clean.
[[nodiscard]] std::vector<LeakageViolation> leakage_audit(Trajectory const& trajectory, IntentLabel const& gt,
                                                          GenConfig const& config = {});

struct ExportReport
{
    std::size_t written = 0;
    std::vector<std::pair<std::size_t, std::string>> rejected; // (outcome index, reason)
};

/// One JSON line: {"messages": [...], "status", "gt_label", "user"}.
[[nodiscard]] std::string sft_json_line(GenOutcome const& outcome);

/// Writes valid outcomes as JSONL. Outcomes with empty assistant turns or no final answer are rejected.
ExportReport export_sft_dataset(std::span<GenOutcome const> outcomes, std::string const& path);

struct SftExample
{
    std::vector<Message> messages;
    std::string status;
    std::string gt_label;
    std::string user;
};

/// Reads an exported file. Revealed trajectories are skipped unless include_revealed.
[[nodiscard]] std::vector<SftExample> load_sft_dataset(std::string const& path, bool include_revealed = false);

} // namespace intentkit
