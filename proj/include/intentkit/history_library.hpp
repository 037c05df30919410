// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/embedding.hpp>
#include <intentkit/types.hpp>

#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace intentkit
{

/// One row of the per-user intent history library.
struct HistoryEntry
{
    UserId user;
    IntentLabel label;
    IntentExplanation explanation;
    EmbeddingVector embedding;
    std::size_t seq = 0;
};

struct RetrievedEntry
{
    HistoryEntry entry;
    double similarity = 0.0;
};

/// Top-k hits sorted by similarity descending, ties by ascending seq.
struct RetrievalResult
{
    std::vector<RetrievedEntry> entries;
    LabelSet query_options;

    [[nodiscard]] bool empty() const noexcept { return entries.empty(); }
};

/// Library of (user, label, explanation) triples with filter-then-rank retrieval.
///
/// Retrieval keeps only entries of the querying user whose label is among the
/// requested options, ranks them by cosine similarity between the query text
/// embedding and the stored explanation embedding, and returns the top k.
/// The scan is exact. Readers share a lock; insert takes it exclusively.
class HistoryLibrary
{
  public:
    HistoryLibrary(Taxonomy taxonomy, EmbedderSpec const& spec);
    HistoryLibrary(Taxonomy taxonomy, std::shared_ptr<Embedder const> embedder);

    HistoryLibrary(HistoryLibrary&&) noexcept = default;
    HistoryLibrary& operator=(HistoryLibrary&&) noexcept = default;

    /// Embeds explanation.text and stores the entry. Throws InvalidArgument for labels outside the taxonomy.
    HistoryEntry insert(UserId const& user, IntentLabel const& label, IntentExplanation explanation);

    /// Stores a pre-embedded entry (used by load). seq is reassigned.
    HistoryEntry insert_embedded(UserId const& user, IntentLabel const& label, IntentExplanation explanation,
                                 EmbeddingVector embedding);

    /// Throws InvalidArgument when options is empty or k == 0.
    [[nodiscard]] RetrievalResult retrieve(UserId const& user, LabelSet const& options, std::string_view query_text,
                                           std::size_t k) const;
    [[nodiscard]] RetrievalResult retrieve(UserId const& user, LabelSet const& options, EmbeddingVector const& query,
                                           std::size_t k) const;

    [[nodiscard]] std::vector<HistoryEntry> entries() const;
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] Taxonomy const& taxonomy() const noexcept { return _taxonomy; }
    [[nodiscard]] Embedder const& embedder() const noexcept { return *_embedder; }

    /// Header line {"embedder": spec} followed by one entry object per line.
    [[nodiscard]] std::string serialize() const;
    void save(std::string const& path) const;
    [[nodiscard]] static HistoryLibrary deserialize(std::string_view text, Taxonomy taxonomy);
    [[nodiscard]] static HistoryLibrary load(std::string const& path, Taxonomy taxonomy);

  private:
    Taxonomy _taxonomy;
    std::shared_ptr<Embedder const> _embedder;
    std::vector<HistoryEntry> _entries;
    std::unique_ptr<std::shared_mutex> _mutex = std::make_unique<std::shared_mutex>();
};

/// Sort key used everywhere a ranked list of entries is produced.
[[nodiscard]] bool ranks_before(RetrievedEntry const& a, RetrievedEntry const& b) noexcept;

struct InsufficientData: DataError
{
    explicit InsufficientData(std::string const& what): DataError(what) {}
};

struct DiscriminabilityReport
{
    double intra_sim = 0.0;
    double inter_sim = 0.0;
    double user_loo_acc = 0.0;
    double global_r1 = 0.0;
    std::size_t qualifying_users = 0;
    std::size_t qualifying_samples = 0;
};

/// Separation and retrieval quality of a set of embedded explanations.
///
/// intra/inter_sim average cosine over unordered same-label / cross-label pairs.
/// user_loo_acc holds out each entry of every user with two or more entries,
/// takes the top-1 among that user's remaining entries (no label filter) and
/// macro-averages per-user hit rates. global_r1 does the same over the whole
/// corpus, excluding only the query itself.
[[nodiscard]] DiscriminabilityReport discriminability_report(std::span<HistoryEntry const> corpus);

/// Permutes labels among each user's entries (embeddings stay put). Deterministic in seed.
[[nodiscard]] std::vector<HistoryEntry> shuffle_labels_within_users(std::span<HistoryEntry const> corpus,
                                                                   std::uint64_t seed);

/// Expected user_loo_acc under shuffle_labels_within_users: per user sum_l n_l (n_l - 1) / (n (n - 1)),
/// macro-averaged over users with two or more entries.
[[nodiscard]] double user_loo_chance(std::span<HistoryEntry const> corpus);

} // namespace intentkit
