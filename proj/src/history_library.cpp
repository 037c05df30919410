// SPDX-License-Identifier: Apache-2.0
#include <intentkit/history_library.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>

namespace intentkit
{

bool ranks_before(RetrievedEntry const& a, RetrievedEntry const& b) noexcept
{
    if (a.similarity != b.similarity)
        return a.similarity > b.similarity;
    return a.entry.seq < b.entry.seq;
}

HistoryLibrary::HistoryLibrary(Taxonomy taxonomy, EmbedderSpec const& spec):
    HistoryLibrary(std::move(taxonomy), make_embedder(spec))
{
}

HistoryLibrary::HistoryLibrary(Taxonomy taxonomy, std::shared_ptr<Embedder const> embedder):
    _taxonomy(std::move(taxonomy)), _embedder(std::move(embedder))
{
    if (!_embedder)
        throw InvalidArgument("history library needs an embedder");
}

HistoryEntry HistoryLibrary::insert(UserId const& user, IntentLabel const& label, IntentExplanation explanation)
{
    if (!_taxonomy.contains(label))
        throw InvalidArgument("label '" + label.name + "' not in taxonomy '" + _taxonomy.name() + "'");
    // embed outside the lock; a slow remote call must not block readers
    auto embedding = _embedder->embed(explanation.text);
    return insert_embedded(user, label, std::move(explanation), std::move(embedding));
}

HistoryEntry HistoryLibrary::insert_embedded(UserId const& user, IntentLabel const& label,
                                             IntentExplanation explanation, EmbeddingVector embedding)
{
    if (!_taxonomy.contains(label))
        throw InvalidArgument("label '" + label.name + "' not in taxonomy '" + _taxonomy.name() + "'");
    std::unique_lock lock(*_mutex);
    if (!_entries.empty() && _entries.front().embedding.dim() != embedding.dim())
        throw DimensionMismatch(_entries.front().embedding.dim(), embedding.dim());
    HistoryEntry entry { user, label, std::move(explanation), std::move(embedding), _entries.size() };
    _entries.push_back(entry);
    return entry;
}

RetrievalResult HistoryLibrary::retrieve(UserId const& user, LabelSet const& options, std::string_view query_text,
                                         std::size_t k) const
{
    if (options.empty())
        throw InvalidArgument("retrieve needs at least one intent option");
    if (k == 0)
        throw InvalidArgument("retrieve needs k >= 1");
    return retrieve(user, options, _embedder->embed(query_text), k);
}

RetrievalResult HistoryLibrary::retrieve(UserId const& user, LabelSet const& options, EmbeddingVector const& query,
                                         std::size_t k) const
{
    if (options.empty())
        throw InvalidArgument("retrieve needs at least one intent option");
    if (k == 0)
        throw InvalidArgument("retrieve needs k >= 1");

    RetrievalResult result;
    result.query_options = options;
    std::shared_lock lock(*_mutex);
    for (auto const& e: _entries)
    {
        if (e.user == user && options.contains(e.label))
            result.entries.push_back({ e, cosine(query, e.embedding) });
    }
    lock.unlock();

    auto const keep = std::min(k, result.entries.size());
    std::partial_sort(result.entries.begin(), result.entries.begin() + static_cast<std::ptrdiff_t>(keep),
                      result.entries.end(), ranks_before);
    result.entries.resize(keep);
    return result;
}

std::vector<HistoryEntry> HistoryLibrary::entries() const
{
    std::shared_lock lock(*_mutex);
    return _entries;
}

std::size_t HistoryLibrary::size() const
{
    std::shared_lock lock(*_mutex);
    return _entries.size();
}

std::string HistoryLibrary::serialize() const
{
    std::ostringstream out;
    out << nlohmann::json { { "embedder", _embedder->spec() } }.dump() << '\n';
    std::shared_lock lock(*_mutex);
    for (auto const& e: _entries)
    {
        nlohmann::json const j = {
            { "seq", e.seq },
            { "user", e.user.str() },
            { "label", e.label.name },
            { "explanation", e.explanation.text },
            { "explanation_kind", std::string(to_string(e.explanation.kind)) },
            { "embedding", e.embedding.values },
        };
        out << j.dump() << '\n';
    }
    return out.str();
}

void HistoryLibrary::save(std::string const& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write library '" + path + "'");
    out << serialize();
}

HistoryLibrary HistoryLibrary::deserialize(std::string_view text, Taxonomy taxonomy)
{
    std::istringstream in { std::string(text) };
    std::string line;
    if (!std::getline(in, line))
        throw DataError("library file is empty");

    std::size_t lineNo = 1;
    try
    {
        auto const header = nlohmann::json::parse(line);
        auto spec = header.at("embedder").get<EmbedderSpec>();
        HistoryLibrary lib(std::move(taxonomy), spec);
        while (std::getline(in, line))
        {
            ++lineNo;
            if (line.empty())
                continue;
            auto const j = nlohmann::json::parse(line);
            auto const label = lib._taxonomy.require(j.at("label").get<std::string>());
            auto const kind = j.value("explanation_kind", std::string("generic"));
            IntentExplanation explanation { j.at("explanation").get<std::string>(),
                                            kind == "personalized" ? ExplanationKind::Personalized
                                                                   : ExplanationKind::Generic };
            EmbeddingVector embedding { j.at("embedding").get<std::vector<double>>() };
            lib.insert_embedded(UserId(j.at("user").get<std::string>()), label, std::move(explanation),
                                std::move(embedding));
        }
        return lib;
    }
    catch (nlohmann::json::exception const& e)
    {
        throw DataError("library line " + std::to_string(lineNo) + ": " + e.what());
    }
    catch (InvalidArgument const& e)
    {
        throw DataError("library line " + std::to_string(lineNo) + ": " + e.what());
    }
}

HistoryLibrary HistoryLibrary::load(std::string const& path, Taxonomy taxonomy)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read library '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str(), std::move(taxonomy));
}

namespace
{
    /// Index of the best-ranked candidate for query q among idx (excluding q). npos when none.
    std::size_t top1(std::span<HistoryEntry const> corpus, std::size_t q, std::span<std::size_t const> pool)
    {
        std::size_t best = std::string::npos;
        double bestSim = 0.0;
        for (auto const j: pool)
        {
            if (j == q)
                continue;
            double const sim = cosine(corpus[q].embedding, corpus[j].embedding);
            if (best == std::string::npos || sim > bestSim || (sim == bestSim && corpus[j].seq < corpus[best].seq))
            {
                best = j;
                bestSim = sim;
            }
        }
        return best;
    }
} // namespace

DiscriminabilityReport discriminability_report(std::span<HistoryEntry const> corpus)
{
    if (corpus.empty())
        throw InsufficientData("discriminability needs a non-empty corpus");

    DiscriminabilityReport r;
    double intraSum = 0.0;
    double interSum = 0.0;
    std::size_t intraN = 0;
    std::size_t interN = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i)
    {
        for (std::size_t j = i + 1; j < corpus.size(); ++j)
        {
            double const sim = cosine(corpus[i].embedding, corpus[j].embedding);
            if (corpus[i].label == corpus[j].label)
            {
                intraSum += sim;
                ++intraN;
            }
            else
            {
                interSum += sim;
                ++interN;
            }
        }
    }
    if (intraN == 0)
        throw InsufficientData("no same-label pair in corpus");
    if (interN == 0)
        throw InsufficientData("no cross-label pair in corpus");
    r.intra_sim = intraSum / static_cast<double>(intraN);
    r.inter_sim = interSum / static_cast<double>(interN);

    std::vector<std::size_t> all(corpus.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = i;
    std::size_t globalHits = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i)
    {
        auto const best = top1(corpus, i, all);
        if (best != std::string::npos && corpus[best].label == corpus[i].label)
            ++globalHits;
    }
    r.global_r1 = static_cast<double>(globalHits) / static_cast<double>(corpus.size());

    std::map<UserId, std::vector<std::size_t>> byUser;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        byUser[corpus[i].user].push_back(i);
    double userAccSum = 0.0;
    for (auto const& [user, idx]: byUser)
    {
        if (idx.size() < 2)
            continue;
        std::size_t hits = 0;
        for (auto const q: idx)
        {
            if (corpus[top1(corpus, q, idx)].label == corpus[q].label)
                ++hits;
        }
        userAccSum += static_cast<double>(hits) / static_cast<double>(idx.size());
        ++r.qualifying_users;
        r.qualifying_samples += idx.size();
    }
    if (r.qualifying_users > 0)
        r.user_loo_acc = userAccSum / static_cast<double>(r.qualifying_users);
    return r;
}

std::vector<HistoryEntry> shuffle_labels_within_users(std::span<HistoryEntry const> corpus, std::uint64_t seed)
{
    std::vector<HistoryEntry> out(corpus.begin(), corpus.end());
    std::map<UserId, std::vector<std::size_t>> byUser;
    for (std::size_t i = 0; i < out.size(); ++i)
        byUser[out[i].user].push_back(i);

    std::mt19937_64 rng(seed);
    for (auto const& [user, idx]: byUser)
    {
        // Fisher-Yates over this user's label slots
        for (std::size_t i = idx.size(); i > 1; --i)
        {
            auto const j = static_cast<std::size_t>(rng() % i);
            std::swap(out[idx[i - 1]].label, out[idx[j]].label);
        }
    }
    return out;
}

double user_loo_chance(std::span<HistoryEntry const> corpus)
{
    std::map<UserId, std::map<IntentLabel, std::size_t>> counts;
    for (auto const& e: corpus)
        ++counts[e.user][e.label];
    double sum = 0.0;
    std::size_t users = 0;
    for (auto const& [user, perLabel]: counts)
    {
        std::size_t n = 0;
        double same = 0.0;
        for (auto const& [label, c]: perLabel)
        {
            n += c;
            same += static_cast<double>(c) * static_cast<double>(c - 1);
        }
        if (n < 2)
            continue;
        sum += same / (static_cast<double>(n) * static_cast<double>(n - 1));
        ++users;
    }
    if (users == 0)
        throw InsufficientData("no user has two or more entries");
    return sum / static_cast<double>(users);
}

} // namespace intentkit
