// SPDX-License-Identifier: Apache-2.0
#include <intentkit/embedding.hpp>

#include "http.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace intentkit
{

double EmbeddingVector::norm() const
{
    return std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
}

void EmbedderSpec::validate() const
{
    switch (backend)
    {
        case EmbedderBackend::HashedBow:
            if (dim < 16)
                throw ConfigError("hashed_bow embedder requires dim >= 16");
            break;
        case EmbedderBackend::Remote:
            if (endpoint_url.empty())
                throw ConfigError("remote embedder requires an endpoint_url");
            break;
    }
}

void to_json(nlohmann::json& j, EmbedderSpec const& spec)
{
    if (spec.backend == EmbedderBackend::HashedBow)
        j = { { "backend", "hashed_bow" }, { "dim", spec.dim } };
    else
        j = { { "backend", "remote" }, { "endpoint_url", spec.endpoint_url }, { "model_name", spec.model_name } };
}

void from_json(nlohmann::json const& j, EmbedderSpec& spec)
{
    spec = EmbedderSpec {};
    auto const backend = j.at("backend").get<std::string>();
    if (backend == "hashed_bow")
    {
        spec.backend = EmbedderBackend::HashedBow;
        spec.dim = j.at("dim").get<int>();
    }
    else if (backend == "remote")
    {
        spec.backend = EmbedderBackend::Remote;
        spec.endpoint_url = j.at("endpoint_url").get<std::string>();
        spec.model_name = j.value("model_name", std::string {});
    }
    else
    {
        throw ConfigError("unknown embedder backend '" + backend + "'");
    }
}

std::uint64_t stable_token_hash(std::string_view token) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c: token)
    {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace
{
    /// Decodes one UTF-8 code point at text[i], advancing i. Invalid bytes decode as themselves.
    char32_t next_code_point(std::string_view text, std::size_t& i, std::size_t& len)
    {
        auto const b0 = static_cast<unsigned char>(text[i]);
        len = 1;
        char32_t cp = b0;
        if (b0 >= 0xF0)
        {
            len = 4;
            cp = b0 & 0x07;
        }
        else if (b0 >= 0xE0)
        {
            len = 3;
            cp = b0 & 0x0F;
        }
        else if (b0 >= 0xC0)
        {
            len = 2;
            cp = b0 & 0x1F;
        }
        if (i + len > text.size())
        {
            len = 1;
            cp = b0;
        }
        for (std::size_t k = 1; k < len; ++k)
            cp = (cp << 6) | (static_cast<unsigned char>(text[i + k]) & 0x3F);
        i += len;
        return cp;
    }

    bool is_separator(char32_t cp)
    {
        if (cp < 0x80)
            return !((cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || cp == '_');
        // Latin-1 punctuation and NBSP
        if (cp >= 0x00A0 && cp <= 0x00BF)
            return true;
        if (cp == 0x00D7 || cp == 0x00F7)
            return true;
        // General punctuation and Unicode spaces
        if (cp >= 0x2000 && cp <= 0x206F)
            return true;
        // CJK symbols and punctuation, incl. ideographic space
        if (cp >= 0x3000 && cp <= 0x303F)
            return true;
        // Fullwidth ASCII punctuation
        if ((cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40)
            || (cp >= 0xFF5B && cp <= 0xFF65))
            return true;
        return cp == 0xFEFF || cp == 0x1680;
    }
} // namespace

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size())
    {
        std::size_t const start = i;
        std::size_t len = 0;
        auto const cp = next_code_point(text, i, len);
        if (is_separator(cp))
        {
            if (!current.empty())
                tokens.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (len == 1 && cp < 0x80)
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(cp))));
        else
            current.append(text.substr(start, len));
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

void l2_normalize(std::span<double> values)
{
    double const n = std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
    if (n == 0.0)
        throw ZeroVector();
    for (auto& v: values)
        v /= n;
}

HashedBowEmbedder::HashedBowEmbedder(EmbedderSpec spec): _spec(std::move(spec))
{
    _spec.validate();
}

EmbeddingVector HashedBowEmbedder::embed(std::string_view text) const
{
    auto const tokens = tokenize(text);
    if (tokens.empty())
        throw EmptyText();
    EmbeddingVector v { std::vector<double>(static_cast<std::size_t>(_spec.dim), 0.0) };
    for (auto const& t: tokens)
        v.values[stable_token_hash(t) % static_cast<std::uint64_t>(_spec.dim)] += 1.0;
    l2_normalize(v.values);
    return v;
}

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec): _spec(std::move(spec))
{
    _spec.validate();
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const
{
    if (tokenize(text).empty())
        throw EmptyText();
    nlohmann::json const request = { { "model", _spec.model_name }, { "input", { std::string(text) } } };
    auto const reply = detail::post_json(_spec.endpoint_url, request, { _spec.timeout_ms, _spec.retries });
    EmbeddingVector v;
    try
    {
        v.values = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    }
    catch (nlohmann::json::exception const& e)
    {
        throw BackendError(std::string("unexpected embedding response: ") + e.what());
    }
    if (v.values.empty() || !std::ranges::all_of(v.values, [](double x) { return std::isfinite(x); }))
        throw BackendError("embedding endpoint returned an empty or non-finite vector");
    try
    {
        l2_normalize(v.values);
    }
    catch (ZeroVector const&)
    {
        throw BackendError("embedding endpoint returned a zero vector");
    }
    return v;
}

std::shared_ptr<Embedder const> make_embedder(EmbedderSpec const& spec)
{
    if (spec.backend == EmbedderBackend::Remote)
        return std::make_shared<RemoteEmbedder>(spec);
    return std::make_shared<HashedBowEmbedder>(spec);
}

EmbeddingVector embed(std::string_view text, EmbedderSpec const& spec)
{
    return make_embedder(spec)->embed(text);
}

double cosine(EmbeddingVector const& a, EmbeddingVector const& b)
{
    if (a.dim() != b.dim())
        throw DimensionMismatch(a.dim(), b.dim());
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i)
    {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw ZeroVector();
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

} // namespace intentkit
