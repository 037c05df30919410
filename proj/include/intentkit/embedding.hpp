// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <intentkit/error.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace intentkit
{

struct EmbeddingVector
{
    std::vector<double> values;

    [[nodiscard]] std::size_t dim() const noexcept { return values.size(); }
    [[nodiscard]] double norm() const;

    bool operator==(EmbeddingVector const&) const = default;
};

enum class EmbedderBackend
{
    HashedBow,
    Remote,
};

struct EmbedderSpec
{
    EmbedderBackend backend = EmbedderBackend::HashedBow;
    int dim = 256;
    std::string endpoint_url;
    std::string model_name;
    int timeout_ms = 10000;
    int retries = 2;

    /// Throws ConfigError when the spec is unusable.
    void validate() const;

    bool operator==(EmbedderSpec const&) const = default;
};

void to_json(nlohmann::json& j, EmbedderSpec const& spec);
void from_json(nlohmann::json const& j, EmbedderSpec& spec);

struct EmptyText: InvalidArgument
{
    EmptyText(): InvalidArgument("cannot embed empty text") {}
};

struct DimensionMismatch: InvalidArgument
{
    DimensionMismatch(std::size_t a, std::size_t b):
        InvalidArgument("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b))
    {
    }
};

struct ZeroVector: InvalidArgument
{
    ZeroVector(): InvalidArgument("cosine of a zero vector is undefined") {}
};

class Embedder
{
  public:
    virtual ~Embedder() = default;
    [[nodiscard]] virtual EmbeddingVector embed(std::string_view text) const = 0;
    [[nodiscard]] virtual EmbedderSpec const& spec() const noexcept = 0;
};

/// 64-bit FNV-1a over the UTF-8 bytes of a token.
[[nodiscard]] std::uint64_t stable_token_hash(std::string_view token) noexcept;

/// Lowercases ASCII and splits on Unicode whitespace and punctuation. CJK runs stay whole.
[[nodiscard]] std::vector<std::string> tokenize(std::string_view text);

/// Bag of words: token counts hashed into dim buckets, then L2-normalized.
class HashedBowEmbedder final: public Embedder
{
  public:
    explicit HashedBowEmbedder(EmbedderSpec spec);
    [[nodiscard]] EmbeddingVector embed(std::string_view text) const override;
    [[nodiscard]] EmbedderSpec const& spec() const noexcept override { return _spec; }

  private:
    EmbedderSpec _spec;
};

/// POSTs {"model", "input": [text]} and L2-normalizes data[0].embedding.
class RemoteEmbedder final: public Embedder
{
  public:
    explicit RemoteEmbedder(EmbedderSpec spec);
    [[nodiscard]] EmbeddingVector embed(std::string_view text) const override;
    [[nodiscard]] EmbedderSpec const& spec() const noexcept override { return _spec; }

  private:
    EmbedderSpec _spec;
};

[[nodiscard]] std::shared_ptr<Embedder const> make_embedder(EmbedderSpec const& spec);

[[nodiscard]] EmbeddingVector embed(std::string_view text, EmbedderSpec const& spec);

/// Cosine similarity clamped to [-1, 1].
[[nodiscard]] double cosine(EmbeddingVector const& a, EmbeddingVector const& b);

/// Scales in place to unit L2 norm. Throws ZeroVector for an all-zero input.
void l2_normalize(std::span<double> values);

} // namespace intentkit
