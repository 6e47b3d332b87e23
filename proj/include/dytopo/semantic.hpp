// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Descriptor embedding and query/key relevance scoring.
//
// relevance_matrix() is the OpenMP kernel used by the round loop;
// relevance_matrix_reference() is the serial double loop over
// cosine_similarity() that the kernel is tested against.

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dytopo/domain.hpp"

namespace dytopo::semantic {

class Embedder {
  public:
    virtual ~Embedder() = default;

    virtual EmbeddingVector embed(std::string_view text) = 0;
    /// Defaults to calling embed() per text.
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);
    [[nodiscard]] virtual std::size_t dimension() const = 0;
    /// Recorded in traces so a run can be replayed with the same encoder.
    [[nodiscard]] virtual std::string identity() const = 0;
};

/// Signed feature-hashing bag of words. Tokens are maximal runs of ASCII
/// alphanumerics (and bytes >= 0x80), lowercased. Each token is hashed with
/// seeded FNV-1a 64: bucket = h % d, sign = bit 32 of h (set -> -1). Counts
/// are summed per bucket and the result l2-normalized.
class HashingEmbedder final : public Embedder {
  public:
    static constexpr std::uint64_t kDefaultSeed = 0x2545F4914F6CDD1DULL;
    static constexpr std::size_t kDefaultDimension = 64;

    explicit HashingEmbedder(std::size_t dimension = kDefaultDimension,
                             std::uint64_t seed = kDefaultSeed);

    EmbeddingVector embed(std::string_view text) override;
    [[nodiscard]] std::size_t dimension() const override { return dimension_; }
    [[nodiscard]] std::string identity() const override;

    static std::vector<std::string> tokenize(std::string_view text);
    static std::uint64_t hash_token(std::string_view token, std::uint64_t seed) noexcept;

  private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

/// Recreates a HashingEmbedder from its identity() string; nullptr for any
/// other identity (remote encoders cannot be rebuilt from a trace).
std::unique_ptr<Embedder> embedder_from_identity(std::string_view identity);

/// Exact-text cache in front of another embedder. Safe for concurrent use.
class CachingEmbedder final : public Embedder {
  public:
    explicit CachingEmbedder(Embedder& inner) : inner_(inner) {}

    EmbeddingVector embed(std::string_view text) override;
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;
    [[nodiscard]] std::size_t dimension() const override { return inner_.dimension(); }
    [[nodiscard]] std::string identity() const override { return inner_.identity(); }

    [[nodiscard]] std::size_t hits() const;
    [[nodiscard]] std::size_t misses() const;

  private:
    Embedder& inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> cache_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

/// Row-major rows x dim matrix of embeddings.
struct EmbeddingMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> data;

    [[nodiscard]] const double* row(std::size_t i) const { return data.data() + i * dim; }
    bool operator==(const EmbeddingMatrix&) const = default;

    static EmbeddingMatrix from_rows(const std::vector<EmbeddingVector>& rows);
};

struct DescriptorEmbeddings {
    EmbeddingMatrix queries;  // row i = agent i's query
    EmbeddingMatrix keys;     // row i = agent i's key
};

/// outputs must be sorted by author with authors 0..N-1.
DescriptorEmbeddings embed_descriptors(const std::vector<RoundOutput>& outputs, Embedder& embedder);

/// (a.b) / (|a||b|) clamped to [-1, 1]; 0 when either norm is below 1e-12.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine_similarity(const double* a, const double* b, std::size_t dim) noexcept;

/// Serial reference: scores[i][j] = cosine_similarity(Q row i, K row j).
RelevanceMatrix relevance_matrix_reference(const EmbeddingMatrix& queries, const EmbeddingMatrix& keys);

/// Parallel kernel: normalizes rows once, then takes dot products. Agrees with
/// the reference within 1e-12.
RelevanceMatrix relevance_matrix(const EmbeddingMatrix& queries, const EmbeddingMatrix& keys);

}  // namespace dytopo::semantic
