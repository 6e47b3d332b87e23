// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/semantic.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "dytopo/error.hpp"

namespace dytopo::semantic {

std::vector<EmbeddingVector> Embedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

// ---------------------------------------------------------------------------

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) throw Error(ErrorCode::kInvalidConfig, "embedding dimension");
}

std::vector<std::string> HashingEmbedder::tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c >= 0x80 || std::isalnum(c)) {
            cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::uint64_t HashingEmbedder::hash_token(std::string_view token, std::uint64_t seed) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (char ch : token) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

EmbeddingVector HashingEmbedder::embed(std::string_view text) {
    std::vector<double> acc(dimension_, 0.0);
    for (const auto& tok : tokenize(text)) {
        const std::uint64_t h = hash_token(tok, seed_);
        const double sign = ((h >> 32) & 1U) != 0 ? -1.0 : 1.0;
        acc[h % dimension_] += sign;
    }
    return EmbeddingVector::normalize(std::move(acc));
}

std::string HashingEmbedder::identity() const {
    std::ostringstream os;
    os << "hashing-fnv1a64/d=" << dimension_ << "/seed=" << seed_;
    return os.str();
}

std::unique_ptr<Embedder> embedder_from_identity(std::string_view identity) {
    constexpr std::string_view kPrefix = "hashing-fnv1a64/d=";
    if (identity.substr(0, kPrefix.size()) != kPrefix) return nullptr;
    identity.remove_prefix(kPrefix.size());
    const auto sep = identity.find("/seed=");
    if (sep == std::string_view::npos) return nullptr;
    std::size_t dim = 0;
    std::uint64_t seed = 0;
    const auto d = identity.substr(0, sep);
    const auto s = identity.substr(sep + 6);
    if (std::from_chars(d.data(), d.data() + d.size(), dim).ec != std::errc{}) return nullptr;
    if (std::from_chars(s.data(), s.data() + s.size(), seed).ec != std::errc{}) return nullptr;
    return std::make_unique<HashingEmbedder>(dim, seed);
}

// ---------------------------------------------------------------------------

EmbeddingVector CachingEmbedder::embed(std::string_view text) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(std::string(text)); it != cache_.end()) {
            ++hits_;
            return it->second;
        }
    }
    // Computed outside the lock; concurrent misses on the same text insert
    // identical values.
    EmbeddingVector v = inner_.embed(text);
    std::lock_guard lock(mutex_);
    ++misses_;
    cache_.insert_or_assign(std::string(text), v);
    return v;
}

std::vector<EmbeddingVector> CachingEmbedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_at;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto it = cache_.find(texts[i]); it != cache_.end()) {
                ++hits_;
                out[i] = it->second;
            } else {
                missing.push_back(texts[i]);
                missing_at.push_back(i);
            }
        }
    }
    if (missing.empty()) return out;
    auto fresh = inner_.embed_batch(missing);
    std::lock_guard lock(mutex_);
    for (std::size_t m = 0; m < missing.size(); ++m) {
        ++misses_;
        cache_.insert_or_assign(missing[m], fresh[m]);
        out[missing_at[m]] = std::move(fresh[m]);
    }
    return out;
}

std::size_t CachingEmbedder::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

std::size_t CachingEmbedder::misses() const {
    std::lock_guard lock(mutex_);
    return misses_;
}

// ---------------------------------------------------------------------------

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<EmbeddingVector>& rows) {
    EmbeddingMatrix m;
    m.rows = rows.size();
    m.dim = rows.empty() ? 0 : rows.front().dimension();
    m.data.reserve(m.rows * m.dim);
    for (const auto& r : rows) {
        if (r.dimension() != m.dim) throw Error(ErrorCode::kDimensionMismatch, "embedding rows differ in length");
        m.data.insert(m.data.end(), r.values().begin(), r.values().end());
    }
    return m;
}

DescriptorEmbeddings embed_descriptors(const std::vector<RoundOutput>& outputs, Embedder& embedder) {
    const std::size_t d = embedder.dimension();
    if (d == 0) throw Error(ErrorCode::kInvalidConfig, "embedding dimension");
    std::vector<EmbeddingVector> q;
    std::vector<EmbeddingVector> k;
    q.reserve(outputs.size());
    k.reserve(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const RoundOutput& out = outputs[i];
        if (out.author() != i) throw Error(ErrorCode::kMissingOutput, std::to_string(i));
        std::vector<EmbeddingVector> pair;
        try {
            pair = embedder.embed_batch({out.query_descriptor().text(), out.key_descriptor().text()});
        } catch (const std::exception& e) {
            throw Error(ErrorCode::kEmbedderFailure, std::to_string(i) + ": " + e.what());
        }
        if (pair.size() != 2 || pair[0].dimension() != d || pair[1].dimension() != d)
            throw Error(ErrorCode::kEmbedderFailure, std::to_string(i) + ": wrong embedding dimension");
        q.push_back(std::move(pair[0]));
        k.push_back(std::move(pair[1]));
    }
    DescriptorEmbeddings result{EmbeddingMatrix::from_rows(q), EmbeddingMatrix::from_rows(k)};
    result.queries.dim = result.keys.dim = d;
    return result;
}

double cosine_similarity(const double* a, const double* b, std::size_t dim) noexcept {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw Error(ErrorCode::kDimensionMismatch,
                    std::to_string(a.dimension()) + " vs " + std::to_string(b.dimension()));
    return cosine_similarity(a.values().data(), b.values().data(), a.dimension());
}

RelevanceMatrix relevance_matrix_reference(const EmbeddingMatrix& queries, const EmbeddingMatrix& keys) {
    if (queries.rows != keys.rows || queries.dim != keys.dim)
        throw Error(ErrorCode::kDimensionMismatch, "Q and K shapes differ");
    const std::size_t n = queries.rows;
    std::vector<double> scores(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            scores[i * n + j] = cosine_similarity(queries.row(i), keys.row(j), queries.dim);
        }
    }
    return RelevanceMatrix(n, std::move(scores));
}

}  // namespace dytopo::semantic
