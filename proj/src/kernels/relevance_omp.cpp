// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "dytopo/error.hpp"
#include "dytopo/semantic.hpp"

namespace dytopo::semantic {

namespace {

// Below this many multiply-adds the thread fork costs more than the work.
constexpr std::int64_t kParallelThreshold = 1 << 15;

std::vector<double> unit_rows(const EmbeddingMatrix& m, bool parallel) {
    std::vector<double> out(m.data);
    const auto rows = static_cast<std::int64_t>(m.rows);
    const std::size_t dim = m.dim;
#pragma omp parallel for schedule(static) if (parallel)
    for (std::int64_t r = 0; r < rows; ++r) {
        double* row = out.data() + static_cast<std::size_t>(r) * dim;
        double sq = 0.0;
        for (std::size_t c = 0; c < dim; ++c) sq += row[c] * row[c];
        const double norm = std::sqrt(sq);
        // Zero rows stay zero, so their dot products come out as 0.
        const double inv = norm < 1e-12 ? 0.0 : 1.0 / norm;
        for (std::size_t c = 0; c < dim; ++c) row[c] *= inv;
    }
    return out;
}

}  // namespace

RelevanceMatrix relevance_matrix(const EmbeddingMatrix& queries, const EmbeddingMatrix& keys) {
    if (queries.rows != keys.rows || queries.dim != keys.dim)
        throw Error(ErrorCode::kDimensionMismatch, "Q and K shapes differ");
    const std::size_t n = queries.rows;
    const std::size_t dim = queries.dim;
    const bool parallel = static_cast<std::int64_t>(n * n * dim) >= kParallelThreshold;

    const std::vector<double> q = unit_rows(queries, parallel);
    const std::vector<double> k = unit_rows(keys, parallel);
    std::vector<double> scores(n * n);

    const auto cells = static_cast<std::int64_t>(n * n);
#pragma omp parallel for schedule(static) if (parallel)
    for (std::int64_t cell = 0; cell < cells; ++cell) {
        const std::size_t i = static_cast<std::size_t>(cell) / n;
        const std::size_t j = static_cast<std::size_t>(cell) % n;
        const double* qi = q.data() + i * dim;
        const double* kj = k.data() + j * dim;
        double dot = 0.0;
        for (std::size_t c = 0; c < dim; ++c) dot += qi[c] * kj[c];
        scores[static_cast<std::size_t>(cell)] = std::clamp(dot, -1.0, 1.0);
    }
    return RelevanceMatrix(n, std::move(scores));
}

}  // namespace dytopo::semantic
