// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <benchmark/benchmark.h>

#include "dytopo/semantic.hpp"

namespace {

dytopo::semantic::EmbeddingMatrix random_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    dytopo::semantic::EmbeddingMatrix m;
    m.rows = rows;
    m.dim = dim;
    m.data.resize(rows * dim);
    for (double& v : m.data) v = dist(rng);
    return m;
}

void BM_RelevanceReference(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const auto q = random_matrix(n, d, 1);
    const auto k = random_matrix(n, d, 2);
    for (auto _ : state) benchmark::DoNotOptimize(dytopo::semantic::relevance_matrix_reference(q, k));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}

void BM_RelevanceOmp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const auto q = random_matrix(n, d, 1);
    const auto k = random_matrix(n, d, 2);
    for (auto _ : state) benchmark::DoNotOptimize(dytopo::semantic::relevance_matrix(q, k));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}

}  // namespace

BENCHMARK(BM_RelevanceReference)->Args({8, 64})->Args({64, 384})->Args({256, 1024});
BENCHMARK(BM_RelevanceOmp)->Args({8, 64})->Args({64, 384})->Args({256, 1024});

BENCHMARK_MAIN();
