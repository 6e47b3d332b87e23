// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <mutex>

#include "dytopo/domain.hpp"

namespace dytopo::llm {

struct UsageCounters {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::uint64_t request_count = 0;
    std::uint64_t wall_time_ms = 0;
    /// Set when any contributing call had no provider-reported usage.
    bool estimated = false;

    [[nodiscard]] std::uint64_t total_tokens() const noexcept { return prompt_tokens + completion_tokens; }
    [[nodiscard]] bool empty() const noexcept { return request_count == 0 && total_tokens() == 0; }

    UsageCounters& operator+=(const UsageCounters& o) noexcept {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        request_count += o.request_count;
        wall_time_ms += o.wall_time_ms;
        estimated = estimated || o.estimated;
        return *this;
    }

    bool operator==(const UsageCounters&) const = default;
};

/// Per-agent counters (kManagerId for the manager); totals are always the sum.
class UsageLedger {
  public:
    void record(AgentId agent, const UsageCounters& delta) {
        std::lock_guard lock(mutex_);
        per_agent_[agent] += delta;
    }

    [[nodiscard]] std::map<AgentId, UsageCounters> per_agent() const {
        std::lock_guard lock(mutex_);
        return per_agent_;
    }

    [[nodiscard]] UsageCounters total() const {
        std::lock_guard lock(mutex_);
        UsageCounters sum;
        for (const auto& [id, c] : per_agent_) sum += c;
        return sum;
    }

  private:
    mutable std::mutex mutex_;
    std::map<AgentId, UsageCounters> per_agent_;
};

}  // namespace dytopo::llm
