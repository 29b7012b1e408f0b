/* Copyright 2026 The kvroof Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Per-iteration selection policies. Both operate on a snapshot of waiting
// work and are unit-agnostic about VRAM: callers may pass bytes or
// token-equivalents as long as `vram_needed` and `vram_free` agree.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace kvroof {

enum class Policy { kFifo, kUtilizationAware };

std::string_view to_string(Policy policy);
// Accepts "fifo" and "ua" / "utilization-aware".
Policy parse_policy(std::string_view text);

struct Candidate {
  size_t id = 0;
  double arrival_time = 0.0;
  int64_t remaining_tokens = 0;
  // VRAM the request must reserve to start; zero for requests already
  // resident from an earlier (chunked) iteration.
  double vram_needed = 0.0;
  bool resident = false;
};

struct Assignment {
  size_t id = 0;
  int64_t tokens = 0;
};

struct Selection {
  std::vector<Assignment> entries;  // in scheduling order
  int64_t total_tokens = 0;
  double vram_admitted = 0.0;

  bool empty() const { return entries.empty(); }
};

struct AgingConfig {
  double credit_per_second = 1.0;
  double credit_weight = 1.0;
};

// A waiting request whose credit reaches this value is "aged": it is
// admitted in priority order ahead of the utilization fill.
inline constexpr double kAgedCredit = 1.0;

// Scan in arrival order (residents first), admitting while both VRAM and
// budget allow. Stops at the first request that does not fit; the last
// admitted request may be chunked when `chunking` is set.
Selection schedule_fifo(std::span<const Candidate> queue, int64_t budget, double vram_free,
                        bool chunking);

// Residents continue first. Aged requests are then admitted in priority
// order (credit = wait * credit_per_second * credit_weight, ties by
// arrival); if one of them cannot fit, nothing else new is admitted so it
// cannot starve. Remaining budget is filled by an exact token-maximizing
// search over the first kExactWindow candidates, preferring earlier
// requests on ties, followed by a best-fit pass over the rest.
Selection schedule_utilization_aware(std::span<const Candidate> queue, int64_t budget,
                                     double vram_free, bool chunking, const AgingConfig& aging,
                                     double now);

inline constexpr size_t kExactWindow = 12;

}  // namespace kvroof
