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

// Iteration-level prefill scheduler simulation with KV offloading.
//
// Each iteration the policy picks work subject to the token budget and free
// VRAM. Newly admitted requests reserve (K + T) * B_kv bytes and load their
// K cached tokens over one shared host-device channel, in selection order;
// the batch then computes its scheduled tokens. Iteration length follows
// the same overlap rule as a single request:
//
//   duration = t_transfer + t_compute - alpha * min(t_transfer, t_compute)
//
// A request's first token is produced at the end of the iteration that
// computes its last prefill token; its VRAM is released at that point.
// Chunked requests stay resident, keep their reservation and continue in
// later iterations without further transfers.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kvroof/catalog.h"
#include "kvroof/scheduler.h"
#include "kvroof/workload.h"

namespace kvroof {

struct PowerProxyConfig {
  double idle_watts = 0.0;
  double peak_watts = 0.0;
};

struct SimConfig {
  std::string model_name;
  std::string hw_name;
  BandwidthMode bandwidth_mode = BandwidthMode::kSustained;
  int64_t token_budget = 4000;
  double overlap_alpha = 0.0;
  bool allow_chunked_prefill = true;
  std::optional<PowerProxyConfig> power_proxy;
  AgingConfig aging;
  // Replaces the hardware entry's vram_effective when set (bytes).
  std::optional<double> vram_effective;
};

// Throws ConfigError for invalid budgets, alpha, power or aging settings.
void validate(const SimConfig& config);

// A config bound to concrete catalog entries.
struct SimSetup {
  SimConfig config;
  ModelSpec model;
  HardwareSpec hw;

  double vram_capacity() const { return config.vram_effective.value_or(hw.vram_effective); }
};

SimSetup resolve(const SimConfig& config, const Catalog& catalog);

enum class RequestState { kQueued, kTransferring, kReady, kRunning, kDone };

std::string_view to_string(RequestState state);

// Queued -> Transferring -> Ready -> Running -> Done, with Transferring
// skipped exactly when the request has no cached tokens.
bool is_legal_transition(RequestState from, RequestState to, int64_t cached_tokens);

struct SimRequest {
  size_t id = 0;
  std::string source_id;
  double arrival_time = 0.0;
  int64_t cached_tokens = 0;
  int64_t prefill_tokens = 1;
  RequestState state = RequestState::kQueued;
  int64_t remaining_prefill = 0;
  std::optional<double> ttft;
  std::vector<RequestState> history;  // every state entered, in order

  // Throws std::logic_error on an illegal transition.
  void advance(RequestState next);
};

struct IterationStats {
  size_t index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  int64_t scheduled_tokens = 0;
  double vram_used = 0.0;  // bytes reserved while the iteration runs
  size_t queue_depth = 0;  // waiting requests left unscheduled
  bool busy = false;
  double transfer_seconds = 0.0;
  double compute_seconds = 0.0;
  std::vector<Assignment> assignments;
};

struct Rejection {
  size_t id = 0;
  std::string source_id;
  std::string reason;
};

struct SimReport {
  Policy policy = Policy::kFifo;
  std::vector<IterationStats> iterations;
  // Every input request, indexed by input position. Rejected requests
  // never leave Queued and have no ttft.
  std::vector<SimRequest> requests;
  std::vector<Rejection> rejections;
  double mean_sched_tokens = 0.0;
  double p50_sched_tokens = 0.0;
  double p90_sched_tokens = 0.0;
  double makespan = 0.0;  // first arrival to last iteration end
  double compute_busy_fraction = 0.0;
  double transfer_busy_fraction = 0.0;
  std::optional<double> mean_power_watts;
  double mean_ttft = 0.0;
  double p50_ttft = 0.0;
  double p99_ttft = 0.0;
};

// Requests must be sorted by arrival time; records without an arrival time
// are treated as arriving at 0.
SimReport run_sim(const SimSetup& setup, std::span<const RequestRecord> requests, Policy policy);

// idle + (peak - idle) * compute_busy_fraction. Throws ConfigError if
// peak < idle.
double power_proxy(const SimReport& report, double idle_watts, double peak_watts);

struct PolicyComparison {
  std::vector<SimReport> reports;  // one per policy, in the order given
  // ttft_deltas[i][r]: policy i minus policy 0 for request r (NaN if r was
  // rejected).
  std::vector<std::vector<double>> ttft_deltas;
};

PolicyComparison compare_policies(const SimSetup& setup, std::span<const RequestRecord> requests,
                                  std::span<const Policy> policies);

}  // namespace kvroof
