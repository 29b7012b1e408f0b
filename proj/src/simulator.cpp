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

#include "kvroof/simulator.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "kvroof/analytics.h"
#include "kvroof/errors.h"

namespace kvroof {

void validate(const SimConfig& c) {
  if (c.token_budget < 1) {
    throw ConfigError(fmt::format("token_budget must be >= 1, got {}", c.token_budget));
  }
  if (!(c.overlap_alpha >= 0.0 && c.overlap_alpha <= 1.0)) {
    throw ConfigError(fmt::format("overlap_alpha must be in [0, 1], got {}", c.overlap_alpha));
  }
  if (c.power_proxy && c.power_proxy->peak_watts < c.power_proxy->idle_watts) {
    throw ConfigError("power_proxy: peak_watts must be >= idle_watts");
  }
  if (!(c.aging.credit_per_second >= 0.0) || !(c.aging.credit_weight >= 0.0)) {
    throw ConfigError("aging credits must be non-negative");
  }
  if (c.vram_effective && !(*c.vram_effective > 0.0)) {
    throw ConfigError("vram_effective override must be > 0");
  }
}

SimSetup resolve(const SimConfig& config, const Catalog& catalog) {
  validate(config);
  return SimSetup{config, catalog.model(config.model_name), catalog.hw(config.hw_name)};
}

std::string_view to_string(RequestState state) {
  switch (state) {
    case RequestState::kQueued: return "queued";
    case RequestState::kTransferring: return "transferring";
    case RequestState::kReady: return "ready";
    case RequestState::kRunning: return "running";
    case RequestState::kDone: return "done";
  }
  return "?";
}

bool is_legal_transition(RequestState from, RequestState to, int64_t cached_tokens) {
  switch (from) {
    case RequestState::kQueued:
      return cached_tokens > 0 ? to == RequestState::kTransferring : to == RequestState::kReady;
    case RequestState::kTransferring: return to == RequestState::kReady;
    case RequestState::kReady: return to == RequestState::kRunning;
    case RequestState::kRunning: return to == RequestState::kDone;
    case RequestState::kDone: return false;
  }
  return false;
}

void SimRequest::advance(RequestState next) {
  if (!is_legal_transition(state, next, cached_tokens)) {
    throw std::logic_error(fmt::format("request {}: illegal transition {} -> {}", id,
                                       to_string(state), to_string(next)));
  }
  state = next;
  history.push_back(next);
}

namespace {

double nearest_rank_of(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return nearest_rank(v, p);
}

}  // namespace

SimReport run_sim(const SimSetup& setup, std::span<const RequestRecord> records, Policy policy) {
  const SimConfig& cfg = setup.config;
  validate(cfg);
  validate(setup.model);
  validate(setup.hw);

  const double kv_bytes = kv_bytes_per_token(setup.model);
  const double flops = flops_per_token(setup.model);
  const double bandwidth = setup.hw.bandwidth(cfg.bandwidth_mode);
  const double compute = setup.hw.compute_throughput;
  const double vram_capacity = setup.vram_capacity();

  SimReport report;
  report.policy = policy;
  report.requests.reserve(records.size());
  std::vector<bool> rejected(records.size(), false);
  std::vector<double> footprint(records.size(), 0.0);
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    SimRequest r;
    r.id = i;
    r.source_id = rec.source_id;
    r.arrival_time = rec.arrival_time.value_or(0.0);
    r.cached_tokens = rec.cached_tokens;
    r.prefill_tokens = rec.prefill_tokens;
    r.remaining_prefill = rec.prefill_tokens;
    r.history.push_back(RequestState::kQueued);
    if (i > 0 && r.arrival_time < report.requests.back().arrival_time) {
      throw DataError(fmt::format("request {} arrives before its predecessor", i));
    }
    footprint[i] = static_cast<double>(r.cached_tokens + r.prefill_tokens) * kv_bytes;
    if (footprint[i] > vram_capacity) {
      rejected[i] = true;
      report.rejections.push_back({i, r.source_id, "KV footprint exceeds effective VRAM"});
    } else if (!cfg.allow_chunked_prefill && r.prefill_tokens > cfg.token_budget) {
      rejected[i] = true;
      report.rejections.push_back({i, r.source_id, "prefill exceeds token budget without chunking"});
    }
    report.requests.push_back(std::move(r));
  }
  if (records.empty()) return report;

  auto& reqs = report.requests;
  std::vector<size_t> waiting;
  std::vector<size_t> residents;
  std::vector<bool> scheduled_now(reqs.size(), false);
  size_t next_arrival = 0;
  double now = reqs.front().arrival_time;
  const double start_time = now;
  double vram_used = 0.0;
  double total_transfer = 0.0;
  double total_compute = 0.0;

  std::vector<Candidate> candidates;
  while (true) {
    while (next_arrival < reqs.size() && reqs[next_arrival].arrival_time <= now) {
      if (!rejected[next_arrival]) waiting.push_back(next_arrival);
      ++next_arrival;
    }
    if (waiting.empty() && residents.empty()) {
      if (next_arrival >= reqs.size()) break;
      now = std::max(now, reqs[next_arrival].arrival_time);
      continue;
    }

    candidates.clear();
    for (size_t id : residents) {
      candidates.push_back({id, reqs[id].arrival_time, reqs[id].remaining_prefill, 0.0, true});
    }
    for (size_t id : waiting) {
      candidates.push_back({id, reqs[id].arrival_time, reqs[id].remaining_prefill, footprint[id], false});
    }
    const double vram_free = vram_capacity - vram_used;
    Selection sel = policy == Policy::kFifo
                        ? schedule_fifo(candidates, cfg.token_budget, vram_free,
                                        cfg.allow_chunked_prefill)
                        : schedule_utilization_aware(candidates, cfg.token_budget, vram_free,
                                                     cfg.allow_chunked_prefill, cfg.aging, now);
    if (sel.empty()) {
      // Only possible while something still holds VRAM, which cannot happen
      // with an empty selection since residents always get budget first.
      throw std::logic_error("scheduler made no progress");
    }

    IterationStats it;
    it.index = report.iterations.size();
    it.t_start = now;
    for (const auto& a : sel.entries) {
      SimRequest& r = reqs[a.id];
      if (r.state == RequestState::kQueued) {
        vram_used += footprint[a.id];
        if (r.cached_tokens > 0) {
          r.advance(RequestState::kTransferring);
          it.transfer_seconds += static_cast<double>(r.cached_tokens) * kv_bytes / bandwidth;
        }
        r.advance(RequestState::kReady);
        r.advance(RequestState::kRunning);
      }
      scheduled_now[a.id] = true;
      it.scheduled_tokens += a.tokens;
    }
    it.compute_seconds = static_cast<double>(it.scheduled_tokens) * flops / compute;
    it.t_end = now + overlapped_seconds(it.transfer_seconds, it.compute_seconds, cfg.overlap_alpha);
    it.vram_used = vram_used;
    it.busy = it.scheduled_tokens > 0;
    it.assignments = sel.entries;

    for (const auto& a : sel.entries) {
      SimRequest& r = reqs[a.id];
      r.remaining_prefill -= a.tokens;
      if (r.remaining_prefill == 0) {
        r.advance(RequestState::kDone);
        r.ttft = it.t_end - r.arrival_time;
        vram_used -= footprint[a.id];
      }
    }
    std::erase_if(waiting, [&](size_t id) { return scheduled_now[id]; });
    for (const auto& a : sel.entries) {
      if (reqs[a.id].state == RequestState::kRunning &&
          std::find(residents.begin(), residents.end(), a.id) == residents.end()) {
        residents.push_back(a.id);
      }
    }
    std::erase_if(residents, [&](size_t id) { return reqs[id].state == RequestState::kDone; });
    for (const auto& a : sel.entries) scheduled_now[a.id] = false;
    it.queue_depth = waiting.size();

    total_transfer += it.transfer_seconds;
    total_compute += it.compute_seconds;
    now = it.t_end;
    report.iterations.push_back(std::move(it));
  }

  std::vector<double> sched;
  sched.reserve(report.iterations.size());
  for (const auto& it : report.iterations) sched.push_back(static_cast<double>(it.scheduled_tokens));
  if (!sched.empty()) {
    report.mean_sched_tokens =
        std::accumulate(sched.begin(), sched.end(), 0.0) / static_cast<double>(sched.size());
    report.p50_sched_tokens = nearest_rank_of(sched, 50);
    report.p90_sched_tokens = nearest_rank_of(sched, 90);
    report.makespan = report.iterations.back().t_end - start_time;
  }
  if (report.makespan > 0.0) {
    report.compute_busy_fraction = std::min(1.0, total_compute / report.makespan);
    report.transfer_busy_fraction = std::min(1.0, total_transfer / report.makespan);
  }

  std::vector<double> ttfts;
  for (const auto& r : reqs) {
    if (r.ttft) ttfts.push_back(*r.ttft);
  }
  if (!ttfts.empty()) {
    report.mean_ttft =
        std::accumulate(ttfts.begin(), ttfts.end(), 0.0) / static_cast<double>(ttfts.size());
    report.p50_ttft = nearest_rank_of(ttfts, 50);
    report.p99_ttft = nearest_rank_of(ttfts, 99);
  }

  if (cfg.power_proxy) {
    report.mean_power_watts =
        power_proxy(report, cfg.power_proxy->idle_watts, cfg.power_proxy->peak_watts);
  } else if (setup.hw.idle_watts && setup.hw.tdp_watts) {
    report.mean_power_watts = power_proxy(report, *setup.hw.idle_watts, *setup.hw.tdp_watts);
  }
  return report;
}

double power_proxy(const SimReport& report, double idle_watts, double peak_watts) {
  if (peak_watts < idle_watts) {
    throw ConfigError(fmt::format("peak_watts ({}) must be >= idle_watts ({})", peak_watts,
                                  idle_watts));
  }
  return idle_watts + (peak_watts - idle_watts) * report.compute_busy_fraction;
}

PolicyComparison compare_policies(const SimSetup& setup, std::span<const RequestRecord> requests,
                                  std::span<const Policy> policies) {
  PolicyComparison out;
  for (Policy p : policies) out.reports.push_back(run_sim(setup, requests, p));
  if (out.reports.empty()) return out;
  const auto& base = out.reports.front().requests;
  for (const auto& rep : out.reports) {
    std::vector<double> deltas(base.size(), std::numeric_limits<double>::quiet_NaN());
    for (size_t i = 0; i < base.size(); ++i) {
      if (base[i].ttft && rep.requests[i].ttft) deltas[i] = *rep.requests[i].ttft - *base[i].ttft;
    }
    out.ttft_deltas.push_back(std::move(deltas));
  }
  return out;
}

}  // namespace kvroof
