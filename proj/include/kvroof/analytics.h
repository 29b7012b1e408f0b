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

// Closed-form prefill timing model for requests that reload K cached tokens
// over the host-device link and compute T new tokens on the accelerator.
//
//   t_pcie    = K * B_kv / BW
//   t_prefill = T * F_pf / C_eff
//   kappa_crit = (F_pf / B_kv) * (BW / C_eff)
//
// A request is memory-bound when K / T > kappa_crit. All functions are pure.

#pragma once

#include <cstdint>

#include "kvroof/catalog.h"

namespace kvroof {

struct RequestShape {
  int64_t cached_tokens = 0;   // K >= 0
  int64_t prefill_tokens = 1;  // T >= 1

  double kappa_ratio() const {
    return static_cast<double>(cached_tokens) / static_cast<double>(prefill_tokens);
  }
};

// Throws DomainError unless K >= 0 and T >= 1.
void validate(const RequestShape& shape);

struct AnalyticBreakdown {
  double t_pcie = 0.0;     // seconds
  double t_prefill = 0.0;  // seconds
  double ttft = 0.0;       // seconds, with overlap applied
  // Active-compute share without overlap: t_prefill / (t_pcie + t_prefill).
  double utilization = 1.0;
  double pcie_overhead = 0.0;  // t_pcie / t_prefill
  double kappa_ratio = 0.0;
};

// kappa_M in FLOP/byte.
double kappa_model(const ModelSpec& model);

// kappa_HW in byte/FLOP.
double kappa_hw(const HardwareSpec& hw, BandwidthMode mode = BandwidthMode::kSustained);

double kappa_crit(const ModelSpec& model, const HardwareSpec& hw,
                  BandwidthMode mode = BandwidthMode::kSustained);

double transfer_seconds(int64_t cached_tokens, const ModelSpec& model, const HardwareSpec& hw,
                        BandwidthMode mode);
double compute_seconds(int64_t prefill_tokens, const ModelSpec& model, const HardwareSpec& hw);

// Partial-overlap latency: (a + b) - alpha * min(a, b), alpha in [0, 1].
// Throws DomainError for alpha outside [0, 1].
double overlapped_seconds(double transfer, double compute, double overlap_alpha);

AnalyticBreakdown ttft(const RequestShape& shape, const ModelSpec& model,
                       const HardwareSpec& hw, double overlap_alpha = 0.0,
                       BandwidthMode mode = BandwidthMode::kSustained);

double utilization(const RequestShape& shape, const ModelSpec& model, const HardwareSpec& hw,
                   BandwidthMode mode = BandwidthMode::kSustained);

double pcie_overhead(const RequestShape& shape, const ModelSpec& model, const HardwareSpec& hw,
                     BandwidthMode mode = BandwidthMode::kSustained);

// True when transfer time strictly exceeds compute time.
bool is_memory_bound(const RequestShape& shape, const ModelSpec& model, const HardwareSpec& hw,
                     BandwidthMode mode = BandwidthMode::kSustained);

struct ConcurrencyLimit {
  double real = 0.0;   // V_eff / ((K + T) * B_kv)
  int64_t floor = 0;   // requests that actually fit
};

ConcurrencyLimit max_concurrent(const RequestShape& shape, const ModelSpec& model,
                                double vram_effective);

struct ScheduledTokens {
  double exact = 0.0;   // N_max(real) * T
  double approx = 0.0;  // V_eff / (kappa_ratio * B_kv); +inf when K == 0
};

// Prefill tokens per iteration when VRAM, not the token budget, binds.
ScheduledTokens sched_tokens(const RequestShape& shape, const ModelSpec& model,
                             double vram_effective);

// FLOP per transferred byte, F_pf / (kappa_ratio * B_kv). kappa_ratio == 0
// means nothing is transferred and yields +infinity.
double arithmetic_intensity(double kappa_ratio, const ModelSpec& model);

// Arithmetic intensity at which the link ceiling meets the compute ceiling.
double machine_balance(const HardwareSpec& hw, BandwidthMode mode = BandwidthMode::kSustained);

}  // namespace kvroof
