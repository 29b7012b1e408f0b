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

#include "kvroof/analytics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "kvroof/errors.h"

namespace kvroof {

void validate(const RequestShape& shape) {
  if (shape.cached_tokens < 0) {
    throw DomainError(fmt::format("cached_tokens must be >= 0, got {}", shape.cached_tokens));
  }
  if (shape.prefill_tokens < 1) {
    throw DomainError(fmt::format("prefill_tokens must be >= 1, got {}", shape.prefill_tokens));
  }
}

double kappa_model(const ModelSpec& model) {
  return flops_per_token(model) / kv_bytes_per_token(model);
}

double kappa_hw(const HardwareSpec& hw, BandwidthMode mode) {
  return hw.bandwidth(mode) / hw.compute_throughput;
}

double kappa_crit(const ModelSpec& model, const HardwareSpec& hw, BandwidthMode mode) {
  return kappa_model(model) * kappa_hw(hw, mode);
}

double transfer_seconds(int64_t cached_tokens, const ModelSpec& model, const HardwareSpec& hw,
                        BandwidthMode mode) {
  return static_cast<double>(cached_tokens) * kv_bytes_per_token(model) / hw.bandwidth(mode);
}

double compute_seconds(int64_t prefill_tokens, const ModelSpec& model, const HardwareSpec& hw) {
  return static_cast<double>(prefill_tokens) * flops_per_token(model) / hw.compute_throughput;
}

double overlapped_seconds(double transfer, double compute, double overlap_alpha) {
  if (!(overlap_alpha >= 0.0 && overlap_alpha <= 1.0)) {
    throw DomainError(fmt::format("overlap alpha must be in [0, 1], got {}", overlap_alpha));
  }
  return (transfer + compute) - overlap_alpha * std::min(transfer, compute);
}

AnalyticBreakdown ttft(const RequestShape& shape, const ModelSpec& model, const HardwareSpec& hw,
                       double overlap_alpha, BandwidthMode mode) {
  validate(shape);
  AnalyticBreakdown b;
  b.t_pcie = transfer_seconds(shape.cached_tokens, model, hw, mode);
  b.t_prefill = compute_seconds(shape.prefill_tokens, model, hw);
  b.ttft = overlapped_seconds(b.t_pcie, b.t_prefill, overlap_alpha);
  b.pcie_overhead = b.t_pcie / b.t_prefill;
  b.utilization = b.t_prefill / (b.t_pcie + b.t_prefill);
  b.kappa_ratio = shape.kappa_ratio();
  return b;
}

double utilization(const RequestShape& shape, const ModelSpec& model, const HardwareSpec& hw,
                   BandwidthMode mode) {
  return ttft(shape, model, hw, 0.0, mode).utilization;
}

double pcie_overhead(const RequestShape& shape, const ModelSpec& model, const HardwareSpec& hw,
                     BandwidthMode mode) {
  return ttft(shape, model, hw, 0.0, mode).pcie_overhead;
}

bool is_memory_bound(const RequestShape& shape, const ModelSpec& model, const HardwareSpec& hw,
                     BandwidthMode mode) {
  auto b = ttft(shape, model, hw, 0.0, mode);
  return b.t_pcie > b.t_prefill;
}

ConcurrencyLimit max_concurrent(const RequestShape& shape, const ModelSpec& model,
                                double vram_effective) {
  validate(shape);
  if (!(vram_effective > 0.0)) {
    throw DomainError(fmt::format("vram_effective must be > 0, got {}", vram_effective));
  }
  double per_request =
      static_cast<double>(shape.cached_tokens + shape.prefill_tokens) * kv_bytes_per_token(model);
  ConcurrencyLimit out;
  out.real = vram_effective / per_request;
  out.floor = static_cast<int64_t>(std::floor(out.real));
  return out;
}

ScheduledTokens sched_tokens(const RequestShape& shape, const ModelSpec& model,
                             double vram_effective) {
  auto n = max_concurrent(shape, model, vram_effective);
  ScheduledTokens out;
  out.exact = n.real * static_cast<double>(shape.prefill_tokens);
  out.approx = shape.cached_tokens == 0
                   ? std::numeric_limits<double>::infinity()
                   : vram_effective / (shape.kappa_ratio() * kv_bytes_per_token(model));
  return out;
}

double arithmetic_intensity(double kappa_ratio, const ModelSpec& model) {
  if (!(kappa_ratio >= 0.0)) {
    throw DomainError(fmt::format("kappa_ratio must be >= 0, got {}", kappa_ratio));
  }
  if (kappa_ratio == 0.0) return std::numeric_limits<double>::infinity();
  return flops_per_token(model) / (kappa_ratio * kv_bytes_per_token(model));
}

double machine_balance(const HardwareSpec& hw, BandwidthMode mode) {
  return hw.compute_throughput / hw.bandwidth(mode);
}

}  // namespace kvroof
