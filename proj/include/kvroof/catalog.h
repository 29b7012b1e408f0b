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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kvroof {

enum class AttentionKind { kGqa, kMla };

enum class BandwidthMode { kPeak, kSustained };

std::string_view to_string(AttentionKind kind);
std::string_view to_string(BandwidthMode mode);
// Accepts "peak" / "sustained"; throws ConfigError otherwise.
BandwidthMode parse_bandwidth_mode(std::string_view text);

// Architecture parameters needed to derive per-token KV bytes and prefill
// FLOPs. The GQA group (kv_heads, head_dim) and the MLA group
// (kv_lora_rank, qk_rope_dim) are mutually exclusive.
struct ModelSpec {
  std::string name;
  int64_t total_params = 0;
  int64_t active_params = 0;
  AttentionKind attention_kind = AttentionKind::kGqa;
  int64_t layers = 0;
  std::optional<int64_t> kv_heads;
  std::optional<int64_t> head_dim;
  std::optional<int64_t> kv_lora_rank;
  std::optional<int64_t> qk_rope_dim;
  // Bits per stored KV element. Kept in bits so 4-bit caches stay integral.
  int64_t precision_bits = 16;

  double precision_bytes() const { return static_cast<double>(precision_bits) / 8.0; }

  bool operator==(const ModelSpec&) const = default;
};

struct HardwareSpec {
  std::string name;
  double compute_throughput = 0.0;  // FLOP/s
  double link_bandwidth_peak = 0.0;  // bytes/s, unidirectional host-to-device
  std::optional<double> link_bandwidth_sustained;  // bytes/s
  double vram_effective = 0.0;  // bytes available for KV
  std::optional<double> tdp_watts;
  std::optional<double> idle_watts;

  // Sustained falls back to peak when no measurement is recorded.
  double bandwidth(BandwidthMode mode) const {
    if (mode == BandwidthMode::kSustained && link_bandwidth_sustained) {
      return *link_bandwidth_sustained;
    }
    return link_bandwidth_peak;
  }

  bool operator==(const HardwareSpec&) const = default;
};

// Throw ConfigError naming the entry and the offending field.
void validate(const ModelSpec& model);
void validate(const HardwareSpec& hw);

// Exact KV footprint per token in bits. GQA: 2*L*H*d_h*bits.
// MLA: L*(kv_lora_rank + qk_rope_dim)*bits.
int64_t kv_bits_per_token(const ModelSpec& model);

// B_kv in bytes/token.
double kv_bytes_per_token(const ModelSpec& model);

// F_pf in FLOP/token: two FLOPs per active parameter.
double flops_per_token(const ModelSpec& model);

class Catalog {
 public:
  Catalog() = default;
  // Validates every entry and rejects duplicate names.
  Catalog(std::vector<ModelSpec> models, std::vector<HardwareSpec> hardware);

  const std::vector<ModelSpec>& models() const { return models_; }
  const std::vector<HardwareSpec>& hardware() const { return hardware_; }

  // Lookups throw ConfigError listing the available names.
  const ModelSpec& model(std::string_view name) const;
  const HardwareSpec& hw(std::string_view name) const;

  bool empty() const { return models_.empty() && hardware_.empty(); }

 private:
  std::vector<ModelSpec> models_;
  std::vector<HardwareSpec> hardware_;
};

// Parses the JSON catalog format. `source` is used in error messages.
Catalog parse_catalog(std::string_view text, std::string_view source = "<catalog>");
Catalog load_catalog(const std::string& path);
std::string serialize_catalog(const Catalog& catalog);

// The catalog bundled with the library, and its raw JSON text.
const Catalog& default_catalog();
std::string_view default_catalog_text();

// 64-bit FNV-1a, hex encoded. Used to fingerprint catalogs in run manifests.
std::string content_hash(std::string_view bytes);

}  // namespace kvroof
