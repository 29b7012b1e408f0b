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

#include "kvroof/catalog.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "kvroof/errors.h"

namespace kvroof {

namespace embedded {
extern const std::string_view kCatalogJson;
}  // namespace embedded

using nlohmann::json;

std::string_view to_string(AttentionKind kind) {
  return kind == AttentionKind::kGqa ? "GQA" : "MLA";
}

std::string_view to_string(BandwidthMode mode) {
  return mode == BandwidthMode::kPeak ? "peak" : "sustained";
}

BandwidthMode parse_bandwidth_mode(std::string_view text) {
  if (text == "peak") return BandwidthMode::kPeak;
  if (text == "sustained") return BandwidthMode::kSustained;
  throw ConfigError(fmt::format("bandwidth mode must be 'peak' or 'sustained', got '{}'", text));
}

namespace {

[[noreturn]] void field_error(std::string_view kind, std::string_view name, std::string_view field,
                              std::string_view what) {
  throw ConfigError(fmt::format("{} '{}': field '{}' {}", kind, name, field, what));
}

void require_positive(std::string_view name, std::string_view field,
                      const std::optional<int64_t>& value) {
  if (!value) field_error("model", name, field, "is required for this attention kind");
  if (*value <= 0) field_error("model", name, field, fmt::format("must be > 0, got {}", *value));
}

void require_absent(std::string_view name, std::string_view field,
                    const std::optional<int64_t>& value, AttentionKind kind) {
  if (value) {
    field_error("model", name, field, fmt::format("is not used by {} attention", to_string(kind)));
  }
}

void require_positive_real(std::string_view name, std::string_view field, double value) {
  if (!std::isfinite(value) || value <= 0.0) {
    field_error("hardware", name, field, fmt::format("must be finite and > 0, got {}", value));
  }
}

}  // namespace

void validate(const ModelSpec& m) {
  if (m.name.empty()) throw ConfigError("model: field 'name' must be non-empty");
  if (m.total_params <= 0) field_error("model", m.name, "total_params", "must be > 0");
  if (m.active_params <= 0) field_error("model", m.name, "active_params", "must be > 0");
  if (m.active_params > m.total_params) {
    field_error("model", m.name, "active_params", "must not exceed total_params");
  }
  if (m.layers <= 0) field_error("model", m.name, "layers", "must be > 0");
  if (m.precision_bits <= 0) {
    field_error("model", m.name, "precision_bytes", "must be > 0 (invalid precision)");
  }
  if (m.attention_kind == AttentionKind::kGqa) {
    require_positive(m.name, "kv_heads", m.kv_heads);
    require_positive(m.name, "head_dim", m.head_dim);
    require_absent(m.name, "kv_lora_rank", m.kv_lora_rank, m.attention_kind);
    require_absent(m.name, "qk_rope_dim", m.qk_rope_dim, m.attention_kind);
  } else {
    require_positive(m.name, "kv_lora_rank", m.kv_lora_rank);
    require_positive(m.name, "qk_rope_dim", m.qk_rope_dim);
    require_absent(m.name, "kv_heads", m.kv_heads, m.attention_kind);
    require_absent(m.name, "head_dim", m.head_dim, m.attention_kind);
  }
}

void validate(const HardwareSpec& hw) {
  if (hw.name.empty()) throw ConfigError("hardware: field 'name' must be non-empty");
  require_positive_real(hw.name, "compute_throughput", hw.compute_throughput);
  require_positive_real(hw.name, "link_bandwidth_peak", hw.link_bandwidth_peak);
  require_positive_real(hw.name, "vram_effective", hw.vram_effective);
  if (hw.link_bandwidth_sustained) {
    require_positive_real(hw.name, "link_bandwidth_sustained", *hw.link_bandwidth_sustained);
    if (*hw.link_bandwidth_sustained > hw.link_bandwidth_peak) {
      field_error("hardware", hw.name, "link_bandwidth_sustained",
                  "must not exceed link_bandwidth_peak");
    }
  }
  if (hw.tdp_watts) require_positive_real(hw.name, "tdp_watts", *hw.tdp_watts);
  if (hw.idle_watts) {
    if (!std::isfinite(*hw.idle_watts) || *hw.idle_watts < 0.0) {
      field_error("hardware", hw.name, "idle_watts", "must be finite and >= 0");
    }
    if (hw.tdp_watts && *hw.idle_watts > *hw.tdp_watts) {
      field_error("hardware", hw.name, "idle_watts", "must not exceed tdp_watts");
    }
  }
}

int64_t kv_bits_per_token(const ModelSpec& m) {
  validate(m);
  if (m.attention_kind == AttentionKind::kGqa) {
    return 2 * m.layers * *m.kv_heads * *m.head_dim * m.precision_bits;
  }
  // The latent vector and the decoupled rotary key are stored side by side,
  // so the per-layer width is their sum.
  return m.layers * (*m.kv_lora_rank + *m.qk_rope_dim) * m.precision_bits;
}

double kv_bytes_per_token(const ModelSpec& m) {
  return static_cast<double>(kv_bits_per_token(m)) / 8.0;
}

double flops_per_token(const ModelSpec& m) {
  validate(m);
  return 2.0 * static_cast<double>(m.active_params);
}

// ---------------------------------------------------------------------------
// Catalog

Catalog::Catalog(std::vector<ModelSpec> models, std::vector<HardwareSpec> hardware)
    : models_(std::move(models)), hardware_(std::move(hardware)) {
  std::set<std::string> seen;
  for (const auto& m : models_) {
    validate(m);
    if (!seen.insert(m.name).second) {
      throw ConfigError(fmt::format("model '{}': duplicate name", m.name));
    }
  }
  seen.clear();
  for (const auto& h : hardware_) {
    validate(h);
    if (!seen.insert(h.name).second) {
      throw ConfigError(fmt::format("hardware '{}': duplicate name", h.name));
    }
  }
}

namespace {

template <typename T>
std::string join_names(const std::vector<T>& entries) {
  std::string out;
  for (const auto& e : entries) {
    if (!out.empty()) out += ", ";
    out += e.name;
  }
  return out.empty() ? "<none>" : out;
}

}  // namespace

const ModelSpec& Catalog::model(std::string_view name) const {
  auto it = std::find_if(models_.begin(), models_.end(),
                         [&](const ModelSpec& m) { return m.name == name; });
  if (it == models_.end()) {
    throw ConfigError(
        fmt::format("unknown model '{}'; available: {}", name, join_names(models_)));
  }
  return *it;
}

const HardwareSpec& Catalog::hw(std::string_view name) const {
  auto it = std::find_if(hardware_.begin(), hardware_.end(),
                         [&](const HardwareSpec& h) { return h.name == name; });
  if (it == hardware_.end()) {
    throw ConfigError(
        fmt::format("unknown hardware '{}'; available: {}", name, join_names(hardware_)));
  }
  return *it;
}

// ---------------------------------------------------------------------------
// JSON format

namespace {

struct EntryReader {
  const json& obj;
  std::string_view kind;
  std::string name;
  std::set<std::string> consumed{"name", "notes"};

  [[noreturn]] void fail(std::string_view field, std::string_view what) const {
    field_error(kind, name, field, what);
  }

  const json* find(const std::string& field) {
    consumed.insert(field);
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::optional<double> real(const std::string& field) {
    const json* v = find(field);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(field, "must be a number");
    return v->get<double>();
  }

  double required_real(const std::string& field) {
    auto v = real(field);
    if (!v) fail(field, "is required");
    return *v;
  }

  std::optional<int64_t> count(const std::string& field) {
    const json* v = find(field);
    if (!v) return std::nullopt;
    if (v->is_number_integer()) return v->get<int64_t>();
    if (v->is_number_float()) {
      double d = v->get<double>();
      if (std::isfinite(d) && std::floor(d) == d && std::abs(d) < 9.0e18) {
        return static_cast<int64_t>(d);
      }
    }
    fail(field, "must be an integer count");
  }

  int64_t required_count(const std::string& field) {
    auto v = count(field);
    if (!v) fail(field, "is required");
    return *v;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : obj.items()) {
      if (!consumed.count(key)) fail(key, "is not a recognised field");
    }
  }
};

std::string entry_name(const json& obj, std::string_view kind, size_t index) {
  if (!obj.is_object()) {
    throw ConfigError(fmt::format("{}[{}]: entry must be an object", kind, index));
  }
  auto it = obj.find("name");
  if (it == obj.end() || !it->is_string()) {
    throw ConfigError(fmt::format("{}[{}]: field 'name' must be a string", kind, index));
  }
  return it->get<std::string>();
}

ModelSpec read_model(const json& obj, size_t index) {
  EntryReader r{obj, "model", entry_name(obj, "models", index)};
  ModelSpec m;
  m.name = r.name;
  m.total_params = r.required_count("total_params");
  m.active_params = r.required_count("active_params");
  const json* kind = r.find("attention_kind");
  if (!kind || !kind->is_string()) r.fail("attention_kind", "must be \"GQA\" or \"MLA\"");
  if (*kind == "GQA") {
    m.attention_kind = AttentionKind::kGqa;
  } else if (*kind == "MLA") {
    m.attention_kind = AttentionKind::kMla;
  } else {
    r.fail("attention_kind", "must be \"GQA\" or \"MLA\"");
  }
  m.layers = r.required_count("layers");
  m.kv_heads = r.count("kv_heads");
  m.head_dim = r.count("head_dim");
  m.kv_lora_rank = r.count("kv_lora_rank");
  m.qk_rope_dim = r.count("qk_rope_dim");
  double bytes = r.required_real("precision_bytes");
  double bits = bytes * 8.0;
  if (!std::isfinite(bits) || std::floor(bits) != bits) {
    r.fail("precision_bytes", "must be a whole number of bits");
  }
  m.precision_bits = static_cast<int64_t>(bits);
  r.reject_unknown();
  validate(m);
  return m;
}

HardwareSpec read_hardware(const json& obj, size_t index) {
  EntryReader r{obj, "hardware", entry_name(obj, "hardware", index)};
  HardwareSpec h;
  h.name = r.name;
  h.compute_throughput = r.required_real("compute_throughput");
  h.link_bandwidth_peak = r.required_real("link_bandwidth_peak");
  h.link_bandwidth_sustained = r.real("link_bandwidth_sustained");
  h.vram_effective = r.required_real("vram_effective");
  h.tdp_watts = r.real("tdp_watts");
  h.idle_watts = r.real("idle_watts");
  r.reject_unknown();
  validate(h);
  return h;
}

int line_of_offset(std::string_view text, size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

}  // namespace

Catalog parse_catalog(std::string_view text, std::string_view source) {
  if (std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    return Catalog{};
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte is 1-based and points one past the offending character.
    size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    throw ConfigError(fmt::format("{}:{}: catalog parse error: {}", source,
                                  line_of_offset(text, offset), e.what()));
  }
  if (!doc.is_object()) throw ConfigError(fmt::format("{}: catalog must be a JSON object", source));
  for (const auto& [key, value] : doc.items()) {
    if (key != "models" && key != "hardware" && key != "description") {
      throw ConfigError(fmt::format("{}: unknown top-level key '{}'", source, key));
    }
  }
  std::vector<ModelSpec> models;
  std::vector<HardwareSpec> hardware;
  try {
    if (auto it = doc.find("models"); it != doc.end()) {
      if (!it->is_array()) throw ConfigError("'models' must be an array");
      for (size_t i = 0; i < it->size(); ++i) models.push_back(read_model((*it)[i], i));
    }
    if (auto it = doc.find("hardware"); it != doc.end()) {
      if (!it->is_array()) throw ConfigError("'hardware' must be an array");
      for (size_t i = 0; i < it->size(); ++i) hardware.push_back(read_hardware((*it)[i], i));
    }
    return Catalog(std::move(models), std::move(hardware));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", source, e.what()));
  }
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read catalog file '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str(), path);
}

std::string serialize_catalog(const Catalog& catalog) {
  nlohmann::ordered_json doc;
  doc["models"] = nlohmann::ordered_json::array();
  for (const auto& m : catalog.models()) {
    nlohmann::ordered_json e;
    e["name"] = m.name;
    e["total_params"] = m.total_params;
    e["active_params"] = m.active_params;
    e["attention_kind"] = std::string(to_string(m.attention_kind));
    e["layers"] = m.layers;
    if (m.kv_heads) e["kv_heads"] = *m.kv_heads;
    if (m.head_dim) e["head_dim"] = *m.head_dim;
    if (m.kv_lora_rank) e["kv_lora_rank"] = *m.kv_lora_rank;
    if (m.qk_rope_dim) e["qk_rope_dim"] = *m.qk_rope_dim;
    e["precision_bytes"] = m.precision_bytes();
    doc["models"].push_back(std::move(e));
  }
  doc["hardware"] = nlohmann::ordered_json::array();
  for (const auto& h : catalog.hardware()) {
    nlohmann::ordered_json e;
    e["name"] = h.name;
    e["compute_throughput"] = h.compute_throughput;
    e["link_bandwidth_peak"] = h.link_bandwidth_peak;
    if (h.link_bandwidth_sustained) e["link_bandwidth_sustained"] = *h.link_bandwidth_sustained;
    e["vram_effective"] = h.vram_effective;
    if (h.tdp_watts) e["tdp_watts"] = *h.tdp_watts;
    if (h.idle_watts) e["idle_watts"] = *h.idle_watts;
    doc["hardware"].push_back(std::move(e));
  }
  return doc.dump(2) + "\n";
}

std::string_view default_catalog_text() { return embedded::kCatalogJson; }

const Catalog& default_catalog() {
  static const Catalog catalog = parse_catalog(embedded::kCatalogJson, "<bundled catalog>");
  return catalog;
}

std::string content_hash(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace kvroof
