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

// Simulation config files, run manifests and report serialization.

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "kvroof/simulator.h"

namespace kvroof {

// Provenance block embedded in every CLI output.
struct RunManifest {
  std::string command_line;
  std::vector<std::string> config_paths;
  std::optional<uint64_t> seed;
  std::string tool_version = KVROOF_VERSION;
  std::string catalog_hash;
};

std::string manifest_json(const RunManifest& manifest);
// Single "# manifest: {...}" line for CSV and text outputs.
std::string manifest_comment(const RunManifest& manifest);

struct SimConfigFile {
  SimConfig config;
  // Catalog path from the file, resolved relative to the file's directory.
  std::optional<std::string> catalog_path;
};

// {"catalog": "...", "simulation": {"model": ..., "hardware": ..., ...}}
SimConfigFile parse_sim_config(std::string_view text, std::string_view source,
                               const std::string& base_dir = ".");
SimConfigFile load_sim_config(const std::string& path);

void write_iterations_csv(std::ostream& out, const SimReport& report,
                          const std::optional<RunManifest>& manifest = std::nullopt);

void write_report_json(std::ostream& out, const SimReport& report, const SimSetup& setup,
                       const RunManifest& manifest);

void write_comparison_json(std::ostream& out, const PolicyComparison& comparison,
                           const SimSetup& setup, const RunManifest& manifest);

}  // namespace kvroof
