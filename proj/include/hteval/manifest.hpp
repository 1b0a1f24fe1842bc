/*
 * Copyright 2026 The hteval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "hteval/corpus.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hteval {

/// One language's run description, read from a JSON document:
///
///   {
///     "language": "english",
///     "schema": "builtin:english" | "schema.json",
///     "datasets": {"train": "...", "dev": "...", "test": "..."},
///     "dataset_format": "csv" | "tsv" | "jsonl",          (optional)
///     "predictions": {"<model>": {"dev": "...", "test": "..."}},
///     "ensemble": "ensemble.json" | {...},                  (optional)
///     "prompt": "prompt.json" | {...},                      (optional)
///     "replay_store": "replay.jsonl",                       (optional)
///     "endpoint": {...},                                    (optional)
///     "runs": "runs.jsonl",                                 (optional)
///     "output": "out"                                       (optional)
///   }
///
/// Relative paths resolve against the manifest's directory. Every file the
/// manifest names must exist when it is loaded.
struct Manifest {
    std::filesystem::path base_dir;
    std::string language;
    std::string schema_ref;
    std::map<Split, std::filesystem::path> datasets;
    std::optional<TextFormat> dataset_format;
    /// Declaration order is kept; it is the default ensemble member order.
    std::vector<std::pair<std::string, std::map<Split, std::filesystem::path>>> predictions;
    std::optional<std::string> ensemble_json;
    std::optional<std::string> prompt_json;
    std::optional<std::filesystem::path> replay_store;
    std::optional<std::string> endpoint_json;
    std::optional<std::filesystem::path> runs;
    std::optional<std::filesystem::path> output;
};

/// Throws LoadError naming the manifest or the first missing referenced path.
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace hteval
