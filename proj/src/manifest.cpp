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

#include "hteval/manifest.hpp"

#include "hteval/detail/text_io.hpp"
#include "hteval/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

namespace hteval {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() ? base / path : path;
}

std::filesystem::path existing(const std::filesystem::path& base, const std::string& p) {
    auto path = resolve(base, p);
    if (!std::filesystem::exists(path)) {
        throw LoadError(fmt::format("manifest references missing file '{}'", path.string()));
    }
    return path;
}

// A config slot may hold an inline object or a path to a JSON file.
std::string inline_or_file(const nlohmann::ordered_json& value, const std::filesystem::path& base) {
    if (value.is_object()) return value.dump();
    if (value.is_string()) return detail::read_file(existing(base, value.get<std::string>()));
    throw LoadError("configuration entries must be objects or file paths");
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
    const auto text = detail::read_file(path);
    Manifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    try {
        const auto doc = nlohmann::ordered_json::parse(text);
        m.language = doc.at("language").get<std::string>();
        m.schema_ref = doc.at("schema").get<std::string>();
        if (!m.schema_ref.starts_with("builtin:")) existing(m.base_dir, m.schema_ref);
        if (doc.contains("datasets")) {
            for (const auto& [split, p] : doc["datasets"].items()) {
                m.datasets.emplace(parse_split(split), existing(m.base_dir, p.get<std::string>()));
            }
        }
        if (doc.contains("dataset_format")) m.dataset_format = parse_text_format(doc["dataset_format"].get<std::string>());
        if (doc.contains("predictions")) {
            for (const auto& [model, splits] : doc["predictions"].items()) {
                std::map<Split, std::filesystem::path> files;
                for (const auto& [split, p] : splits.items()) {
                    files.emplace(parse_split(split), existing(m.base_dir, p.get<std::string>()));
                }
                m.predictions.emplace_back(model, std::move(files));
            }
        }
        if (doc.contains("ensemble")) m.ensemble_json = inline_or_file(doc["ensemble"], m.base_dir);
        if (doc.contains("prompt")) m.prompt_json = inline_or_file(doc["prompt"], m.base_dir);
        if (doc.contains("endpoint")) m.endpoint_json = inline_or_file(doc["endpoint"], m.base_dir);
        if (doc.contains("replay_store")) m.replay_store = existing(m.base_dir, doc["replay_store"].get<std::string>());
        if (doc.contains("runs")) m.runs = existing(m.base_dir, doc["runs"].get<std::string>());
        if (doc.contains("output")) m.output = resolve(m.base_dir, doc["output"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(fmt::format("{}: malformed manifest: {}", path.string(), e.what()));
    } catch (const InvariantError& e) {
        throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return m;
}

}  // namespace hteval
