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

#include "hteval/schema.hpp"

#include "hteval/detail/text_io.hpp"
#include "hteval/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

namespace hteval {

namespace {

std::string fold_key(std::string_view s) { return detail::ascii_fold(detail::trim(s)); }

}  // namespace

LabelSchema::LabelSchema(std::string language, std::vector<std::string> labels,
                         std::map<std::string, std::string> aliases)
    : language_(std::move(language)), labels_(std::move(labels)), aliases_(std::move(aliases)) {
    if (labels_.empty()) {
        throw InvariantError(fmt::format("schema '{}' declares no labels", language_));
    }
    for (LabelIndex i = 0; i < labels_.size(); ++i) {
        const auto key = fold_key(labels_[i]);
        if (key.empty()) {
            throw InvariantError(fmt::format("schema '{}' has an empty label", language_));
        }
        if (!lookup_.emplace(key, i).second) {
            throw InvariantError(
                fmt::format("schema '{}': label '{}' duplicates another label", language_, labels_[i]));
        }
    }
    for (const auto& [alias, canonical] : aliases_) {
        const auto target = lookup_.find(fold_key(canonical));
        if (target == lookup_.end() || labels_[target->second] != canonical) {
            throw InvariantError(fmt::format("schema '{}': alias '{}' targets unknown label '{}'", language_,
                                             alias, canonical));
        }
        const auto key = fold_key(alias);
        if (key.empty()) {
            throw InvariantError(fmt::format("schema '{}': empty alias", language_));
        }
        const auto [it, inserted] = lookup_.emplace(key, target->second);
        if (!inserted && it->second != target->second) {
            throw InvariantError(fmt::format("schema '{}': alias '{}' is ambiguous between '{}' and '{}'",
                                             language_, alias, labels_[it->second], canonical));
        }
    }
}

std::optional<LabelIndex> LabelSchema::find(std::string_view surface) const {
    const auto it = lookup_.find(fold_key(surface));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

LabelIndex LabelSchema::index_of(std::string_view surface) const {
    if (auto i = find(surface)) return *i;
    throw InvariantError(fmt::format("label '{}' is not in schema '{}'", surface, language_));
}

std::optional<std::string> LabelSchema::canonicalize(std::string_view surface) const {
    if (auto i = find(surface)) return labels_[*i];
    return std::nullopt;
}

LabelSchema parse_schema(std::string_view json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(fmt::format("schema document is not valid JSON: {}", e.what()));
    }
    if (!doc.is_object() || !doc.contains("language") || !doc.contains("labels")) {
        throw LoadError("schema document needs 'language' and 'labels'");
    }
    try {
        std::map<std::string, std::string> aliases;
        if (doc.contains("aliases")) {
            aliases = doc.at("aliases").get<std::map<std::string, std::string>>();
        }
        return LabelSchema(doc.at("language").get<std::string>(),
                           doc.at("labels").get<std::vector<std::string>>(), std::move(aliases));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(fmt::format("schema document has wrong field types: {}", e.what()));
    }
}

LabelSchema load_schema(const std::filesystem::path& path) {
    try {
        return parse_schema(detail::read_file(path));
    } catch (const LoadError& e) {
        throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string serialize_schema(const LabelSchema& schema) {
    nlohmann::ordered_json doc;
    doc["language"] = schema.language();
    doc["labels"] = std::vector<std::string>(schema.labels().begin(), schema.labels().end());
    doc["aliases"] = nlohmann::ordered_json::object();
    for (const auto& [alias, canonical] : schema.aliases()) doc["aliases"][alias] = canonical;
    return doc.dump(2) + "\n";
}

namespace {

constexpr std::string_view kNonAnti = "Non-anti-LGBT+ content";
constexpr std::string_view kNone = "None of the categories";

std::map<std::string, std::string> three_class_aliases(std::string_view none_label) {
    std::map<std::string, std::string> a{
        {"Homophobic", "Homophobia"},
        {"Transphobic", "Transphobia"},
    };
    const std::string none(none_label);
    if (none_label == kNonAnti) {
        a.emplace("Non-anti-LGBTQ+ content", none);
        a.emplace("Non-anti-LGBT+", none);
    } else {
        a.emplace("None", none);
    }
    return a;
}

}  // namespace

std::vector<std::string> builtin_languages() {
    return {"tamil", "english", "malayalam", "marathi", "spanish",
            "hindi", "telugu",  "kannada",   "gujarati", "tulu"};
}

LabelSchema builtin_schema(std::string_view language) {
    const auto lang = fold_key(language);
    const std::string non_anti(kNonAnti);
    const std::string none(kNone);
    if (lang == "tamil" || lang == "english" || lang == "malayalam") {
        return {lang, {non_anti, "Homophobia", "Transphobia"}, three_class_aliases(kNonAnti)};
    }
    if (lang == "hindi") {
        return {lang, {non_anti, "Transphobia", "Homophobia"}, three_class_aliases(kNonAnti)};
    }
    if (lang == "marathi" || lang == "telugu" || lang == "kannada" || lang == "gujarati") {
        return {lang, {none, "Homophobia", "Transphobia"}, three_class_aliases(kNone)};
    }
    if (lang == "spanish") {
        return {lang, {none, "Transphobia", "Homophobia"}, three_class_aliases(kNone)};
    }
    if (lang == "tulu") {
        return {lang,
                {"NON H/T", "H/T"},
                {{"NON-H/T", "NON H/T"}, {"NON_H/T", "NON H/T"}, {"HT", "H/T"}, {"NON HT", "NON H/T"}}};
    }
    throw InvariantError(fmt::format("no built-in schema for language '{}'", language));
}

LabelSchema resolve_schema(std::string_view reference, const std::filesystem::path& base_dir) {
    constexpr std::string_view prefix = "builtin:";
    if (reference.starts_with(prefix)) {
        return builtin_schema(reference.substr(prefix.size()));
    }
    std::filesystem::path p{std::string(reference)};
    if (p.is_relative()) p = base_dir / p;
    return load_schema(p);
}

}  // namespace hteval
