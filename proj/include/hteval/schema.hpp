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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hteval {

using LabelIndex = std::size_t;

/// Ordered label inventory for one language.
///
/// Surface forms are canonicalized by trimming whitespace, folding ASCII case
/// and looking the result up among the canonical names and declared aliases.
/// Declaration order is significant: it is the tie-break order for argmax
/// decisions and the row/column order of every confusion matrix.
class LabelSchema {
  public:
    /// Throws InvariantError when labels are empty or collide after folding,
    /// or when an alias targets an unknown label or two different labels.
    LabelSchema(std::string language, std::vector<std::string> labels,
                std::map<std::string, std::string> aliases = {});

    [[nodiscard]] const std::string& language() const noexcept { return language_; }
    [[nodiscard]] std::span<const std::string> labels() const noexcept { return labels_; }
    [[nodiscard]] const std::map<std::string, std::string>& aliases() const noexcept { return aliases_; }
    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] const std::string& label(LabelIndex i) const { return labels_.at(i); }

    [[nodiscard]] std::optional<LabelIndex> find(std::string_view surface) const;
    /// Throws InvariantError naming the offending value.
    [[nodiscard]] LabelIndex index_of(std::string_view surface) const;
    [[nodiscard]] std::optional<std::string> canonicalize(std::string_view surface) const;

    friend bool operator==(const LabelSchema& a, const LabelSchema& b) {
        return a.language_ == b.language_ && a.labels_ == b.labels_ && a.aliases_ == b.aliases_;
    }

  private:
    std::string language_;
    std::vector<std::string> labels_;
    std::map<std::string, std::string> aliases_;
    std::unordered_map<std::string, LabelIndex> lookup_;
};

/// Reads a schema document: {"language": ..., "labels": [...], "aliases": {alias: canonical}}.
LabelSchema load_schema(const std::filesystem::path& path);
LabelSchema parse_schema(std::string_view json_text);
std::string serialize_schema(const LabelSchema& schema);

/// Label inventories of the ten shared-task languages, in table order.
/// Known languages: tamil, english, malayalam, marathi, spanish, hindi,
/// telugu, kannada, gujarati, tulu.
LabelSchema builtin_schema(std::string_view language);
std::vector<std::string> builtin_languages();

/// Accepts either a schema file path or "builtin:<language>".
LabelSchema resolve_schema(std::string_view reference, const std::filesystem::path& base_dir);

}  // namespace hteval
