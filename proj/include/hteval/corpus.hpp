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

#include "hteval/schema.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hteval {

enum class Split { train, dev, test };

inline constexpr std::array<Split, 3> kAllSplits{Split::train, Split::dev, Split::test};

std::string_view to_string(Split split) noexcept;
/// Throws InvariantError for anything but train/dev/test.
Split parse_split(std::string_view name);

struct LabeledExample {
    std::string id;
    std::string text;
    LabelIndex label = 0;

    friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

enum class TextFormat { csv, tsv, jsonl };

/// Throws InvariantError for unknown names.
TextFormat parse_text_format(std::string_view name);
/// Picks the format from the file extension (.csv, .tsv, .jsonl/.json).
TextFormat text_format_for(const std::filesystem::path& path);

/// Immutable labeled corpus partitioned into named splits under one schema.
///
/// Any subset of {train, dev, test} may be present, but at least one.
/// Example labels are stored as schema indexes.
class Dataset {
  public:
    /// Throws InvariantError when no split is given, a split repeats an id or
    /// an example's label index lies outside the schema.
    Dataset(LabelSchema schema, std::map<Split, std::vector<LabeledExample>> splits);

    [[nodiscard]] const LabelSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] const std::map<Split, std::vector<LabeledExample>>& splits() const noexcept { return splits_; }
    [[nodiscard]] bool has(Split split) const noexcept { return splits_.contains(split); }
    /// Throws Error when the split is absent.
    [[nodiscard]] const std::vector<LabeledExample>& split(Split split) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

  private:
    LabelSchema schema_;
    std::map<Split, std::vector<LabeledExample>> splits_;
};

/// Reads one split's examples. Labels pass through schema canonicalization.
/// Errors (LoadError) name the file and either the line number or the
/// offending example id.
std::vector<LabeledExample> load_examples(const std::filesystem::path& path, TextFormat format,
                                          const LabelSchema& schema);

/// Convenience: load each given split file into one Dataset.
Dataset load_dataset(const std::map<Split, std::filesystem::path>& paths, const LabelSchema& schema,
                     std::optional<TextFormat> format = std::nullopt);

/// Renders examples with canonical labels; inverse of load_examples.
std::string serialize_examples(const std::vector<LabeledExample>& examples, const LabelSchema& schema,
                               TextFormat format);

struct LabelShare {
    std::size_t count = 0;
    double percentage = 0.0;
    /// Two-decimal, half-up rounding of the exact ratio.
    std::string display;
};

struct SplitDistribution {
    Split split = Split::train;
    std::size_t size = 0;
    std::vector<LabelShare> shares;  // schema order
};

struct DistributionStats {
    std::vector<SplitDistribution> splits;  // train, dev, test order; absent splits skipped
};

/// Per-label counts and percentages. Throws InvariantError on an empty split.
DistributionStats split_stats(const Dataset& dataset);

enum class IssueKind { cross_split_duplicate, empty_text, label_outside_schema };

std::string_view to_string(IssueKind kind) noexcept;

struct Issue {
    IssueKind kind;
    std::string id;
    std::string detail;
};

/// Diagnostics only; never throws and never modifies the dataset.
std::vector<Issue> validate(const Dataset& dataset);

}  // namespace hteval
