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

#include "hteval/corpus.hpp"

#include "hteval/detail/text_io.hpp"
#include "hteval/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace hteval {

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view name) {
    const auto n = detail::ascii_fold(detail::trim(name));
    if (n == "train") return Split::train;
    if (n == "dev") return Split::dev;
    if (n == "test") return Split::test;
    throw InvariantError(fmt::format("unknown split '{}' (expected train, dev or test)", name));
}

TextFormat parse_text_format(std::string_view name) {
    const auto n = detail::ascii_fold(detail::trim(name));
    if (n == "csv") return TextFormat::csv;
    if (n == "tsv") return TextFormat::tsv;
    if (n == "jsonl") return TextFormat::jsonl;
    throw InvariantError(fmt::format("unknown dataset format '{}'", name));
}

TextFormat text_format_for(const std::filesystem::path& path) {
    const auto ext = detail::ascii_fold(path.extension().string());
    if (ext == ".csv") return TextFormat::csv;
    if (ext == ".tsv") return TextFormat::tsv;
    if (ext == ".jsonl" || ext == ".json") return TextFormat::jsonl;
    throw LoadError(fmt::format("{}: cannot infer dataset format from extension", path.string()));
}

Dataset::Dataset(LabelSchema schema, std::map<Split, std::vector<LabeledExample>> splits)
    : schema_(std::move(schema)), splits_(std::move(splits)) {
    if (splits_.empty()) {
        throw InvariantError("a dataset needs at least one split");
    }
    for (const auto& [split, examples] : splits_) {
        std::unordered_set<std::string_view> seen;
        for (const auto& ex : examples) {
            if (!seen.insert(ex.id).second) {
                throw InvariantError(fmt::format("duplicate id '{}' in {} split", ex.id, to_string(split)));
            }
            if (ex.label >= schema_.size()) {
                throw InvariantError(fmt::format("example '{}' has a label outside schema '{}'", ex.id,
                                                 schema_.language()));
            }
        }
    }
}

const std::vector<LabeledExample>& Dataset::split(Split split) const {
    const auto it = splits_.find(split);
    if (it == splits_.end()) {
        throw Error(fmt::format("dataset for '{}' has no {} split", schema_.language(), to_string(split)));
    }
    return it->second;
}

namespace {

std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

struct RawRecord {
    std::size_t line;
    std::string id;
    std::string text;
    std::string label;
};

std::vector<RawRecord> read_delimited(std::string_view contents, char delimiter) {
    auto records = detail::parse_delimited(contents, delimiter);
    std::erase_if(records, [](const detail::DelimitedRecord& r) {
        return r.fields.size() == 1 && detail::trim(r.fields[0]).empty();
    });
    if (records.empty()) {
        throw LoadError("missing header line 'id,text,label'");
    }
    const auto& header = records.front().fields;
    std::size_t id_col = header.size(), text_col = header.size(), label_col = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto name = detail::ascii_fold(detail::trim(header[c]));
        if (name == "id") id_col = c;
        if (name == "text") text_col = c;
        if (name == "label") label_col = c;
    }
    if (id_col == header.size() || text_col == header.size() || label_col == header.size()) {
        throw LoadError("line 1: header must name columns id, text and label");
    }
    std::vector<RawRecord> out;
    out.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != header.size()) {
            throw LoadError(fmt::format("line {}: expected {} fields, found {}", rec.line, header.size(),
                                        rec.fields.size()));
        }
        out.push_back({rec.line, rec.fields[id_col], rec.fields[text_col], rec.fields[label_col]});
    }
    return out;
}

std::vector<RawRecord> read_jsonl(std::string_view contents) {
    std::vector<RawRecord> out;
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
        const auto nl = contents.find('\n', pos);
        const auto raw = contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line;
        pos = nl == std::string_view::npos ? contents.size() + 1 : nl + 1;
        if (detail::trim(raw).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::exception&) {
            throw LoadError(fmt::format("line {}: not a JSON object", line));
        }
        auto field = [&](const char* key) -> std::string {
            if (!obj.is_object() || !obj.contains(key) || !obj[key].is_string()) {
                throw LoadError(fmt::format("line {}: missing string field '{}'", line, key));
            }
            return obj[key].get<std::string>();
        };
        out.push_back({line, field("id"), field("text"), field("label")});
    }
    return out;
}

}  // namespace

std::vector<LabeledExample> load_examples(const std::filesystem::path& path, TextFormat format,
                                          const LabelSchema& schema) {
    const std::string contents = detail::read_file(path);
    try {
        if (const auto bad = detail::find_invalid_utf8(contents); bad != std::string::npos) {
            throw LoadError(fmt::format("line {}: invalid UTF-8 byte sequence at offset {}",
                                        line_of_offset(contents, bad), bad));
        }
        std::string_view body = contents;
        if (body.starts_with("\xEF\xBB\xBF")) body.remove_prefix(3);

        const auto raw = format == TextFormat::jsonl ? read_jsonl(body)
                                                     : read_delimited(body, format == TextFormat::csv ? ',' : '\t');
        std::vector<LabeledExample> examples;
        examples.reserve(raw.size());
        std::unordered_map<std::string, std::size_t> first_line;
        for (const auto& r : raw) {
            if (detail::trim(r.id).empty() || r.text.empty() || detail::trim(r.label).empty()) {
                throw LoadError(fmt::format("line {}: id, text and label must be non-empty", r.line));
            }
            const auto label = schema.find(r.label);
            if (!label) {
                throw LoadError(fmt::format("line {}: example '{}' has unknown label '{}' for schema '{}'", r.line,
                                            r.id, r.label, schema.language()));
            }
            const auto [it, inserted] = first_line.emplace(r.id, r.line);
            if (!inserted) {
                throw LoadError(fmt::format("line {}: duplicate id '{}' (first seen on line {})", r.line, r.id,
                                            it->second));
            }
            examples.push_back({r.id, r.text, *label});
        }
        return examples;
    } catch (const LoadError& e) {
        throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

Dataset load_dataset(const std::map<Split, std::filesystem::path>& paths, const LabelSchema& schema,
                     std::optional<TextFormat> format) {
    std::map<Split, std::vector<LabeledExample>> splits;
    for (const auto& [split, path] : paths) {
        splits.emplace(split, load_examples(path, format.value_or(text_format_for(path)), schema));
    }
    return Dataset(schema, std::move(splits));
}

std::string serialize_examples(const std::vector<LabeledExample>& examples, const LabelSchema& schema,
                               TextFormat format) {
    std::string out;
    if (format == TextFormat::jsonl) {
        for (const auto& ex : examples) {
            nlohmann::ordered_json obj;
            obj["id"] = ex.id;
            obj["text"] = ex.text;
            obj["label"] = schema.label(ex.label);
            out += obj.dump();
            out.push_back('\n');
        }
        return out;
    }
    const char delim = format == TextFormat::csv ? ',' : '\t';
    out += detail::join_record({"id", "text", "label"}, delim);
    out.push_back('\n');
    for (const auto& ex : examples) {
        out += detail::join_record({ex.id, ex.text, schema.label(ex.label)}, delim);
        out.push_back('\n');
    }
    return out;
}

DistributionStats split_stats(const Dataset& dataset) {
    const auto& schema = dataset.schema();
    DistributionStats stats;
    for (const auto split : kAllSplits) {
        if (!dataset.has(split)) continue;
        const auto& examples = dataset.split(split);
        if (examples.empty()) {
            throw InvariantError(fmt::format("{} split of '{}' is empty; percentages are undefined",
                                             to_string(split), schema.language()));
        }
        std::vector<std::size_t> counts(schema.size(), 0);
        for (const auto& ex : examples) ++counts[ex.label];

        SplitDistribution dist{split, examples.size(), {}};
        const auto n = static_cast<double>(examples.size());
        for (const auto count : counts) {
            dist.shares.push_back({count, 100.0 * static_cast<double>(count) / n,
                                   detail::format_ratio_percent(static_cast<long long>(count),
                                                                static_cast<long long>(examples.size()), 2)});
        }
        stats.splits.push_back(std::move(dist));
    }
    return stats;
}

std::string_view to_string(IssueKind kind) noexcept {
    switch (kind) {
        case IssueKind::cross_split_duplicate: return "cross-split-duplicate";
        case IssueKind::empty_text: return "empty-text";
        case IssueKind::label_outside_schema: return "label-outside-schema";
    }
    return "?";
}

std::vector<Issue> validate(const Dataset& dataset) {
    std::vector<Issue> issues;
    std::unordered_map<std::string_view, Split> owner;
    for (const auto& [split, examples] : dataset.splits()) {
        for (const auto& ex : examples) {
            if (const auto [it, inserted] = owner.emplace(ex.id, split); !inserted) {
                issues.push_back({IssueKind::cross_split_duplicate, ex.id,
                                  fmt::format("id appears in both {} and {}", to_string(it->second),
                                              to_string(split))});
            }
            if (detail::trim(ex.text).empty()) {
                issues.push_back({IssueKind::empty_text, ex.id, fmt::format("empty text in {}", to_string(split))});
            }
            if (ex.label >= dataset.schema().size()) {
                issues.push_back({IssueKind::label_outside_schema, ex.id,
                                  fmt::format("label index {} in {}", ex.label, to_string(split))});
            }
        }
    }
    return issues;
}

}  // namespace hteval
