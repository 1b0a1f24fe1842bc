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

#include "hteval/metrics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hteval {

enum class RunKind { single_model, ensemble_dev_weighted, ensemble_test_weighted, prompted };

std::string_view to_string(RunKind kind) noexcept;
RunKind parse_run_kind(std::string_view text);

/// One row of a results table.
struct RunRecord {
    std::string language;
    std::string model_id;
    std::optional<double> dev_f1;
    std::optional<double> test_f1;
    RunKind kind = RunKind::single_model;

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Throws InvariantError unless at least one score is present and all
/// present scores lie in [0, 1].
void check_run_record(const RunRecord& run);

/// JSON Lines: {"language", "model_id", "kind", "dev_f1"?, "test_f1"?}.
std::vector<RunRecord> parse_run_records(std::string_view text);
std::string serialize_run_records(std::span<const RunRecord> runs);

/// Folds records that share (language, model_id, kind) into one, keeping the
/// first-seen order. Throws InvariantError when two records disagree on a score.
std::vector<RunRecord> merge_run_records(std::span<const RunRecord> runs);

enum class DocumentFormat { text, csv, markdown, svg };

std::string_view extension_for(DocumentFormat format) noexcept;
DocumentFormat parse_document_format(std::string_view text);

/// Text and CSV grids list gold labels down the rows and predictions across.
/// SVG cells are shaded by the row-normalized count. Throws InvariantError
/// for the markdown format.
std::string render_confusion(const ConfusionMatrix& cm, DocumentFormat format);

/// Inverse of the CSV rendering.
ConfusionMatrix parse_confusion_csv(std::string_view text, const LabelSchema& schema);

enum class RecallBand { perfect, partial, collapsed };

std::string_view to_string(RecallBand band) noexcept;

inline constexpr double kPerfectRecall = 0.98;

struct ClassErrorSummary {
    std::string label;
    std::uint64_t support = 0;
    double recall = 0.0;
    /// Predicted class taking the most off-diagonal mass of this row (ties to
    /// schema order); empty when the row has no errors.
    std::optional<LabelIndex> dominant_confusion;
    std::uint64_t dominant_count = 0;
    RecallBand band = RecallBand::partial;
};

struct ErrorSummary {
    std::vector<ClassErrorSummary> classes;
};

/// Bands: recall >= 0.98 perfect, recall == 0 collapsed, partial otherwise.
ErrorSummary error_summary(const ConfusionMatrix& cm);
std::string render_error_summary(const ErrorSummary& summary, const LabelSchema& schema);

/// Table grouped by language in order of first appearance. Single-model and
/// prompted rows precede ensemble rows, with a separator between the two
/// groups when both exist. Scores show 2 decimals and the best test score of
/// each language is marked (every row sharing the best 2-decimal value).
/// Throws InvariantError for an empty run list or the svg format.
std::string results_table(std::span<const RunRecord> runs, DocumentFormat format);

/// Markdown page for one language: results panel, then an error summary and
/// text grid per named confusion matrix.
std::string language_summary(std::string_view language, std::span<const RunRecord> runs,
                             std::span<const std::pair<std::string, ConfusionMatrix>> matrices);

}  // namespace hteval
