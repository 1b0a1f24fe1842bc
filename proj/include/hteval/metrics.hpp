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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hteval {

/// Gold-by-predicted count grid; rows are gold labels, columns predictions,
/// both in schema order.
class ConfusionMatrix {
  public:
    /// `counts` is row-major K*K. Throws InvariantError on a size mismatch or
    /// an all-zero grid.
    ConfusionMatrix(LabelSchema schema, std::vector<std::uint64_t> counts);

    [[nodiscard]] const LabelSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] std::size_t classes() const noexcept { return schema_.size(); }
    [[nodiscard]] std::uint64_t total() const noexcept { return total_; }
    [[nodiscard]] std::uint64_t at(LabelIndex gold, LabelIndex predicted) const {
        return counts_.at(gold * classes() + predicted);
    }
    [[nodiscard]] std::span<const std::uint64_t> row(LabelIndex gold) const {
        return std::span<const std::uint64_t>(counts_).subspan(gold * classes(), classes());
    }
    [[nodiscard]] std::uint64_t row_sum(LabelIndex gold) const;
    [[nodiscard]] std::uint64_t column_sum(LabelIndex predicted) const;
    [[nodiscard]] std::uint64_t trace() const;
    [[nodiscard]] bool is_diagonal() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

  private:
    LabelSchema schema_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t total_ = 0;
};

/// Throws InvariantError on empty input, length mismatch or an index
/// outside the schema.
ConfusionMatrix confusion_matrix(std::span<const LabelIndex> gold, std::span<const LabelIndex> predicted,
                                 const LabelSchema& schema);
/// Same, over surface label strings (canonicalized through the schema).
ConfusionMatrix confusion_matrix(std::span<const std::string> gold, std::span<const std::string> predicted,
                                 const LabelSchema& schema);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
    std::uint64_t predicted = 0;
};

/// Precision = TP/(TP+FP), recall = TP/(TP+FN), F1 = 2TP/(2TP+FP+FN).
/// Every 0/0 quotient is 0, and such classes still count in macro averages.
std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm);

/// Unweighted mean of per-class F1 over all schema labels.
double macro_f1(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);
/// Support-weighted mean of per-class F1.
double weighted_f1(const ConfusionMatrix& cm);
/// For single-label multi-class data this equals accuracy.
double micro_f1(const ConfusionMatrix& cm);

struct MetricsReport {
    std::vector<std::string> labels;
    std::vector<ClassMetrics> classes;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
    double micro_f1 = 0.0;
    std::uint64_t total = 0;
};

MetricsReport evaluate(const ConfusionMatrix& cm);

/// `class,precision,recall,f1,support` rows followed by macro_f1, accuracy,
/// weighted_f1 and micro_f1 summary rows (value in the f1 column). Values are
/// written with round-trip precision.
std::string to_csv(const MetricsReport& report);
std::string to_text(const MetricsReport& report);

}  // namespace hteval
