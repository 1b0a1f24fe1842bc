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

#include "hteval/metrics.hpp"

#include "hteval/detail/text_io.hpp"
#include "hteval/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

namespace hteval {

ConfusionMatrix::ConfusionMatrix(LabelSchema schema, std::vector<std::uint64_t> counts)
    : schema_(std::move(schema)), counts_(std::move(counts)) {
    const auto k = schema_.size();
    if (counts_.size() != k * k) {
        throw InvariantError(fmt::format("confusion matrix needs {}x{} cells, got {}", k, k, counts_.size()));
    }
    total_ = std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
    if (total_ == 0) {
        throw InvariantError("confusion matrix holds no observations");
    }
}

std::uint64_t ConfusionMatrix::row_sum(LabelIndex gold) const {
    const auto r = row(gold);
    return std::accumulate(r.begin(), r.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::column_sum(LabelIndex predicted) const {
    std::uint64_t sum = 0;
    for (LabelIndex g = 0; g < classes(); ++g) sum += at(g, predicted);
    return sum;
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t sum = 0;
    for (LabelIndex c = 0; c < classes(); ++c) sum += at(c, c);
    return sum;
}

bool ConfusionMatrix::is_diagonal() const { return trace() == total_; }

ConfusionMatrix confusion_matrix(std::span<const LabelIndex> gold, std::span<const LabelIndex> predicted,
                                 const LabelSchema& schema) {
    if (gold.empty()) {
        throw InvariantError("cannot build a confusion matrix from zero observations");
    }
    if (gold.size() != predicted.size()) {
        throw InvariantError(
            fmt::format("gold has {} labels but predictions have {}", gold.size(), predicted.size()));
    }
    const auto k = schema.size();
    std::vector<std::uint64_t> counts(k * k, 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] >= k || predicted[i] >= k) {
            throw InvariantError(fmt::format("observation {} has a label outside schema '{}'", i, schema.language()));
        }
        ++counts[gold[i] * k + predicted[i]];
    }
    return ConfusionMatrix(schema, std::move(counts));
}

ConfusionMatrix confusion_matrix(std::span<const std::string> gold, std::span<const std::string> predicted,
                                 const LabelSchema& schema) {
    std::vector<LabelIndex> g, p;
    g.reserve(gold.size());
    p.reserve(predicted.size());
    for (const auto& s : gold) g.push_back(schema.index_of(s));
    for (const auto& s : predicted) p.push_back(schema.index_of(s));
    return confusion_matrix(g, p, schema);
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::vector<ClassMetrics> per_class_prf(const ConfusionMatrix& cm) {
    std::vector<ClassMetrics> out(cm.classes());
    for (LabelIndex c = 0; c < cm.classes(); ++c) {
        const auto tp = cm.at(c, c);
        const auto support = cm.row_sum(c);
        const auto predicted = cm.column_sum(c);
        const auto fn = support - tp;
        const auto fp = predicted - tp;
        // single rounding: 2TP/(2TP+FP+FN) is the exact harmonic mean of P and R
        out[c] = {ratio(tp, predicted), ratio(tp, support), ratio(2 * tp, 2 * tp + fp + fn), support, predicted};
    }
    return out;
}

double macro_f1(const ConfusionMatrix& cm) {
    const auto classes = per_class_prf(cm);
    double sum = 0.0;
    for (const auto& m : classes) sum += m.f1;
    return sum / static_cast<double>(classes.size());
}

double accuracy(const ConfusionMatrix& cm) { return ratio(cm.trace(), cm.total()); }

double weighted_f1(const ConfusionMatrix& cm) {
    const auto classes = per_class_prf(cm);
    double sum = 0.0;
    for (const auto& m : classes) sum += m.f1 * static_cast<double>(m.support);
    return sum / static_cast<double>(cm.total());
}

double micro_f1(const ConfusionMatrix& cm) {
    // micro precision and recall both reduce to trace/n
    return accuracy(cm);
}

MetricsReport evaluate(const ConfusionMatrix& cm) {
    const auto labels = cm.schema().labels();
    return MetricsReport{
        .labels = {labels.begin(), labels.end()},
        .classes = per_class_prf(cm),
        .macro_f1 = macro_f1(cm),
        .accuracy = accuracy(cm),
        .weighted_f1 = weighted_f1(cm),
        .micro_f1 = micro_f1(cm),
        .total = cm.total(),
    };
}

std::string to_csv(const MetricsReport& report) {
    using detail::format_exact;
    std::string out = "class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < report.labels.size(); ++c) {
        const auto& m = report.classes[c];
        out += fmt::format("{},{},{},{},{}\n", detail::quote_field(report.labels[c], ','), format_exact(m.precision),
                           format_exact(m.recall), format_exact(m.f1), m.support);
    }
    out += fmt::format("macro_f1,,,{},{}\n", format_exact(report.macro_f1), report.total);
    out += fmt::format("accuracy,,,{},{}\n", format_exact(report.accuracy), report.total);
    out += fmt::format("weighted_f1,,,{},{}\n", format_exact(report.weighted_f1), report.total);
    out += fmt::format("micro_f1,,,{},{}\n", format_exact(report.micro_f1), report.total);
    return out;
}

std::string to_text(const MetricsReport& report) {
    std::size_t width = std::string_view("weighted avg").size();
    for (const auto& l : report.labels) width = std::max(width, l.size());

    std::string out = fmt::format("{:>{}}   precision   recall       f1   support\n", "", width);
    for (std::size_t c = 0; c < report.labels.size(); ++c) {
        const auto& m = report.classes[c];
        out += fmt::format("{:>{}}   {:9.4f}   {:6.4f}   {:6.4f}   {:>7}\n", report.labels[c], width, m.precision,
                           m.recall, m.f1, m.support);
    }
    out += '\n';
    out += fmt::format("{:>{}}                     {:6.4f}   {:>7}\n", "accuracy", width, report.accuracy, report.total);
    out += fmt::format("{:>{}}                     {:6.4f}   {:>7}\n", "macro f1", width, report.macro_f1, report.total);
    out += fmt::format("{:>{}}                     {:6.4f}   {:>7}\n", "weighted avg", width, report.weighted_f1,
                       report.total);
    return out;
}

}  // namespace hteval
