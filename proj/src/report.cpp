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

#include "hteval/report.hpp"

#include "hteval/detail/text_io.hpp"
#include "hteval/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace hteval {

std::string_view to_string(RunKind kind) noexcept {
    switch (kind) {
        case RunKind::single_model: return "single-model";
        case RunKind::ensemble_dev_weighted: return "ensemble-dev-weighted";
        case RunKind::ensemble_test_weighted: return "ensemble-test-weighted";
        case RunKind::prompted: return "prompted";
    }
    return "?";
}

RunKind parse_run_kind(std::string_view text) {
    const auto t = detail::ascii_fold(detail::trim(text));
    for (const auto kind : {RunKind::single_model, RunKind::ensemble_dev_weighted, RunKind::ensemble_test_weighted,
                            RunKind::prompted}) {
        if (t == to_string(kind)) return kind;
    }
    throw InvariantError(fmt::format("unknown run kind '{}'", text));
}

void check_run_record(const RunRecord& run) {
    if (!run.dev_f1 && !run.test_f1) {
        throw InvariantError(fmt::format("run '{}' ({}) has neither a dev nor a test score", run.model_id, run.language));
    }
    for (const auto& v : {run.dev_f1, run.test_f1}) {
        if (v && !(*v >= 0.0 && *v <= 1.0)) {
            throw InvariantError(fmt::format("run '{}' ({}) has score {} outside [0, 1]", run.model_id, run.language, *v));
        }
    }
}

std::vector<RunRecord> parse_run_records(std::string_view text) {
    std::vector<RunRecord> runs;
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line;
        if (detail::trim(raw).empty()) continue;
        try {
            const auto obj = nlohmann::json::parse(raw);
            RunRecord run;
            run.language = obj.at("language").get<std::string>();
            run.model_id = obj.at("model_id").get<std::string>();
            run.kind = obj.contains("kind") ? parse_run_kind(obj["kind"].get<std::string>()) : RunKind::single_model;
            if (obj.contains("dev_f1") && !obj["dev_f1"].is_null()) run.dev_f1 = obj["dev_f1"].get<double>();
            if (obj.contains("test_f1") && !obj["test_f1"].is_null()) run.test_f1 = obj["test_f1"].get<double>();
            check_run_record(run);
            runs.push_back(std::move(run));
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(fmt::format("line {}: malformed run record: {}", line, e.what()));
        } catch (const InvariantError& e) {
            throw LoadError(fmt::format("line {}: {}", line, e.what()));
        }
    }
    return runs;
}

std::string serialize_run_records(std::span<const RunRecord> runs) {
    std::string out;
    for (const auto& run : runs) {
        nlohmann::ordered_json obj;
        obj["language"] = run.language;
        obj["model_id"] = run.model_id;
        obj["kind"] = std::string(to_string(run.kind));
        if (run.dev_f1) obj["dev_f1"] = *run.dev_f1;
        if (run.test_f1) obj["test_f1"] = *run.test_f1;
        out += obj.dump() + "\n";
    }
    return out;
}

std::vector<RunRecord> merge_run_records(std::span<const RunRecord> runs) {
    std::vector<RunRecord> out;
    std::map<std::tuple<std::string, std::string, RunKind>, std::size_t> slot;
    for (const auto& run : runs) {
        const auto key = std::make_tuple(run.language, run.model_id, run.kind);
        const auto [it, inserted] = slot.emplace(key, out.size());
        if (inserted) {
            out.push_back(run);
            continue;
        }
        auto& merged = out[it->second];
        auto fold = [&](std::optional<double>& into, const std::optional<double>& from, std::string_view what) {
            if (!from) return;
            if (into && *into != *from) {
                throw InvariantError(fmt::format("run '{}' ({}) has conflicting {} scores {} and {}", run.model_id,
                                                 run.language, what, *into, *from));
            }
            into = from;
        };
        fold(merged.dev_f1, run.dev_f1, "dev");
        fold(merged.test_f1, run.test_f1, "test");
    }
    return out;
}

std::string_view extension_for(DocumentFormat format) noexcept {
    switch (format) {
        case DocumentFormat::text: return "txt";
        case DocumentFormat::csv: return "csv";
        case DocumentFormat::markdown: return "md";
        case DocumentFormat::svg: return "svg";
    }
    return "?";
}

DocumentFormat parse_document_format(std::string_view text) {
    const auto t = detail::ascii_fold(detail::trim(text));
    if (t == "text" || t == "txt") return DocumentFormat::text;
    if (t == "csv") return DocumentFormat::csv;
    if (t == "markdown" || t == "md") return DocumentFormat::markdown;
    if (t == "svg") return DocumentFormat::svg;
    throw InvariantError(fmt::format("unknown output format '{}'", text));
}

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string confusion_text(const ConfusionMatrix& cm) {
    const auto labels = cm.schema().labels();
    std::size_t head = std::string_view("gold \\ predicted").size();
    for (const auto& l : labels) head = std::max(head, l.size());
    std::vector<std::size_t> widths;
    for (LabelIndex p = 0; p < labels.size(); ++p) {
        std::size_t w = labels[p].size();
        for (LabelIndex g = 0; g < labels.size(); ++g) w = std::max(w, fmt::formatted_size("{}", cm.at(g, p)));
        widths.push_back(w);
    }
    std::string out = fmt::format("{:<{}}", "gold \\ predicted", head);
    for (LabelIndex p = 0; p < labels.size(); ++p) out += fmt::format("  {:>{}}", labels[p], widths[p]);
    out += '\n';
    for (LabelIndex g = 0; g < labels.size(); ++g) {
        out += fmt::format("{:<{}}", labels[g], head);
        for (LabelIndex p = 0; p < labels.size(); ++p) out += fmt::format("  {:>{}}", cm.at(g, p), widths[p]);
        out += '\n';
    }
    return out;
}

std::string confusion_csv(const ConfusionMatrix& cm) {
    const auto labels = cm.schema().labels();
    std::vector<std::string> header{"gold/predicted"};
    header.insert(header.end(), labels.begin(), labels.end());
    std::string out = detail::join_record(header, ',') + "\n";
    for (LabelIndex g = 0; g < labels.size(); ++g) {
        std::vector<std::string> row{labels[g]};
        for (LabelIndex p = 0; p < labels.size(); ++p) row.push_back(std::to_string(cm.at(g, p)));
        out += detail::join_record(row, ',') + "\n";
    }
    return out;
}

std::string confusion_svg(const ConfusionMatrix& cm) {
    constexpr int cell = 72;
    constexpr int left = 190;
    constexpr int top = 110;
    const auto labels = cm.schema().labels();
    const int k = static_cast<int>(labels.size());
    const int width = left + k * cell + 20;
    const int height = top + k * cell + 40;

    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n",
        width, height);
    out += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n", width, height);
    out += fmt::format("<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                       left + k * cell / 2, xml_escape(cm.schema().language()));
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">Predicted</text>\n", left + k * cell / 2,
                       top - 60);
    out += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">Gold</text>\n",
                       top + k * cell / 2);
    for (int p = 0; p < k; ++p) {
        const int x = left + p * cell + cell / 2;
        out += fmt::format("<text x=\"{0}\" y=\"{1}\" text-anchor=\"start\" transform=\"rotate(-35 {0} {1})\">{2}</text>\n",
                           x, top - 8, xml_escape(labels[static_cast<std::size_t>(p)]));
    }
    for (int g = 0; g < k; ++g) {
        const auto gi = static_cast<LabelIndex>(g);
        const auto row_total = cm.row_sum(gi);
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 8,
                           top + g * cell + cell / 2 + 4, xml_escape(labels[gi]));
        for (int p = 0; p < k; ++p) {
            const auto count = cm.at(gi, static_cast<LabelIndex>(p));
            const double share = row_total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(row_total);
            const auto channel = [share](int from, int to) {
                return static_cast<int>(std::lround(from + (to - from) * share));
            };
            out += fmt::format(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#{:02x}{:02x}{:02x}\" stroke=\"#808080\"/>\n",
                left + p * cell, top + g * cell, cell, cell, channel(255, 31), channel(255, 78), channel(255, 121));
            out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n",
                               left + p * cell + cell / 2, top + g * cell + cell / 2 + 4,
                               share > 0.5 ? "#ffffff" : "#000000", count);
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace

std::string render_confusion(const ConfusionMatrix& cm, DocumentFormat format) {
    switch (format) {
        case DocumentFormat::text: return confusion_text(cm);
        case DocumentFormat::csv: return confusion_csv(cm);
        case DocumentFormat::svg: return confusion_svg(cm);
        case DocumentFormat::markdown: break;
    }
    throw InvariantError("confusion matrices render as text, csv or svg");
}

ConfusionMatrix parse_confusion_csv(std::string_view text, const LabelSchema& schema) {
    auto records = detail::parse_delimited(text, ',');
    std::erase_if(records, [](const auto& r) { return r.fields.size() == 1 && r.fields[0].empty(); });
    const auto k = schema.size();
    if (records.size() != k + 1) {
        throw LoadError(fmt::format("confusion csv needs a header and {} rows, found {} lines", k, records.size()));
    }
    auto label_at = [&schema](const std::string& surface, std::size_t line) {
        const auto index = schema.find(surface);
        if (!index) throw LoadError(fmt::format("line {}: '{}' is not a schema label", line, surface));
        return *index;
    };
    std::vector<LabelIndex> columns;
    std::vector<bool> listed(k, false);
    for (std::size_t c = 1; c < records[0].fields.size(); ++c) {
        const auto index = label_at(records[0].fields[c], records[0].line);
        if (listed[index]) throw LoadError(fmt::format("confusion csv header repeats '{}'", records[0].fields[c]));
        listed[index] = true;
        columns.push_back(index);
    }
    if (columns.size() != k) throw LoadError("confusion csv header must list every schema label");
    std::vector<std::uint64_t> counts(k * k, 0);
    std::vector<bool> seen(k, false);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& f = records[r].fields;
        if (f.size() != k + 1) throw LoadError(fmt::format("line {}: expected {} fields", records[r].line, k + 1));
        const auto g = label_at(f[0], records[r].line);
        if (seen[g]) throw LoadError(fmt::format("line {}: row '{}' repeats", records[r].line, f[0]));
        seen[g] = true;
        for (std::size_t c = 0; c < k; ++c) {
            try {
                std::size_t used = 0;
                const auto v = std::stoull(f[c + 1], &used);
                if (used != f[c + 1].size()) throw std::invalid_argument("trailing characters");
                counts[g * k + columns[c]] = v;
            } catch (const std::logic_error&) {
                throw LoadError(fmt::format("line {}: '{}' is not a count", records[r].line, f[c + 1]));
            }
        }
    }
    return ConfusionMatrix(schema, std::move(counts));
}

std::string_view to_string(RecallBand band) noexcept {
    switch (band) {
        case RecallBand::perfect: return "perfect";
        case RecallBand::partial: return "partial";
        case RecallBand::collapsed: return "collapsed";
    }
    return "?";
}

ErrorSummary error_summary(const ConfusionMatrix& cm) {
    const auto prf = per_class_prf(cm);
    ErrorSummary out;
    for (LabelIndex c = 0; c < cm.classes(); ++c) {
        ClassErrorSummary s;
        s.label = cm.schema().label(c);
        s.support = prf[c].support;
        s.recall = prf[c].recall;
        for (LabelIndex p = 0; p < cm.classes(); ++p) {
            if (p == c) continue;
            const auto count = cm.at(c, p);
            if (count > s.dominant_count) {
                s.dominant_count = count;
                s.dominant_confusion = p;
            }
        }
        if (s.recall >= kPerfectRecall) {
            s.band = RecallBand::perfect;
        } else if (s.recall == 0.0) {
            s.band = RecallBand::collapsed;
        } else {
            s.band = RecallBand::partial;
        }
        out.classes.push_back(std::move(s));
    }
    return out;
}

std::string render_error_summary(const ErrorSummary& summary, const LabelSchema& schema) {
    std::string out;
    for (const auto& c : summary.classes) {
        out += fmt::format("- {} (support {}): recall {:.2f}, {}", c.label, c.support, c.recall, to_string(c.band));
        if (c.dominant_confusion) {
            out += fmt::format("; most often mistaken for {} ({})", schema.label(*c.dominant_confusion),
                               c.dominant_count);
        }
        out += '\n';
    }
    return out;
}

namespace {

bool is_ensemble(RunKind kind) {
    return kind == RunKind::ensemble_dev_weighted || kind == RunKind::ensemble_test_weighted;
}

std::string display_name(const RunRecord& run) {
    switch (run.kind) {
        case RunKind::ensemble_dev_weighted: return "Wt. (Dev F1) Ensemble";
        case RunKind::ensemble_test_weighted: return "Wt. (Test F1) Ensemble";
        default: return run.model_id;
    }
}

std::string score(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : std::string(); }

struct Panel {
    std::string language;
    std::vector<const RunRecord*> models;
    std::vector<const RunRecord*> ensembles;
    std::string best;  // 2-decimal best test score, empty if none
};

std::vector<Panel> group_panels(std::span<const RunRecord> runs) {
    std::vector<Panel> panels;
    for (const auto& run : runs) {
        check_run_record(run);
        auto it = std::find_if(panels.begin(), panels.end(), [&](const Panel& p) { return p.language == run.language; });
        if (it == panels.end()) {
            panels.push_back({run.language, {}, {}, {}});
            it = std::prev(panels.end());
        }
        (is_ensemble(run.kind) ? it->ensembles : it->models).push_back(&run);
    }
    for (auto& panel : panels) {
        std::optional<double> best;
        for (const auto* group : {&panel.models, &panel.ensembles}) {
            for (const auto* run : *group) {
                if (run->test_f1) {
                    const double shown = std::stod(score(run->test_f1));
                    best = best ? std::max(*best, shown) : shown;
                }
            }
        }
        if (best) panel.best = fmt::format("{:.2f}", *best);
    }
    return panels;
}

bool is_best(const Panel& panel, const RunRecord& run) {
    return run.test_f1 && !panel.best.empty() && score(run.test_f1) == panel.best;
}

std::string panel_markdown(const Panel& panel, std::string_view heading_prefix) {
    std::string out = fmt::format("{} {}\n\n| Models | Dev F1 | Test F1 |\n|---|---:|---:|\n", heading_prefix,
                                  panel.language);
    auto row = [&](const RunRecord& run) {
        const auto test = score(run.test_f1);
        out += fmt::format("| {} | {} | {} |\n", display_name(run), score(run.dev_f1),
                           is_best(panel, run) ? "**" + test + "**" : test);
    };
    for (const auto* run : panel.models) row(*run);
    if (!panel.models.empty() && !panel.ensembles.empty()) out += "| | | |\n";
    for (const auto* run : panel.ensembles) row(*run);
    return out;
}

}  // namespace

std::string results_table(std::span<const RunRecord> runs, DocumentFormat format) {
    if (runs.empty()) throw InvariantError("results table needs at least one run");
    const auto panels = group_panels(runs);
    std::string out;
    switch (format) {
        case DocumentFormat::csv: {
            out = "language,model,kind,dev_f1,test_f1,best\n";
            for (const auto& panel : panels) {
                for (const auto* group : {&panel.models, &panel.ensembles}) {
                    for (const auto* run : *group) {
                        out += detail::join_record({panel.language, display_name(*run), std::string(to_string(run->kind)),
                                                    score(run->dev_f1), score(run->test_f1),
                                                    is_best(panel, *run) ? "1" : "0"},
                                                   ',') +
                               "\n";
                    }
                }
            }
            return out;
        }
        case DocumentFormat::markdown: {
            for (std::size_t i = 0; i < panels.size(); ++i) {
                if (i) out += '\n';
                out += panel_markdown(panels[i], "###");
            }
            return out;
        }
        case DocumentFormat::text: {
            for (std::size_t i = 0; i < panels.size(); ++i) {
                const auto& panel = panels[i];
                std::size_t width = std::string_view("Models").size();
                for (const auto* group : {&panel.models, &panel.ensembles}) {
                    for (const auto* run : *group) width = std::max(width, display_name(*run).size());
                }
                if (i) out += '\n';
                out += panel.language + "\n";
                out += fmt::format("{:<{}}  {:>6}  {:>7}\n", "Models", width, "Dev F1", "Test F1");
                auto row = [&](const RunRecord& run) {
                    out += fmt::format("{:<{}}  {:>6}  {:>7}{}\n", display_name(run), width, score(run.dev_f1),
                                       score(run.test_f1), is_best(panel, run) ? " *" : "");
                };
                for (const auto* run : panel.models) row(*run);
                if (!panel.models.empty() && !panel.ensembles.empty()) {
                    out += std::string(width + 17, '-') + "\n";
                }
                for (const auto* run : panel.ensembles) row(*run);
            }
            return out;
        }
        case DocumentFormat::svg: break;
    }
    throw InvariantError("results tables render as text, csv or markdown");
}

std::string language_summary(std::string_view language, std::span<const RunRecord> runs,
                             std::span<const std::pair<std::string, ConfusionMatrix>> matrices) {
    std::string out = fmt::format("# {}\n", language);
    std::vector<RunRecord> mine;
    for (const auto& run : runs) {
        if (run.language == language) mine.push_back(run);
    }
    if (!mine.empty()) {
        out += '\n';
        out += panel_markdown(group_panels(mine).front(), "## Results:");
    }
    for (const auto& [name, cm] : matrices) {
        out += fmt::format("\n## Errors: {}\n\n", name);
        out += render_error_summary(error_summary(cm), cm.schema());
        out += fmt::format("\n```\n{}```\n", confusion_text(cm));
        out += fmt::format("\nmacro F1 {:.4f}, accuracy {:.4f}\n", macro_f1(cm), accuracy(cm));
    }
    return out;
}

}  // namespace hteval
