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

#include "hteval/cli.hpp"

#include "hteval/corpus.hpp"
#include "hteval/detail/text_io.hpp"
#include "hteval/ensemble.hpp"
#include "hteval/error.hpp"
#include "hteval/manifest.hpp"
#include "hteval/metrics.hpp"
#include "hteval/prompting.hpp"
#include "hteval/report.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include <algorithm>
#include <mutex>
#include <set>
#include <sstream>

namespace hteval {

namespace {

namespace fs = std::filesystem;

/// Files produced by one command, written only once the command succeeded.
class ArtifactSet {
  public:
    void add(fs::path relative, std::string contents) { files_.emplace_back(std::move(relative), std::move(contents)); }

    /// On a failed write, files already written by this call are renamed
    /// with a ".quarantine" suffix before the error propagates.
    void commit(const fs::path& root) const {
        std::vector<fs::path> written;
        try {
            for (const auto& [relative, contents] : files_) {
                const auto target = root / relative;
                detail::write_file_atomic(target, contents);
                written.push_back(target);
            }
        } catch (...) {
            for (const auto& p : written) {
                std::error_code ignored;
                auto q = p;
                q += ".quarantine";
                fs::rename(p, q, ignored);
            }
            throw;
        }
    }

  private:
    std::vector<std::pair<fs::path, std::string>> files_;
};

struct Formats {
    bool text = true;
    bool csv = true;
    bool markdown = true;
    bool svg = true;

    [[nodiscard]] bool wants(DocumentFormat f) const {
        switch (f) {
            case DocumentFormat::text: return text;
            case DocumentFormat::csv: return csv;
            case DocumentFormat::markdown: return markdown;
            case DocumentFormat::svg: return svg;
        }
        return false;
    }
};

Formats parse_formats(const std::string& spec) {
    if (spec.empty() || spec == "all") return {};
    Formats f{false, false, false, false};
    std::stringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
        switch (parse_document_format(item)) {
            case DocumentFormat::text: f.text = true; break;
            case DocumentFormat::csv: f.csv = true; break;
            case DocumentFormat::markdown: f.markdown = true; break;
            case DocumentFormat::svg: f.svg = true; break;
        }
    }
    return f;
}

struct Context {
    std::optional<Manifest> manifest;
    fs::path out;
    Formats formats;
    std::ostream& diag;

    [[nodiscard]] const Manifest& need_manifest() const {
        if (!manifest) throw Error("this command needs --manifest");
        return *manifest;
    }
};

LabelSchema manifest_schema(const Manifest& m) { return resolve_schema(m.schema_ref, m.base_dir); }

Dataset manifest_dataset(const Manifest& m, const LabelSchema& schema) {
    if (m.datasets.empty()) throw Error("manifest lists no datasets");
    return load_dataset(m.datasets, schema, m.dataset_format);
}

PredictionSet renamed(const PredictionSet& p, std::string model_id) {
    return PredictionSet(std::move(model_id), p.schema(), {p.ids().begin(), p.ids().end()},
                         {p.scores().begin(), p.scores().end()}, p.normalized());
}

std::string file_tag(std::string_view model, Split split) {
    return split == Split::test ? std::string(model) : fmt::format("{}_{}", model, to_string(split));
}

void add_confusion(ArtifactSet& artifacts, const Context& ctx, const ConfusionMatrix& cm, const std::string& language,
                   const std::string& tag) {
    for (const auto f : {DocumentFormat::text, DocumentFormat::csv, DocumentFormat::svg}) {
        if (!ctx.formats.wants(f)) continue;
        artifacts.add(fs::path("reports") / language / fmt::format("confusion_{}.{}", tag, extension_for(f)),
                      render_confusion(cm, f));
    }
}

void add_metrics(ArtifactSet& artifacts, const MetricsReport& report, const std::string& model, Split split) {
    const auto stem = fmt::format("{}_{}", model, to_string(split));
    artifacts.add(fs::path("metrics") / (stem + ".csv"), to_csv(report));
    artifacts.add(fs::path("metrics") / (stem + ".txt"), to_text(report));
}

void add_run_record(ArtifactSet& artifacts, const std::string& language, const std::string& model, Split split,
                    RunKind kind, double score) {
    if (split == Split::train) return;
    RunRecord run{language, model, std::nullopt, std::nullopt, kind};
    (split == Split::dev ? run.dev_f1 : run.test_f1) = score;
    artifacts.add(fs::path("runs") / fmt::format("{}_{}.jsonl", model, to_string(split)),
                  serialize_run_records(std::span<const RunRecord>(&run, 1)));
}

// ---------------------------------------------------------------- stats

ArtifactSet cmd_stats(const Context& ctx) {
    const auto& m = ctx.need_manifest();
    const auto schema = manifest_schema(m);
    const auto dataset = manifest_dataset(m, schema);
    for (const auto& issue : validate(dataset)) {
        ctx.diag << fmt::format("warning: {} '{}': {}\n", to_string(issue.kind), issue.id, issue.detail);
    }
    const auto stats = split_stats(dataset);

    std::vector<std::string> header{"label"};
    for (const auto& s : stats.splits) header.emplace_back(to_string(s.split));
    std::string table = detail::join_record(header, ',') + "\n";
    std::string md = fmt::format("### {}\n\n| Labels |", m.language);
    for (const auto& s : stats.splits) md += fmt::format(" {} |", to_string(s.split));
    md += "\n|---|";
    for (std::size_t i = 0; i < stats.splits.size(); ++i) md += "---:|";
    md += '\n';
    for (LabelIndex c = 0; c < schema.size(); ++c) {
        std::vector<std::string> row{schema.label(c)};
        md += fmt::format("| {} |", schema.label(c));
        for (const auto& s : stats.splits) {
            row.push_back(s.shares[c].display);
            md += fmt::format(" {} |", s.shares[c].display);
        }
        table += detail::join_record(row, ',') + "\n";
        md += '\n';
    }
    std::string detail_csv = "split,label,count,percentage,display,split_size\n";
    for (const auto& s : stats.splits) {
        for (LabelIndex c = 0; c < schema.size(); ++c) {
            const auto& share = s.shares[c];
            detail_csv += detail::join_record({std::string(to_string(s.split)), schema.label(c), std::to_string(share.count),
                                               detail::format_exact(share.percentage), share.display,
                                               std::to_string(s.size)},
                                              ',') +
                          "\n";
        }
    }
    ArtifactSet artifacts;
    if (ctx.formats.csv) {
        artifacts.add("stats/distribution.csv", table);
        artifacts.add("stats/distribution_detail.csv", detail_csv);
    }
    if (ctx.formats.markdown) artifacts.add("stats/distribution.md", md);
    if (ctx.formats.text) artifacts.add("stats/distribution.txt", table);
    return artifacts;
}

// ---------------------------------------------------------------- eval

struct ResolvedPredictions {
    PredictionSet predictions;
    RunKind kind;
    std::set<std::string> audited_failures;
};

std::set<std::string> read_failure_ids(const fs::path& path) {
    std::set<std::string> ids;
    if (!fs::exists(path)) return ids;
    const auto records = detail::parse_delimited(detail::read_file(path), ',');
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (!records[r].fields.empty() && !records[r].fields[0].empty()) ids.insert(records[r].fields[0]);
    }
    return ids;
}

ResolvedPredictions resolve_predictions(const Context& ctx, const std::string& model, Split split,
                                        const LabelSchema& schema) {
    const auto& m = ctx.need_manifest();
    for (const auto& [id, files] : m.predictions) {
        if (id != model) continue;
        const auto it = files.find(split);
        if (it == files.end()) break;
        return {renamed(load_predictions(it->second, schema), model), RunKind::single_model, {}};
    }
    const auto prompted = ctx.out / "prompt" / (model + "_predictions.jsonl");
    if (fs::exists(prompted)) {
        return {renamed(load_predictions(prompted, schema), model), RunKind::prompted,
                read_failure_ids(ctx.out / "prompt" / (model + "_failures.csv"))};
    }
    const auto ensembled = ctx.out / "ensemble" / (model + "_predictions.jsonl");
    if (fs::exists(ensembled)) {
        const auto weights = parse_weights(detail::read_file(ctx.out / "ensemble" / (model + "_weights.json")));
        const auto kind = weights.provenance == WeightProvenance::test_f1 ? RunKind::ensemble_test_weighted
                                                                          : RunKind::ensemble_dev_weighted;
        return {renamed(load_predictions(ensembled, schema), model), kind, {}};
    }
    throw Error(fmt::format("no predictions for model '{}' on the {} split", model, to_string(split)));
}

ArtifactSet cmd_eval(const Context& ctx, const std::string& model, Split split) {
    const auto& m = ctx.need_manifest();
    const auto schema = manifest_schema(m);
    const auto dataset = manifest_dataset(m, schema);
    const auto& gold_all = dataset.split(split);
    auto resolved = resolve_predictions(ctx, model, split, schema);

    std::vector<LabeledExample> gold;
    std::size_t excluded = 0;
    for (const auto& ex : gold_all) {
        if (!resolved.predictions.find(ex.id) && resolved.audited_failures.contains(ex.id)) {
            ++excluded;
            continue;
        }
        gold.push_back(ex);
    }
    if (excluded) {
        ctx.diag << fmt::format("note: {} item(s) without a parsable response excluded from evaluation of '{}'\n",
                                excluded, model);
    }
    const auto [g, p] = align_decisions(resolved.predictions, gold);
    const auto cm = confusion_matrix(g, p, schema);
    const auto report = evaluate(cm);

    ArtifactSet artifacts;
    add_metrics(artifacts, report, model, split);
    add_confusion(artifacts, ctx, cm, m.language, file_tag(model, split));
    add_run_record(artifacts, m.language, model, split, resolved.kind, report.macro_f1);
    ctx.diag << fmt::format("{} on {}: macro F1 {:.4f}, accuracy {:.4f} ({} examples)\n", model, to_string(split),
                            report.macro_f1, report.accuracy, report.total);
    return artifacts;
}

// ---------------------------------------------------------------- ensemble

ArtifactSet cmd_ensemble(const Context& ctx, const std::string& weight_source, Split split) {
    const auto& m = ctx.need_manifest();
    const auto schema = manifest_schema(m);
    const auto dataset = manifest_dataset(m, schema);
    const auto source = parse_weight_provenance(weight_source);

    EnsembleConfig config;
    std::optional<WeightVector> manual;
    std::string config_name;
    if (m.ensemble_json) {
        try {
            const auto doc = nlohmann::ordered_json::parse(*m.ensemble_json);
            if (doc.contains("name")) config_name = doc["name"].get<std::string>();
            if (doc.contains("members")) config.members = doc["members"].get<std::vector<std::string>>();
            if (doc.contains("normalize_output")) config.normalize_output = doc["normalize_output"].get<bool>();
            if (doc.contains("weights")) {
                WeightVector w;
                w.provenance = WeightProvenance::manual;
                for (const auto& [id, v] : doc["weights"].items()) w.weights.emplace_back(id, v.get<double>());
                manual = std::move(w);
            }
        } catch (const nlohmann::json::exception& e) {
            throw LoadError(fmt::format("malformed ensemble configuration: {}", e.what()));
        }
    }
    if (config.members.empty()) {
        for (const auto& [id, files] : m.predictions) config.members.push_back(id);
    }
    if (config.members.empty()) throw Error("no ensemble members: the manifest lists no predictions");
    config.name = config_name.empty() ? fmt::format("ensemble-{}", weight_source) : config_name;

    auto load_members = [&](Split s) {
        std::vector<PredictionSet> sets;
        for (const auto& id : config.members) sets.push_back(resolve_predictions(ctx, id, s, schema).predictions);
        return sets;
    };

    if (source == WeightProvenance::manual) {
        if (!manual) throw Error("--weight-source manual needs \"weights\" in the ensemble configuration");
        config.weights = *manual;
    } else {
        const Split weight_split = source == WeightProvenance::dev_f1 ? Split::dev : Split::test;
        const auto members = load_members(weight_split);
        config.weights = derive_weights(members, dataset.split(weight_split), weight_split);
    }
    if (const auto warning = circularity_warning(config.weights)) ctx.diag << *warning << '\n';
    for (const auto& [id, w] : config.weights.weights) {
        ctx.diag << fmt::format("weight {} = {:.6f} ({})\n", id, w, to_string(config.weights.provenance));
    }

    const auto members = load_members(split);
    const auto combined = combine(members, config);

    ArtifactSet artifacts;
    const fs::path dir("ensemble");
    artifacts.add(dir / (config.name + "_weights.json"), serialize_weights(config.weights));
    artifacts.add(dir / (config.name + "_decisions.csv"), decisions_csv(combined));
    artifacts.add(dir / (config.name + "_predictions.jsonl"), serialize_predictions(combined));

    if (dataset.has(split)) {
        const auto [g, p] = align_decisions(combined, dataset.split(split));
        const auto cm = confusion_matrix(g, p, schema);
        const auto report = evaluate(cm);
        add_metrics(artifacts, report, config.name, split);
        add_confusion(artifacts, ctx, cm, m.language, file_tag(config.name, split));
        if (source != WeightProvenance::manual) {
            add_run_record(artifacts, m.language, config.name, split,
                           source == WeightProvenance::dev_f1 ? RunKind::ensemble_dev_weighted
                                                              : RunKind::ensemble_test_weighted,
                           report.macro_f1);
        }
        ctx.diag << fmt::format("{} on {}: macro F1 {:.4f}, accuracy {:.4f}\n", config.name, to_string(split),
                                report.macro_f1, report.accuracy);
    } else {
        ctx.diag << fmt::format("note: no gold {} split; ensemble decisions written without evaluation\n",
                                to_string(split));
    }
    return artifacts;
}

// ---------------------------------------------------------------- prompt

class RecordingBackend : public ChatBackend {
  public:
    explicit RecordingBackend(ChatBackend& inner) : inner_(inner) {}
    std::string complete(const ChatRequest& request) override {
        auto response = inner_.complete(request);
        const std::lock_guard lock(mutex_);
        store_.record(request.prompt_sha256, response);
        return response;
    }
    [[nodiscard]] const ReplayStore& store() const { return store_; }

  private:
    ChatBackend& inner_;
    std::mutex mutex_;
    ReplayStore store_;
};

ArtifactSet cmd_prompt(const Context& ctx, const std::string& mode, const std::string& prompt_config_path, Split split,
                       Split shots_split, bool partial) {
    const auto& m = ctx.need_manifest();
    const auto schema = manifest_schema(m);

    PromptOptions options;
    if (!prompt_config_path.empty()) {
        options = parse_prompt_options(detail::read_file(prompt_config_path));
    } else if (m.prompt_json) {
        options = parse_prompt_options(*m.prompt_json);
    }
    const PromptConfig config(std::move(options), schema);

    // checked before any data is touched so a missing credential fails fast
    std::unique_ptr<HttpChatBackend> http;
    std::optional<ReplayStore> replay;
    BatchOptions batch{partial, 1};
    if (mode == "live") {
        if (!m.endpoint_json) throw Error("live mode needs an \"endpoint\" entry in the manifest");
        const auto endpoint = parse_endpoint_config(*m.endpoint_json);
        batch.max_in_flight = endpoint.max_in_flight;
        http = std::make_unique<HttpChatBackend>(endpoint);
    } else if (mode == "replay") {
        if (!m.replay_store) throw Error("replay mode needs a \"replay_store\" entry in the manifest");
        replay = load_replay_store(*m.replay_store);
    } else {
        throw Error(fmt::format("unknown prompt mode '{}'", mode));
    }

    const auto dataset = manifest_dataset(m, schema);
    const auto shots = select_shots(dataset.split(shots_split), config);
    std::vector<PromptItem> items;
    for (const auto& ex : dataset.split(split)) items.push_back({ex.id, ex.text});

    ArtifactSet artifacts;
    const auto& model = config.options().model_id;
    BatchResult result = [&] {
        if (http) {
            RecordingBackend recorder(*http);
            auto r = run_batch(recorder, config, shots, items, batch);
            artifacts.add(fs::path("prompt") / (model + "_replay.jsonl"), serialize_replay_store(recorder.store()));
            return r;
        }
        return run_batch(*replay, config, shots, items, batch);
    }();
    artifacts.add(fs::path("prompt") / (model + "_predictions.jsonl"), serialize_predictions(result.predictions));
    artifacts.add(fs::path("prompt") / (model + "_failures.csv"), failures_csv(result.failures));
    ctx.diag << fmt::format("{}: {} parsed, {} failure(s) of {} item(s)\n", model, result.predictions.size(),
                            result.failures.size(), items.size());
    return artifacts;
}

// ---------------------------------------------------------------- report

ArtifactSet cmd_report(const Context& ctx, const std::string& runs_path) {
    std::vector<RunRecord> runs;
    if (!runs_path.empty() || (ctx.manifest && ctx.manifest->runs)) {
        const fs::path p = runs_path.empty() ? *ctx.manifest->runs : fs::path(runs_path);
        try {
            runs = parse_run_records(detail::read_file(p));
        } catch (const LoadError& e) {
            throw LoadError(fmt::format("{}: {}", p.string(), e.what()));
        }
    } else if (fs::is_directory(ctx.out / "runs")) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(ctx.out / "runs")) {
            if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            auto more = parse_run_records(detail::read_file(f));
            runs.insert(runs.end(), more.begin(), more.end());
        }
        if (ctx.manifest) {
            const auto& preds = ctx.manifest->predictions;
            auto rank = [&](const RunRecord& r) {
                const auto it = std::find_if(preds.begin(), preds.end(), [&](const auto& e) { return e.first == r.model_id; });
                return static_cast<std::size_t>(it - preds.begin());
            };
            std::stable_sort(runs.begin(), runs.end(),
                             [&](const RunRecord& a, const RunRecord& b) { return rank(a) < rank(b); });
        }
    }
    runs = merge_run_records(runs);
    if (runs.empty()) throw Error("no run records to report");

    ArtifactSet artifacts;
    const fs::path dir("reports");
    for (const auto f : {DocumentFormat::csv, DocumentFormat::markdown, DocumentFormat::text}) {
        if (ctx.formats.wants(f)) {
            artifacts.add(dir / fmt::format("results_table.{}", extension_for(f)), results_table(runs, f));
        }
    }

    std::vector<std::string> languages;
    for (const auto& r : runs) {
        if (std::find(languages.begin(), languages.end(), r.language) == languages.end()) languages.push_back(r.language);
    }
    for (const auto& language : languages) {
        std::optional<LabelSchema> schema;
        if (ctx.manifest && ctx.manifest->language == language) {
            schema = manifest_schema(*ctx.manifest);
        } else {
            try {
                schema = builtin_schema(language);
            } catch (const InvariantError&) {
                ctx.diag << fmt::format("note: no schema for '{}'; summary omits confusion matrices\n", language);
            }
        }
        std::vector<std::pair<std::string, ConfusionMatrix>> matrices;
        const auto lang_dir = ctx.out / dir / language;
        if (schema && fs::is_directory(lang_dir)) {
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(lang_dir)) {
                const auto name = entry.path().filename().string();
                if (name.starts_with("confusion_") && entry.path().extension() == ".csv") files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                auto name = f.stem().string().substr(std::string_view("confusion_").size());
                matrices.emplace_back(std::move(name), parse_confusion_csv(detail::read_file(f), *schema));
            }
        }
        artifacts.add(dir / language / "summary.md", language_summary(language, runs, matrices));
    }
    return artifacts;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& diagnostics) {
    CLI::App app{"Evaluation, ensembling and few-shot prompting for homophobia/transphobia classifiers", "hteval"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string manifest_path, out_dir, format = "all";
    app.add_option("--manifest", manifest_path, "Run manifest (JSON)");
    app.add_option("--out", out_dir, "Output directory (overrides the manifest)");
    app.add_option("--format", format, "Comma-separated output formats: text,csv,markdown,svg or all");

    auto* stats = app.add_subcommand("stats", "Label distribution per split");

    auto* eval = app.add_subcommand("eval", "Score one model's predictions");
    std::string model, split_name = "test";
    eval->add_option("--model", model, "Model id")->required();
    eval->add_option("--split", split_name, "Split to evaluate")->capture_default_str();

    auto* ensemble = app.add_subcommand("ensemble", "Weighted soft-vote ensemble");
    std::string weight_source;
    std::string ensemble_split = "test";
    ensemble->add_option("--weight-source", weight_source, "dev, test or manual")
        ->required()
        ->check(CLI::IsMember({"dev", "test", "manual"}));
    ensemble->add_option("--split", ensemble_split, "Split to combine and evaluate")->capture_default_str();

    auto* prompt = app.add_subcommand("prompt", "Few-shot prompting against an endpoint or replay store");
    std::string mode = "replay", prompt_config, prompt_split = "test", shots_split = "train";
    bool partial = false;
    prompt->add_option("--mode", mode, "live or replay")->check(CLI::IsMember({"live", "replay"}))->capture_default_str();
    prompt->add_option("--prompt-config", prompt_config, "Prompt configuration (JSON)");
    prompt->add_option("--split", prompt_split, "Split whose texts are classified")->capture_default_str();
    prompt->add_option("--shots-split", shots_split, "Split the exemplars come from")->capture_default_str();
    prompt->add_flag("--partial", partial, "Record replay misses and endpoint failures instead of aborting");

    auto* report = app.add_subcommand("report", "Results tables and per-language summaries");
    std::string runs_path;
    report->add_option("--runs", runs_path, "Run records (JSON Lines); defaults to <out>/runs/*.jsonl");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, diagnostics, diagnostics);
    }

    try {
        std::optional<Manifest> manifest;
        if (!manifest_path.empty()) manifest = load_manifest(manifest_path);
        fs::path out = out_dir;
        if (out.empty() && manifest && manifest->output) out = *manifest->output;
        if (out.empty()) throw Error("no output directory: pass --out or set \"output\" in the manifest");
        Context ctx{std::move(manifest), out, parse_formats(format), diagnostics};

        ArtifactSet artifacts;
        if (*stats) {
            artifacts = cmd_stats(ctx);
        } else if (*eval) {
            artifacts = cmd_eval(ctx, model, parse_split(split_name));
        } else if (*ensemble) {
            artifacts = cmd_ensemble(ctx, weight_source, parse_split(ensemble_split));
        } else if (*prompt) {
            artifacts = cmd_prompt(ctx, mode, prompt_config, parse_split(prompt_split), parse_split(shots_split), partial);
        } else if (*report) {
            artifacts = cmd_report(ctx, runs_path);
        }
        artifacts.commit(ctx.out);
        return 0;
    } catch (const std::exception& e) {
        diagnostics << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace hteval
