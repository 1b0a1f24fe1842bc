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

#include "hteval/ensemble.hpp"

#include "hteval/detail/text_io.hpp"
#include "hteval/error.hpp"
#include "hteval/kernels.hpp"
#include "hteval/metrics.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace hteval {

PredictionSet::PredictionSet(std::string model_id, LabelSchema schema, std::vector<std::string> ids,
                             std::vector<double> scores, bool normalized)
    : model_id_(std::move(model_id)),
      schema_(std::move(schema)),
      ids_(std::move(ids)),
      scores_(std::move(scores)),
      normalized_(normalized) {
    const auto k = schema_.size();
    if (scores_.size() != ids_.size() * k) {
        throw InvariantError(fmt::format("model '{}': {} ids need {} scores, got {}", model_id_, ids_.size(),
                                         ids_.size() * k, scores_.size()));
    }
    index_.reserve(ids_.size());
    for (std::size_t e = 0; e < ids_.size(); ++e) {
        const auto& id = ids_[e];
        if (!index_.emplace(id, e).second) {
            throw InvariantError(fmt::format("model '{}': duplicate example id '{}'", model_id_, id));
        }
        const auto r = row(e);
        double sum = 0.0;
        bool positive = false;
        for (const double v : r) {
            if (!std::isfinite(v) || v < 0.0) {
                throw InvariantError(fmt::format("model '{}', id '{}': confidence {} is negative or not finite",
                                                 model_id_, id, v));
            }
            positive = positive || v > 0.0;
            sum += v;
        }
        if (!positive) {
            throw InvariantError(fmt::format("model '{}', id '{}': confidence vector is all zero", model_id_, id));
        }
        if (normalized_ && std::abs(sum - 1.0) > kNormalizationTolerance) {
            throw InvariantError(fmt::format("model '{}', id '{}': flagged normalized but components sum to {}",
                                             model_id_, id, sum));
        }
    }
}

std::optional<std::size_t> PredictionSet::find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

PredictionSet parse_predictions(std::string_view text, const LabelSchema& schema, std::string default_model_id) {
    const auto k = schema.size();
    std::string model_id = std::move(default_model_id);
    bool normalized = false;
    std::vector<std::string> ids;
    std::vector<double> scores;

    std::size_t line = 0;
    std::size_t pos = 0;
    bool saw_record = false;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line;
        if (detail::trim(raw).empty()) continue;

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(raw);
        } catch (const nlohmann::json::exception&) {
            throw LoadError(fmt::format("line {}: not a JSON object", line));
        }
        if (!obj.is_object()) throw LoadError(fmt::format("line {}: not a JSON object", line));

        if (!obj.contains("id")) {
            if (saw_record) throw LoadError(fmt::format("line {}: header must precede the records", line));
            if (obj.contains("model_id")) {
                if (!obj["model_id"].is_string()) throw LoadError(fmt::format("line {}: model_id must be a string", line));
                model_id = obj["model_id"].get<std::string>();
            }
            if (obj.contains("normalized")) {
                if (!obj["normalized"].is_boolean()) {
                    throw LoadError(fmt::format("line {}: normalized must be a boolean", line));
                }
                normalized = obj["normalized"].get<bool>();
            }
            saw_record = true;
            continue;
        }
        saw_record = true;
        if (!obj["id"].is_string() || obj["id"].get<std::string>().empty()) {
            throw LoadError(fmt::format("line {}: id must be a non-empty string", line));
        }
        const auto id = obj["id"].get<std::string>();
        std::vector<double> row(k, 0.0);
        std::vector<bool> seen(k, false);
        for (const auto& [key, value] : obj.items()) {
            if (key == "id") continue;
            const auto label = schema.find(key);
            if (!label) throw LoadError(fmt::format("line {}: id '{}' has unknown label key '{}'", line, id, key));
            if (seen[*label]) {
                throw LoadError(fmt::format("line {}: id '{}' gives label '{}' twice", line, id, schema.label(*label)));
            }
            if (!value.is_number()) {
                throw LoadError(fmt::format("line {}: id '{}' has a non-numeric score for '{}'", line, id, key));
            }
            const double v = value.get<double>();
            if (v < 0.0) {
                throw LoadError(fmt::format("line {}: id '{}' has negative confidence {} for '{}'", line, id, v, key));
            }
            row[*label] = v;
            seen[*label] = true;
        }
        for (LabelIndex c = 0; c < k; ++c) {
            if (!seen[c]) {
                throw LoadError(fmt::format("line {}: id '{}' is missing label key '{}'", line, id, schema.label(c)));
            }
        }
        ids.push_back(id);
        scores.insert(scores.end(), row.begin(), row.end());
    }
    if (ids.empty()) throw LoadError("prediction file holds no records");
    try {
        return PredictionSet(std::move(model_id), schema, std::move(ids), std::move(scores), normalized);
    } catch (const InvariantError& e) {
        throw LoadError(e.what());
    }
}

PredictionSet load_predictions(const std::filesystem::path& path, const LabelSchema& schema) {
    try {
        return parse_predictions(detail::read_file(path), schema, path.stem().string());
    } catch (const LoadError& e) {
        throw LoadError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

std::string serialize_predictions(const PredictionSet& predictions) {
    nlohmann::ordered_json header;
    header["model_id"] = predictions.model_id();
    header["normalized"] = predictions.normalized();
    std::string out = header.dump() + "\n";
    const auto labels = predictions.schema().labels();
    for (std::size_t e = 0; e < predictions.size(); ++e) {
        nlohmann::ordered_json obj;
        obj["id"] = predictions.ids()[e];
        const auto r = predictions.row(e);
        for (std::size_t c = 0; c < labels.size(); ++c) obj[labels[c]] = r[c];
        out += obj.dump();
        out.push_back('\n');
    }
    return out;
}

std::string_view to_string(WeightProvenance provenance) noexcept {
    switch (provenance) {
        case WeightProvenance::dev_f1: return "dev-F1";
        case WeightProvenance::test_f1: return "test-F1";
        case WeightProvenance::manual: return "manual";
    }
    return "?";
}

WeightProvenance parse_weight_provenance(std::string_view text) {
    const auto t = detail::ascii_fold(detail::trim(text));
    if (t == "dev-f1" || t == "dev") return WeightProvenance::dev_f1;
    if (t == "test-f1" || t == "test") return WeightProvenance::test_f1;
    if (t == "manual") return WeightProvenance::manual;
    throw InvariantError(fmt::format("unknown weight provenance '{}'", text));
}

double WeightVector::weight_of(std::string_view model_id) const {
    for (const auto& [id, w] : weights) {
        if (id == model_id) return w;
    }
    throw InvariantError(fmt::format("no weight for model '{}'", model_id));
}

void check_weights(const WeightVector& weights) {
    std::set<std::string_view> seen;
    for (const auto& [id, w] : weights.weights) {
        if (!seen.insert(id).second) throw InvariantError(fmt::format("model '{}' is weighted twice", id));
        if (!std::isfinite(w) || w <= 0.0) {
            throw InvariantError(
                fmt::format("model '{}' has weight {}; drop the member instead of giving it a non-positive weight", id, w));
        }
    }
}

std::string serialize_weights(const WeightVector& weights) {
    nlohmann::ordered_json doc;
    doc["provenance"] = std::string(to_string(weights.provenance));
    doc["weights"] = nlohmann::ordered_json::object();
    for (const auto& [id, w] : weights.weights) doc["weights"][id] = w;
    return doc.dump(2) + "\n";
}

WeightVector parse_weights(std::string_view json_text) {
    try {
        const auto doc = nlohmann::ordered_json::parse(json_text);
        WeightVector out;
        out.provenance = doc.contains("provenance") ? parse_weight_provenance(doc.at("provenance").get<std::string>())
                                                    : WeightProvenance::manual;
        for (const auto& [id, w] : doc.at("weights").items()) out.weights.emplace_back(id, w.get<double>());
        check_weights(out);
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(fmt::format("malformed weight document: {}", e.what()));
    } catch (const InvariantError& e) {
        throw LoadError(fmt::format("invalid weight document: {}", e.what()));
    }
}

std::optional<std::string> circularity_warning(const WeightVector& weights) {
    if (weights.provenance != WeightProvenance::test_f1) return std::nullopt;
    return std::string(
        "warning: ensemble weights are macro F1 scores on the test split; evaluating this ensemble on the same "
        "split is circular and its score is optimistic");
}

std::vector<LabelIndex> decide(const PredictionSet& predictions) {
    std::vector<LabelIndex> out(predictions.size());
    for (std::size_t e = 0; e < predictions.size(); ++e) {
        const auto r = predictions.row(e);
        LabelIndex best = 0;
        for (LabelIndex c = 1; c < r.size(); ++c) {
            if (r[c] > r[best]) best = c;
        }
        out[e] = best;
    }
    return out;
}

std::pair<std::vector<LabelIndex>, std::vector<LabelIndex>> align_decisions(const PredictionSet& predictions,
                                                                          std::span<const LabeledExample> gold) {
    const auto decisions = decide(predictions);
    std::vector<LabelIndex> g, p;
    std::vector<std::string> missing;
    g.reserve(gold.size());
    p.reserve(gold.size());
    for (const auto& ex : gold) {
        const auto e = predictions.find(ex.id);
        if (!e) {
            missing.push_back(ex.id);
            continue;
        }
        g.push_back(ex.label);
        p.push_back(decisions[*e]);
    }
    if (!missing.empty()) {
        throw CoverageError(fmt::format("model '{}' has no prediction for {} id(s): {}", predictions.model_id(),
                                        missing.size(), fmt::join(missing, ", ")));
    }
    return {std::move(g), std::move(p)};
}

WeightVector derive_weights(std::span<const PredictionSet> members, std::span<const LabeledExample> gold,
                            Split split) {
    if (gold.empty()) throw InvariantError("cannot derive weights from an empty gold split");
    if (split == Split::train) throw InvariantError("weights come from the dev or test split, not train");
    WeightVector out;
    out.provenance = split == Split::dev ? WeightProvenance::dev_f1 : WeightProvenance::test_f1;
    std::vector<std::string> gaps;
    for (const auto& member : members) {
        try {
            const auto [g, p] = align_decisions(member, gold);
            const double w = macro_f1(confusion_matrix(g, p, member.schema()));
            if (w <= 0.0) {
                throw InvariantError(fmt::format(
                    "model '{}' has macro F1 0 on the {} split; a zero-weight member contributes nothing, drop it",
                    member.model_id(), to_string(split)));
            }
            out.weights.emplace_back(member.model_id(), w);
        } catch (const CoverageError& e) {
            gaps.emplace_back(e.what());
        }
    }
    if (!gaps.empty()) throw CoverageError(fmt::format("{}", fmt::join(gaps, "; ")));
    check_weights(out);
    return out;
}

PredictionSet combine(std::span<const PredictionSet> members, const EnsembleConfig& config) {
    if (members.empty() || config.members.empty()) throw InvariantError("an ensemble needs at least one member");
    check_weights(config.weights);

    const std::set<std::string> wanted(config.members.begin(), config.members.end());
    if (wanted.size() != config.members.size()) throw InvariantError("ensemble lists a member twice");
    std::set<std::string> given;
    for (const auto& m : members) {
        if (!given.insert(m.model_id()).second) {
            throw InvariantError(fmt::format("prediction sets for '{}' supplied twice", m.model_id()));
        }
    }
    if (given != wanted) {
        std::vector<std::string> diff;
        std::set_symmetric_difference(given.begin(), given.end(), wanted.begin(), wanted.end(),
                                      std::back_inserter(diff));
        throw InvariantError(fmt::format("supplied predictions and configured members differ on: {}",
                                         fmt::join(diff, ", ")));
    }

    std::vector<const PredictionSet*> ordered;
    for (const auto& m : members) ordered.push_back(&m);
    std::sort(ordered.begin(), ordered.end(),
              [](const PredictionSet* a, const PredictionSet* b) { return a->model_id() < b->model_id(); });

    const auto& reference = *ordered.front();
    const auto& schema = reference.schema();
    std::vector<std::string> ids(reference.ids().begin(), reference.ids().end());
    std::sort(ids.begin(), ids.end());
    for (const auto* m : ordered) {
        if (!(m->schema() == schema)) {
            throw InvariantError(fmt::format("model '{}' uses a different schema than '{}'", m->model_id(),
                                             reference.model_id()));
        }
        std::vector<std::string> other(m->ids().begin(), m->ids().end());
        std::sort(other.begin(), other.end());
        if (other != ids) {
            std::vector<std::string> diff;
            std::set_symmetric_difference(ids.begin(), ids.end(), other.begin(), other.end(),
                                          std::back_inserter(diff));
            throw CoverageError(fmt::format("models '{}' and '{}' cover different ids: {}", reference.model_id(),
                                            m->model_id(), fmt::join(diff, ", ")));
        }
    }

    const std::size_t k = schema.size();
    const std::size_t n = ids.size() * k;
    std::vector<double> acc(n, 0.0);
    std::vector<double> lo, hi;
    std::vector<double> aligned(n);
    double total_weight = 0.0;
    bool all_normalized = true;
    for (const auto* m : ordered) {
        for (std::size_t e = 0; e < ids.size(); ++e) {
            const auto r = m->row(*m->find(ids[e]));
            std::copy(r.begin(), r.end(), aligned.begin() + static_cast<std::ptrdiff_t>(e * k));
        }
        const double w = config.weights.weight_of(m->model_id());
        kernels::weighted_accumulate(acc, aligned, w);
        if (lo.empty()) {
            lo = aligned;
            hi = aligned;
        } else {
            kernels::track_bounds(lo, hi, aligned);
        }
        total_weight += w;
        all_normalized = all_normalized && m->normalized();
    }
    kernels::divide(acc, total_weight);
    kernels::clamp(acc, lo, hi);

    if (config.normalize_output && !all_normalized) {
        for (std::size_t e = 0; e < ids.size(); ++e) {
            const auto first = acc.begin() + static_cast<std::ptrdiff_t>(e * k);
            const double sum = std::accumulate(first, first + static_cast<std::ptrdiff_t>(k), 0.0);
            std::for_each(first, first + static_cast<std::ptrdiff_t>(k), [sum](double& v) { v /= sum; });
        }
    }
    return PredictionSet(config.name, schema, std::move(ids), std::move(acc), config.normalize_output);
}

std::string decisions_csv(const PredictionSet& predictions) {
    const auto& schema = predictions.schema();
    std::vector<std::string> header{"id", "label"};
    for (const auto& l : schema.labels()) header.push_back("score_" + l);
    std::string out = detail::join_record(header, ',') + "\n";
    const auto decisions = decide(predictions);
    for (std::size_t e = 0; e < predictions.size(); ++e) {
        std::vector<std::string> fields{predictions.ids()[e], schema.label(decisions[e])};
        for (const double v : predictions.row(e)) fields.push_back(detail::format_exact(v));
        out += detail::join_record(fields, ',') + "\n";
    }
    return out;
}

}  // namespace hteval
