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

#include "hteval/corpus.hpp"
#include "hteval/schema.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hteval {

/// One model's per-example confidence vectors over a schema.
///
/// Scores are stored row-major (one row of K values per example) in entry
/// order. Every row is finite, non-negative and has a positive component; a
/// set flagged normalized additionally has rows summing to 1 within 1e-6.
class PredictionSet {
  public:
    static constexpr double kNormalizationTolerance = 1e-6;

    /// Throws InvariantError naming the first offending example id.
    PredictionSet(std::string model_id, LabelSchema schema, std::vector<std::string> ids, std::vector<double> scores,
                  bool normalized);

    [[nodiscard]] const std::string& model_id() const noexcept { return model_id_; }
    [[nodiscard]] const LabelSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] bool normalized() const noexcept { return normalized_; }
    [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
    [[nodiscard]] std::size_t classes() const noexcept { return schema_.size(); }
    [[nodiscard]] std::span<const std::string> ids() const noexcept { return ids_; }
    [[nodiscard]] std::span<const double> scores() const noexcept { return scores_; }
    [[nodiscard]] std::span<const double> row(std::size_t entry) const {
        return std::span<const double>(scores_).subspan(entry * classes(), classes());
    }
    [[nodiscard]] std::optional<std::size_t> find(std::string_view id) const;

    friend bool operator==(const PredictionSet& a, const PredictionSet& b) {
        return a.model_id_ == b.model_id_ && a.schema_ == b.schema_ && a.normalized_ == b.normalized_ &&
               a.ids_ == b.ids_ && a.scores_ == b.scores_;
    }

  private:
    std::string model_id_;
    LabelSchema schema_;
    std::vector<std::string> ids_;
    std::vector<double> scores_;
    bool normalized_ = false;
    std::unordered_map<std::string, std::size_t> index_;
};

/// JSON Lines: optional header {"model_id": ..., "normalized": ...}, then one
/// object per example with "id" and one numeric field per label (canonical
/// or alias names). Without a header the model id is `default_model_id`.
PredictionSet parse_predictions(std::string_view text, const LabelSchema& schema, std::string default_model_id);
/// Model id defaults to the file stem.
PredictionSet load_predictions(const std::filesystem::path& path, const LabelSchema& schema);
std::string serialize_predictions(const PredictionSet& predictions);

enum class WeightProvenance { dev_f1, test_f1, manual };

std::string_view to_string(WeightProvenance provenance) noexcept;
WeightProvenance parse_weight_provenance(std::string_view text);

struct WeightVector {
    std::vector<std::pair<std::string, double>> weights;
    WeightProvenance provenance = WeightProvenance::manual;

    /// Throws InvariantError when the id is absent.
    [[nodiscard]] double weight_of(std::string_view model_id) const;
};

/// Throws InvariantError on duplicate ids or a weight that is not finite and
/// strictly positive.
void check_weights(const WeightVector& weights);

std::string serialize_weights(const WeightVector& weights);
WeightVector parse_weights(std::string_view json_text);

/// Warning text for weights taken from the split being evaluated.
std::optional<std::string> circularity_warning(const WeightVector& weights);

/// Argmax per entry, ties going to the earliest schema label. Aligned with ids().
std::vector<LabelIndex> decide(const PredictionSet& predictions);

/// Gold and predicted label indexes over the gold examples' order. Throws
/// CoverageError listing every gold id the predictions lack.
std::pair<std::vector<LabelIndex>, std::vector<LabelIndex>> align_decisions(
    const PredictionSet& predictions, std::span<const LabeledExample> gold);

/// weight(m) = macro F1 of m's argmax decisions against `gold`. Only the dev
/// and test splits are accepted as weight sources. Throws CoverageError on
/// missing ids and InvariantError when a member scores zero.
WeightVector derive_weights(std::span<const PredictionSet> members, std::span<const LabeledExample> gold,
                            Split split);

struct EnsembleConfig {
    std::string name = "ensemble";
    std::vector<std::string> members;
    WeightVector weights;
    /// When set, output rows are probability distributions (rescaled if some
    /// input was not normalized).
    bool normalize_output = true;
};

/// Weighted soft vote: s = sum_m(w_m * c_m) / sum_m(w_m) per example.
///
/// Members are combined in model-id order and the output is ordered by
/// example id, so the result does not depend on the order of `members`.
/// Each output component is clamped into the members' [min, max] for that
/// component, which keeps rounding from leaving the convex hull.
PredictionSet combine(std::span<const PredictionSet> members, const EnsembleConfig& config);

/// CSV `id,label,score_<label1>,...,score_<labelK>`.
std::string decisions_csv(const PredictionSet& predictions);

}  // namespace hteval
