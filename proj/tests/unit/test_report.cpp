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

#include <doctest.h>

#include "support/fixtures.hpp"

#include <hteval/error.hpp>
#include <hteval/report.hpp>

#include <algorithm>
#include <string>
#include <vector>

using namespace hteval;
using hteval::testing::Rng;

namespace {

LabelSchema abc() { return LabelSchema("t", {"A", "B", "C"}); }

ConfusionMatrix hand_matrix() { return ConfusionMatrix(abc(), {1, 1, 0, 0, 1, 0, 0, 0, 1}); }

std::vector<RunRecord> telugu_panel() {
    return {{"telugu", "XLM-R", 0.97, 0.97, RunKind::single_model},
            {"telugu", "mBERT", 0.96, 0.95, RunKind::single_model},
            {"telugu", "TeluguBERT", 0.97, 0.97, RunKind::single_model},
            {"telugu", "ens-dev", std::nullopt, 0.97, RunKind::ensemble_dev_weighted},
            {"telugu", "ens-test", std::nullopt, 0.97, RunKind::ensemble_test_weighted}};
}

ConfusionMatrix random_matrix(Rng& rng, std::size_t k) {
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < k; ++c) labels.push_back("label " + std::to_string(c) + (c % 2 ? ", odd" : ""));
    std::vector<std::uint64_t> counts(k * k);
    for (auto& v : counts) v = rng.below(3) == 0 ? 0 : rng.below(500);
    counts[rng.below(k * k)] += 1;
    return ConfusionMatrix(LabelSchema("r", labels), counts);
}

}  // namespace

TEST_SUITE("render_confusion") {
    TEST_CASE("csv rows") {
        const auto csv = render_confusion(hand_matrix(), DocumentFormat::csv);
        CHECK(csv == "gold/predicted,A,B,C\nA,1,1,0\nB,0,1,0\nC,0,0,1\n");
    }

    TEST_CASE("single-cell text grid") {
        const auto text = render_confusion(ConfusionMatrix(LabelSchema("t", {"Only"}), {5}), DocumentFormat::text);
        CHECK(text.find("Only") != std::string::npos);
        CHECK(text.find(" 5\n") != std::string::npos);
    }

    TEST_CASE("text grid aligns columns") {
        const auto text = render_confusion(ConfusionMatrix(abc(), {1200, 3, 0, 4, 55, 0, 0, 0, 7}), DocumentFormat::text);
        CHECK(text ==
              "gold \\ predicted     A   B  C\n"
              "A                 1200   3  0\n"
              "B                    4  55  0\n"
              "C                    0   0  7\n");
    }

    TEST_CASE("svg heatmap") {
        const auto svg = render_confusion(hand_matrix(), DocumentFormat::svg);
        CHECK(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        CHECK(svg.ends_with("</svg>\n"));
        // 9 cells plus the background
        std::size_t rects = 0;
        for (auto p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++rects;
        CHECK(rects == 10);
        // row-normalized: B->B and C->C are full rows, A->A is half
        CHECK(svg.find("fill=\"#1f4e79\"") != std::string::npos);
        CHECK_THROWS_AS(render_confusion(hand_matrix(), DocumentFormat::markdown), InvariantError);
    }

    TEST_CASE("labels that need escaping") {
        const ConfusionMatrix cm(LabelSchema("t", {"a<b", "c,d"}), {1, 0, 0, 1});
        const auto svg = render_confusion(cm, DocumentFormat::svg);
        CHECK(svg.find("a&lt;b") != std::string::npos);
        CHECK(svg.find("a<b") == std::string::npos);
        CHECK(render_confusion(cm, DocumentFormat::csv).find("\"c,d\"") != std::string::npos);
    }

    TEST_CASE("rendering is deterministic and csv parses back") {
        Rng rng(73);
        for (int trial = 0; trial < 200; ++trial) {
            const auto cm = random_matrix(rng, 1 + rng.below(4));
            for (const auto f : {DocumentFormat::text, DocumentFormat::csv, DocumentFormat::svg}) {
                CHECK(render_confusion(cm, f) == render_confusion(cm, f));
            }
            CHECK(parse_confusion_csv(render_confusion(cm, DocumentFormat::csv), cm.schema()) == cm);
        }
    }

    TEST_CASE("csv parsing rejects mismatched documents") {
        // columns and rows are matched by label, not position
        CHECK(parse_confusion_csv("gold/predicted,A,C,B\nA,1,0,1\nC,0,1,0\nB,0,0,1\n", abc()) == hand_matrix());
        CHECK_THROWS_AS(parse_confusion_csv("gold/predicted,A,A,B\nA,1,0,0\nC,0,1,0\nB,0,0,1\n", abc()), LoadError);
        CHECK_THROWS_AS(parse_confusion_csv("gold/predicted,A,B,D\nA,1,0,0\nB,0,1,0\nC,0,0,1\n", abc()), LoadError);
        CHECK_THROWS_AS(parse_confusion_csv("gold/predicted,A,B,C\nA,1,0,0\nA,0,1,0\nC,0,0,1\n", abc()), LoadError);
        CHECK_THROWS_AS(parse_confusion_csv("gold/predicted,A,B,C\nA,1,0\n", abc()), LoadError);
        CHECK_THROWS_AS(parse_confusion_csv("gold/predicted,A,B,C\nA,1,0,x\nB,0,1,0\nC,0,0,1\n", abc()), LoadError);
    }
}

TEST_SUITE("error_summary") {
    TEST_CASE("all-majority pathology") {
        const auto s = error_summary(ConfusionMatrix(abc(), {95, 0, 0, 4, 0, 0, 1, 0, 0}));
        CHECK(s.classes[0].band == RecallBand::perfect);
        CHECK(s.classes[1].band == RecallBand::collapsed);
        CHECK(s.classes[2].band == RecallBand::collapsed);
        CHECK(s.classes[1].dominant_confusion == LabelIndex{0});
        CHECK(s.classes[2].dominant_confusion == LabelIndex{0});
        CHECK_FALSE(s.classes[0].dominant_confusion.has_value());
    }

    TEST_CASE("diagonal matrix is perfect everywhere") {
        for (const auto& c : error_summary(ConfusionMatrix(abc(), {3, 0, 0, 0, 9, 0, 0, 0, 1})).classes) {
            CHECK(c.band == RecallBand::perfect);
            CHECK(c.recall == 1.0);
        }
    }

    TEST_CASE("thresholds") {
        const auto s = error_summary(ConfusionMatrix(abc(), {1, 1, 0, 2, 98, 0, 1, 1, 0}));
        CHECK(s.classes[0].recall == 0.5);
        CHECK(s.classes[0].band == RecallBand::partial);
        CHECK(s.classes[1].band == RecallBand::perfect);
        // row C splits evenly between A and B; ties go to schema order
        CHECK(s.classes[2].dominant_confusion == LabelIndex{0});
        const auto below = error_summary(ConfusionMatrix(abc(), {97, 3, 0, 0, 1, 0, 0, 0, 1}));
        CHECK(below.classes[0].band == RecallBand::partial);
    }

    TEST_CASE("bands ignore column scaling of other classes") {
        Rng rng(79);
        for (int trial = 0; trial < 200; ++trial) {
            const auto k = 2 + rng.below(3);
            const auto cm = random_matrix(rng, k);
            const auto target = rng.below(k);
            // scale every other row's counts; the target row is untouched
            std::vector<std::uint64_t> counts;
            for (LabelIndex g = 0; g < k; ++g) {
                for (LabelIndex p = 0; p < k; ++p) counts.push_back(cm.at(g, p) * (g == target ? 1 : 1 + rng.below(5)));
            }
            const ConfusionMatrix scaled(cm.schema(), counts);
            const auto a = error_summary(cm).classes[target];
            const auto b = error_summary(scaled).classes[target];
            CHECK(a.band == b.band);
            CHECK(a.recall == b.recall);
            CHECK(a.dominant_confusion == b.dominant_confusion);
            CHECK((!a.dominant_confusion || *a.dominant_confusion != target));
        }
    }

    TEST_CASE("rendered summary") {
        const auto cm = ConfusionMatrix(abc(), {95, 0, 0, 4, 0, 0, 1, 0, 0});
        const auto text = render_error_summary(error_summary(cm), cm.schema());
        CHECK(text.find("B (support 4): recall 0.00, collapsed; most often mistaken for A (4)") != std::string::npos);
    }
}

TEST_SUITE("results_table") {
    TEST_CASE("Telugu panel layout") {
        const auto runs = telugu_panel();
        CHECK(results_table(runs, DocumentFormat::markdown) ==
              "### telugu\n"
              "\n"
              "| Models | Dev F1 | Test F1 |\n"
              "|---|---:|---:|\n"
              "| XLM-R | 0.97 | **0.97** |\n"
              "| mBERT | 0.96 | 0.95 |\n"
              "| TeluguBERT | 0.97 | **0.97** |\n"
              "| | | |\n"
              "| Wt. (Dev F1) Ensemble |  | **0.97** |\n"
              "| Wt. (Test F1) Ensemble |  | **0.97** |\n");
        const auto text = results_table(runs, DocumentFormat::text);
        CHECK(text.find("mBERT                     0.96     0.95\n") != std::string::npos);
        CHECK(text.find("-----\nWt. (Dev F1) Ensemble") != std::string::npos);
        const auto csv = results_table(runs, DocumentFormat::csv);
        CHECK(csv.starts_with("language,model,kind,dev_f1,test_f1,best\n"));
        CHECK(csv.find("telugu,mBERT,single-model,0.96,0.95,0\n") != std::string::npos);
    }

    TEST_CASE("single run has no separator") {
        const std::vector<RunRecord> one{{"tulu", "GPT 3.5", std::nullopt, 0.45, RunKind::prompted}};
        const auto md = results_table(one, DocumentFormat::markdown);
        CHECK(md.find("| | | |") == std::string::npos);
        CHECK(md.find("| GPT 3.5 |  | **0.45** |") != std::string::npos);
        CHECK(results_table(one, DocumentFormat::text).find("---") == std::string::npos);
    }

    TEST_CASE("ties in the best score are all marked") {
        const std::vector<RunRecord> runs{{"x", "a", 0.5, 0.601, RunKind::single_model},
                                          {"x", "b", 0.5, 0.599, RunKind::single_model},
                                          {"x", "c", 0.5, 0.41, RunKind::single_model}};
        const auto md = results_table(runs, DocumentFormat::markdown);
        CHECK(md.find("| a | 0.50 | **0.60** |") != std::string::npos);
        CHECK(md.find("| b | 0.50 | **0.60** |") != std::string::npos);
        CHECK(md.find("| c | 0.50 | 0.41 |") != std::string::npos);
    }

    TEST_CASE("languages keep their first-appearance order") {
        Rng rng(83);
        const std::vector<std::string> langs{"tulu", "english", "tamil", "hindi"};
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<RunRecord> runs;
            std::vector<std::string> first_seen;
            for (int i = 0; i < 12; ++i) {
                const auto& l = langs[rng.below(langs.size())];
                if (std::find(first_seen.begin(), first_seen.end(), l) == first_seen.end()) first_seen.push_back(l);
                runs.push_back({l, "m" + std::to_string(i), rng.unit(), rng.unit(),
                                rng.coin() ? RunKind::single_model : RunKind::ensemble_dev_weighted});
            }
            const auto md = results_table(runs, DocumentFormat::markdown);
            std::size_t last = 0;
            for (const auto& l : first_seen) {
                const auto pos = md.find("### " + l + "\n");
                REQUIRE(pos != std::string::npos);
                CHECK(pos >= last);
                last = pos;
            }
        }
    }

    TEST_CASE("bad input") {
        const std::vector<RunRecord> none;
        CHECK_THROWS_AS(results_table(none, DocumentFormat::markdown), InvariantError);
        CHECK_THROWS_AS(results_table(telugu_panel(), DocumentFormat::svg), InvariantError);
        CHECK_THROWS_AS(check_run_record({"x", "m", std::nullopt, std::nullopt, RunKind::single_model}), InvariantError);
        CHECK_THROWS_AS(check_run_record({"x", "m", 1.5, std::nullopt, RunKind::single_model}), InvariantError);
    }
}

TEST_SUITE("run records") {
    TEST_CASE("json lines round-trip") {
        const auto runs = telugu_panel();
        const auto text = serialize_run_records(runs);
        CHECK(parse_run_records(text) == runs);
        CHECK(text.find("\"kind\":\"ensemble-dev-weighted\"") != std::string::npos);
    }

    TEST_CASE("malformed records") {
        CHECK_THROWS_AS(parse_run_records("{\"language\":\"x\"}\n"), LoadError);
        CHECK_THROWS_AS(parse_run_records("not json\n"), LoadError);
        CHECK_THROWS_AS(parse_run_records("{\"language\":\"x\",\"model_id\":\"m\",\"kind\":\"magic\",\"test_f1\":0.5}\n"),
                        LoadError);
    }

    TEST_CASE("merging fills in scores and rejects conflicts") {
        const std::vector<RunRecord> parts{{"x", "m", 0.5, std::nullopt, RunKind::single_model},
                                           {"x", "n", std::nullopt, 0.2, RunKind::single_model},
                                           {"x", "m", std::nullopt, 0.6, RunKind::single_model}};
        const auto merged = merge_run_records(parts);
        REQUIRE(merged.size() == 2);
        CHECK(merged[0] == RunRecord{"x", "m", 0.5, 0.6, RunKind::single_model});
        CHECK(merged[1].model_id == "n");
        const std::vector<RunRecord> clash{{"x", "m", 0.5, std::nullopt, RunKind::single_model},
                                           {"x", "m", 0.4, std::nullopt, RunKind::single_model}};
        CHECK_THROWS_AS(merge_run_records(clash), InvariantError);
    }
}

TEST_CASE("language summary page") {
    const std::vector<std::pair<std::string, ConfusionMatrix>> matrices{{"xlmr", hand_matrix()}};
    const auto page = language_summary("telugu", telugu_panel(), matrices);
    CHECK(page.starts_with("# telugu\n"));
    CHECK(page.find("| Wt. (Dev F1) Ensemble |") != std::string::npos);
    CHECK(page.find("## Errors: xlmr") != std::string::npos);
    CHECK(page.find("A (support 2): recall 0.50, partial") != std::string::npos);
    CHECK(page.find("macro F1 0.7778, accuracy 0.7500") != std::string::npos);
}
