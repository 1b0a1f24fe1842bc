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
#include <hteval/metrics.hpp>
#include <hteval/prompting.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

using namespace hteval;
using hteval::testing::Rng;
using hteval::testing::ScratchDir;

namespace {

LabelSchema tulu() { return builtin_schema("tulu"); }

PromptConfig config_with(std::size_t k, std::uint64_t seed = 0) {
    PromptOptions o;
    o.k = k;
    o.seed = seed;
    return PromptConfig(o, tulu());
}

// tulu schema order: NON H/T = 0, H/T = 1
constexpr LabelIndex kNeg = 0;
constexpr LabelIndex kPos = 1;

std::vector<Exemplar> fixed_shots() {
    return {{"they should not be allowed near children", kPos},
            {"congratulations to the couple on their wedding", kNeg}};
}

std::vector<LabeledExample> train_split(std::size_t positives, std::size_t negatives) {
    std::vector<LabeledExample> out;
    for (std::size_t i = 0; i < positives; ++i) out.push_back({"p" + std::to_string(i), "pos " + std::to_string(i), kPos});
    for (std::size_t i = 0; i < negatives; ++i) out.push_back({"n" + std::to_string(i), "neg " + std::to_string(i), kNeg});
    return out;
}

std::vector<PromptItem> items(std::size_t n) {
    std::vector<PromptItem> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({"item" + std::to_string(i), "comment number " + std::to_string(i)});
    return out;
}

ReplayStore store_for(const PromptConfig& cfg, std::span<const Exemplar> shots, std::span<const PromptItem> list,
                      const std::vector<std::string>& responses) {
    ReplayStore store;
    for (std::size_t i = 0; i < list.size(); ++i) {
        store.record(prompt_hash(build_prompt(cfg, shots, list[i].text)), responses[i]);
    }
    return store;
}

struct EnvGuard {
    std::string name;
    EnvGuard(std::string n, const char* value) : name(std::move(n)) {
        if (value) {
            ::setenv(name.c_str(), value, 1);
        } else {
            ::unsetenv(name.c_str());
        }
    }
    ~EnvGuard() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST_SUITE("PromptConfig") {
    TEST_CASE("defaults bind to the binary schema") {
        const auto cfg = config_with(8);
        CHECK(cfg.positive() == kPos);
        CHECK(cfg.negative() == kNeg);
        CHECK(cfg.tag() == "label");
    }

    TEST_CASE("invalid settings are rejected") {
        CHECK_THROWS_AS(config_with(0), InvariantError);
        CHECK_THROWS_AS(config_with(3), InvariantError);
        PromptOptions o;
        o.positive_label = "Sarcasm";
        CHECK_THROWS_AS(PromptConfig(o, tulu()), InvariantError);
        o = {};
        o.negative_label = "H/T";
        CHECK_THROWS_AS(PromptConfig(o, tulu()), InvariantError);
        o = {};
        o.output_tag = "la bel";
        CHECK_THROWS_AS(PromptConfig(o, tulu()), InvariantError);
        o.output_tag = "";
        CHECK_THROWS_AS(PromptConfig(o, tulu()), InvariantError);
    }

    TEST_CASE("json options") {
        const auto o = parse_prompt_options(R"({"k": 4, "seed": 9, "model_id": "gpt"})");
        CHECK(o.k == 4);
        CHECK(o.seed == 9);
        CHECK(o.model_id == "gpt");
        CHECK(o.role_text == kDefaultRoleText);
        CHECK_THROWS_AS(parse_prompt_options(R"({"k": "four"})"), LoadError);
    }
}

TEST_SUITE("select_shots") {
    TEST_CASE("forced selection") {
        const auto train = train_split(1, 1);
        for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
            const auto shots = select_shots(train, config_with(2, seed));
            REQUIRE(shots.size() == 2);
            CHECK(shots[0] == Exemplar{"pos 0", kPos});
            CHECK(shots[1] == Exemplar{"neg 0", kNeg});
        }
    }

    TEST_CASE("too few positives names the class and count") {
        const auto train = train_split(3, 40);
        CHECK_THROWS_WITH_AS(select_shots(train, config_with(8)), doctest::Contains("'H/T' has 3"), InvariantError);
    }

    TEST_CASE("balance, distinctness and seed determinism") {
        Rng rng(61);
        for (int trial = 0; trial < 300; ++trial) {
            const std::size_t k = 2 * (1 + rng.below(6));
            const auto train = train_split(k / 2 + rng.below(20), k / 2 + rng.below(20));
            const auto seed = rng.below(1000);
            const auto shots = select_shots(train, config_with(k, seed));
            REQUIRE(shots.size() == k);
            std::size_t pos = 0;
            std::set<std::string> texts;
            for (std::size_t i = 0; i < shots.size(); ++i) {
                pos += shots[i].label == kPos;
                CHECK(shots[i].label == (i % 2 == 0 ? kPos : kNeg));
                texts.insert(shots[i].text);
            }
            CHECK(pos == k / 2);
            CHECK(texts.size() == k);
            CHECK(select_shots(train, config_with(k, seed)) == shots);
        }
    }

    TEST_CASE("seeds change the draw") {
        const auto train = train_split(50, 50);
        CHECK_FALSE(select_shots(train, config_with(8, 1)) == select_shots(train, config_with(8, 2)));
    }
}

TEST_SUITE("build_prompt") {
    TEST_CASE("golden rendering") {
        const auto golden = detail::read_file(std::string(HTEVAL_TEST_DATA_DIR) + "/prompt_k2.txt");
        const auto shots = fixed_shots();
        const auto p = build_prompt(config_with(2), shots, "sample comment");
        CHECK(p.rendered == golden);
    }

    TEST_CASE("section spans partition the rendering") {
        const auto shots = fixed_shots();
        const auto p = build_prompt(config_with(2), shots, "sample comment");
        const char* heads[] = {"Role: ", "Definition: ", "Examples: ", "Task: "};
        std::size_t expected_offset = 0;
        for (std::size_t s = 0; s < 4; ++s) {
            CHECK(p.sections[s].section == static_cast<PromptSection>(s));
            CHECK(p.sections[s].offset == expected_offset);
            CHECK(p.rendered.compare(p.sections[s].offset, std::strlen(heads[s]), heads[s]) == 0);
            expected_offset = p.sections[s].offset + p.sections[s].length + 2;
        }
        CHECK(p.sections[3].offset + p.sections[3].length == p.rendered.size());
        CHECK(p.system_message + "\n\n" + p.user_message == p.rendered);
        CHECK(p.system_message.starts_with("Role: You are a helpful AI assistant."));
        CHECK(p.user_message.starts_with("Examples: An example of Homophobic/Transphobic comment: "));
    }

    TEST_CASE("eight shots repeat the exemplar sentence") {
        const auto train = train_split(10, 10);
        const auto shots = select_shots(train, config_with(8, 5));
        const auto p = build_prompt(config_with(8, 5), shots, "q");
        std::size_t count = 0;
        for (auto pos = p.rendered.find("An example of "); pos != std::string::npos;
             pos = p.rendered.find("An example of ", pos + 1)) {
            ++count;
        }
        CHECK(count == 8);
    }

    TEST_CASE("bad inputs") {
        const auto shots = fixed_shots();
        CHECK_THROWS_AS(build_prompt(config_with(2), shots, "   "), InvariantError);
        CHECK_THROWS_AS(build_prompt(config_with(4), shots, "q"), InvariantError);
    }

    TEST_CASE("hash is sha256 of the rendering") {
        CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        const auto shots = fixed_shots();
        const auto p = build_prompt(config_with(2), shots, "sample comment");
        CHECK(prompt_hash(p) == sha256_hex(p.rendered));
        CHECK(prompt_hash(p) != prompt_hash(build_prompt(config_with(2), shots, "sample comment!")));
    }
}

TEST_SUITE("parse_response") {
    TEST_CASE("stated cases") {
        const auto cfg = config_with(2);
        CHECK(std::get<LabelIndex>(parse_response("<label>YES</label>", cfg)) == kPos);
        CHECK(std::get<LabelIndex>(parse_response("Sure! <label> no <\\label> hope that helps", cfg)) == kNeg);
        const auto f = parse_response("I cannot determine that.", cfg);
        REQUIRE(std::holds_alternative<ParseFailure>(f));
        CHECK(std::get<ParseFailure>(f).raw == "I cannot determine that.");
    }

    TEST_CASE("tag variants") {
        const auto cfg = config_with(2);
        CHECK(std::get<LabelIndex>(parse_response("<LABEL>Yes</LABEL>", cfg)) == kPos);
        CHECK(std::get<LabelIndex>(parse_response("< label >\n yes \t</ label >", cfg)) == kPos);
        CHECK(std::get<LabelIndex>(parse_response("<label>no</label><label>yes</label>", cfg)) == kNeg);
        CHECK(std::get<LabelIndex>(parse_response("<b>x</b> <label>NO<\\LABEL>", cfg)) == kNeg);
        CHECK(std::holds_alternative<ParseFailure>(parse_response("<label>maybe</label>", cfg)));
        CHECK(std::holds_alternative<ParseFailure>(parse_response("<label>yes", cfg)));
        CHECK(std::holds_alternative<ParseFailure>(parse_response("yes", cfg)));
        CHECK(std::holds_alternative<ParseFailure>(parse_response("", cfg)));
        CHECK(std::holds_alternative<ParseFailure>(parse_response("<labels>yes</labels>", cfg)));
        PromptOptions o;
        o.k = 2;
        o.output_tag = "answer";
        const PromptConfig custom(o, tulu());
        CHECK(std::get<LabelIndex>(parse_response("<answer>yes</answer>", custom)) == kPos);
        CHECK(std::holds_alternative<ParseFailure>(parse_response("<label>yes</label>", custom)));
    }

    TEST_CASE("embedding in arbitrary prose round-trips") {
        const auto cfg = config_with(2);
        Rng rng(67);
        const std::vector<std::string> prose{"", "Sure. ", "The answer is\n", "label: ", "<b>bold</b> ", "< not a tag ",
                                             "\xe0\xae\xa4 ", "yes no "};
        for (int trial = 0; trial < 500; ++trial) {
            const bool yes = rng.coin();
            std::string word = yes ? "yes" : "no";
            for (auto& ch : word) {
                if (rng.coin()) ch = static_cast<char>(ch - 'a' + 'A');
            }
            const std::string closer = rng.coin() ? "</label>" : "<\\label>";
            const auto raw = prose[rng.below(prose.size())] + "<label>" + std::string(rng.below(3), ' ') + word +
                             std::string(rng.below(3), ' ') + closer + prose[rng.below(prose.size())];
            const auto parsed = parse_response(raw, cfg);
            REQUIRE(std::holds_alternative<LabelIndex>(parsed));
            CHECK(std::get<LabelIndex>(parsed) == (yes ? kPos : kNeg));
        }
    }
}

TEST_SUITE("run_batch") {
    TEST_CASE("three replayed items") {
        const auto cfg = config_with(2);
        const auto shots = fixed_shots();
        const auto list = items(3);
        auto store = store_for(cfg, shots, list, {"<label>YES</label>", "<label>NO</label>", "<label>YES</label>"});
        const auto result = run_batch(store, cfg, shots, list);
        CHECK(result.failures.empty());
        REQUIRE(result.predictions.size() == 3);
        CHECK(std::vector<double>(result.predictions.scores().begin(), result.predictions.scores().end()) ==
              std::vector<double>{0, 1, 1, 0, 0, 1});
        CHECK(decide(result.predictions) == std::vector<LabelIndex>{kPos, kNeg, kPos});
    }

    TEST_CASE("replay miss names the hash unless partial") {
        const auto cfg = config_with(2);
        const auto shots = fixed_shots();
        const auto list = items(3);
        auto store = store_for(cfg, shots, std::span(list).first(2), {"<label>yes</label>", "<label>no</label>"});
        const auto missing = prompt_hash(build_prompt(cfg, shots, list[2].text));
        CHECK_THROWS_WITH_AS(run_batch(store, cfg, shots, list), doctest::Contains(missing.c_str()), ReplayMissError);
        const auto partial = run_batch(store, cfg, shots, list, {.partial = true});
        CHECK(partial.predictions.size() == 2);
        REQUIRE(partial.failures.size() == 1);
        CHECK(partial.failures[0].id == "item2");
    }

    TEST_CASE("hundred items with two unparsable responses") {
        const auto cfg = config_with(2);
        const auto shots = fixed_shots();
        const auto list = items(100);
        std::vector<std::string> responses;
        for (std::size_t i = 0; i < 100; ++i) responses.push_back(i % 3 ? "<label>no</label>" : "<label>yes</label>");
        responses[17] = "I am not able to classify this.";
        responses[64] = "<label>unsure</label>";
        auto store = store_for(cfg, shots, list, responses);
        const auto result = run_batch(store, cfg, shots, list, {.max_in_flight = 4});
        CHECK(result.predictions.size() == 98);
        REQUIRE(result.failures.size() == 2);
        CHECK(result.failures[0].id == "item17");
        CHECK(result.failures[1].id == "item64");
        CHECK_FALSE(result.predictions.find("item17").has_value());

        const auto csv = failures_csv(result.failures);
        CHECK(csv.starts_with("id,reason,raw_response_excerpt\nitem17,"));
        CHECK(csv.find("I am not able to classify this.") != std::string::npos);
    }

    TEST_CASE("replay output is byte-identical across runs and worker counts") {
        const auto cfg = config_with(2);
        const auto shots = fixed_shots();
        const auto list = items(40);
        std::vector<std::string> responses;
        Rng rng(71);
        for (std::size_t i = 0; i < list.size(); ++i) {
            responses.push_back(rng.below(10) == 0 ? "no idea" : (rng.coin() ? "<label>yes</label>" : "<label>no</label>"));
        }
        auto store = store_for(cfg, shots, list, responses);
        const auto a = run_batch(store, cfg, shots, list);
        const auto b = run_batch(store, cfg, shots, list, {.max_in_flight = 8});
        CHECK(serialize_predictions(a.predictions) == serialize_predictions(b.predictions));
        CHECK(failures_csv(a.failures) == failures_csv(b.failures));

        // evaluation of the replayed decisions is equally stable
        std::vector<LabelIndex> gold;
        for (std::size_t i = 0; i < a.predictions.size(); ++i) gold.push_back(i % 2);
        CHECK(confusion_matrix(gold, decide(a.predictions), tulu()) ==
              confusion_matrix(gold, decide(b.predictions), tulu()));
    }

    TEST_CASE("failure excerpts stop at a code point boundary") {
        std::string raw(159, 'x');
        raw += "\xe0\xae\xa4\xe0\xae\xa4";
        const std::vector<PromptFailure> f{{"1", "r", raw}};
        const auto csv = failures_csv(f);
        CHECK(csv.find(std::string(159, 'x') + "...") != std::string::npos);
    }

    TEST_CASE("replay store files") {
        ScratchDir dir("replay");
        ReplayStore store;
        store.record("abc", "<label>yes</label>");
        store.record("def", "line one\nline two");
        const auto path = dir.write("r.jsonl", serialize_replay_store(store));
        CHECK(load_replay_store(path).responses() == store.responses());
        const auto dup = dir.write("d.jsonl", "{\"prompt_sha256\":\"a\",\"response\":\"x\"}\n"
                                              "{\"prompt_sha256\":\"a\",\"response\":\"y\"}\n");
        CHECK_THROWS_AS(load_replay_store(dup), LoadError);
    }
}

TEST_SUITE("HttpChatBackend") {
    TEST_CASE("missing credential names the variable") {
        EnvGuard guard("HTEVAL_TEST_NO_KEY", nullptr);
        EndpointConfig cfg;
        cfg.base_url = "http://127.0.0.1:1";
        cfg.credential_env = "HTEVAL_TEST_NO_KEY";
        CHECK_THROWS_WITH_AS(HttpChatBackend{cfg}, doctest::Contains("HTEVAL_TEST_NO_KEY"), EndpointError);
    }

    TEST_CASE("endpoint configuration document") {
        const auto c = parse_endpoint_config(
            R"({"base_url": "http://localhost:8080", "timeout_ms": 1500, "retries": 5, "extra": {"temperature": 0}})");
        CHECK(c.base_url == "http://localhost:8080");
        CHECK(c.timeout == std::chrono::milliseconds(1500));
        CHECK(c.retries == 5);
        CHECK(c.extra_fields_json == R"({"temperature":0})");
        CHECK_THROWS_AS(parse_endpoint_config("{}"), LoadError);
        CHECK_THROWS_AS(parse_endpoint_config(R"({"base_url": "x", "retries": -1})"), InvariantError);
    }

    TEST_CASE("wire format, retries and backoff against a local server") {
        EnvGuard guard("HTEVAL_TEST_KEY", "sk-test");
        httplib::Server server;
        std::atomic<int> calls{0};
        std::mutex mu;
        nlohmann::json last_body;
        std::string last_auth;
        server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            const int n = ++calls;
            {
                std::lock_guard lock(mu);
                last_body = nlohmann::json::parse(req.body);
                last_auth = req.get_header_value("Authorization");
            }
            if (n == 1) {
                res.status = 503;
                return;
            }
            if (n == 2) {
                res.status = 429;
                return;
            }
            res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"<label>YES</label>"}}]})",
                            "application/json");
        });
        server.Post("/plain", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("<label>no</label>", "text/plain");
        });
        server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
        server.Post("/denied", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
        const int port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        std::thread thread([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        EndpointConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
        cfg.credential_env = "HTEVAL_TEST_KEY";
        cfg.retries = 3;
        cfg.backoff_base = std::chrono::milliseconds(100);
        cfg.extra_fields_json = R"({"temperature":0})";
        cfg.timeout = std::chrono::milliseconds(2000);
        std::vector<std::chrono::milliseconds> sleeps;

        HttpChatBackend backend(cfg);
        backend.set_sleeper([&](std::chrono::milliseconds d) { sleeps.push_back(d); });
        const auto reply = backend.complete({"SYS", "USR", "hash"});
        CHECK(reply == "<label>YES</label>");
        CHECK(calls.load() == 3);
        CHECK(sleeps == std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(100),
                                                               std::chrono::milliseconds(200)});
        {
            std::lock_guard lock(mu);
            CHECK(last_auth == "Bearer sk-test");
            CHECK(last_body["model"] == "gpt-3.5-turbo");
            CHECK(last_body["temperature"] == 0);
            CHECK(last_body["messages"][0]["role"] == "system");
            CHECK(last_body["messages"][0]["content"] == "SYS");
            CHECK(last_body["messages"][1]["role"] == "user");
            CHECK(last_body["messages"][1]["content"] == "USR");
        }

        auto plain_cfg = cfg;
        plain_cfg.path = "/plain";
        HttpChatBackend plain(plain_cfg);
        CHECK(plain.complete({"s", "u", "h"}) == "<label>no</label>");

        auto broken_cfg = cfg;
        broken_cfg.path = "/broken";
        broken_cfg.retries = 2;
        HttpChatBackend broken(broken_cfg);
        sleeps.clear();
        broken.set_sleeper([&](std::chrono::milliseconds d) { sleeps.push_back(d); });
        CHECK_THROWS_WITH_AS(broken.complete({"s", "u", "h"}), doctest::Contains("3 attempt"), EndpointError);
        CHECK(sleeps.size() == 2);

        auto denied_cfg = cfg;
        denied_cfg.path = "/denied";
        HttpChatBackend denied(denied_cfg);
        CHECK_THROWS_WITH_AS(denied.complete({"s", "u", "h"}), doctest::Contains("401"), EndpointError);

        // run_batch names the item when the endpoint gives up
        const auto pcfg = config_with(2);
        const auto shots = fixed_shots();
        const auto list = items(2);
        broken.set_sleeper([](std::chrono::milliseconds) {});
        CHECK_THROWS_WITH_AS(run_batch(broken, pcfg, shots, list), doctest::Contains("item0"), EndpointError);
        const auto partial = run_batch(broken, pcfg, shots, list, {.partial = true, .max_in_flight = 2});
        CHECK(partial.failures.size() == 2);
        CHECK(partial.predictions.size() == 0);

        server.stop();
        thread.join();
    }
}
