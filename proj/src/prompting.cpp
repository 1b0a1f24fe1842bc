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

#include "hteval/prompting.hpp"

#include "hteval/detail/text_io.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

namespace hteval {

PromptConfig::PromptConfig(PromptOptions options, LabelSchema schema)
    : options_(std::move(options)), schema_(std::move(schema)) {
    if (options_.k < 2 || options_.k % 2 != 0) {
        throw InvariantError(fmt::format("shot count k={} must be even and at least 2", options_.k));
    }
    positive_ = schema_.index_of(options_.positive_label);
    negative_ = schema_.index_of(options_.negative_label);
    if (positive_ == negative_) {
        throw InvariantError("positive and negative labels must differ");
    }
    const auto& tag = options_.output_tag;
    if (tag.empty() || tag.find_first_of("<>/\\ \t\r\n") != std::string::npos) {
        throw InvariantError(fmt::format("output tag '{}' must be a bare name without angle brackets", tag));
    }
    if (options_.model_id.empty()) throw InvariantError("prompted model id must be non-empty");
}

PromptOptions parse_prompt_options(std::string_view json_text) {
    PromptOptions o;
    try {
        const auto doc = nlohmann::json::parse(json_text);
        auto take = [&doc](const char* key, auto& field) {
            if (doc.contains(key)) field = doc.at(key).get<std::remove_reference_t<decltype(field)>>();
        };
        take("role_text", o.role_text);
        take("definition_text", o.definition_text);
        take("k", o.k);
        take("positive_label", o.positive_label);
        take("negative_label", o.negative_label);
        take("positive_description", o.positive_description);
        take("negative_description", o.negative_description);
        take("output_tag", o.output_tag);
        take("seed", o.seed);
        take("model_id", o.model_id);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(fmt::format("malformed prompt configuration: {}", e.what()));
    }
    return o;
}

namespace {

// Uniform integer in [0, bound) by rejection; independent of the standard
// library's distribution implementation so selections match across platforms.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

}  // namespace

std::vector<Exemplar> select_shots(std::span<const LabeledExample> train, const PromptConfig& config) {
    const std::size_t per_class = config.k() / 2;
    std::mt19937_64 rng(config.options().seed);
    std::array<std::vector<std::size_t>, 2> picked;
    const std::array<LabelIndex, 2> classes{config.positive(), config.negative()};
    for (std::size_t c = 0; c < 2; ++c) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (train[i].label == classes[c]) pool.push_back(i);
        }
        if (pool.size() < per_class) {
            throw InvariantError(fmt::format("class '{}' has {} example(s); {} shots need {} per class",
                                             config.schema().label(classes[c]), pool.size(), config.k(), per_class));
        }
        // partial Fisher-Yates
        for (std::size_t i = 0; i < per_class; ++i) {
            const auto j = i + static_cast<std::size_t>(uniform_below(rng, pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        picked[c].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    std::vector<Exemplar> shots;
    shots.reserve(config.k());
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t c = 0; c < 2; ++c) {
            const auto& ex = train[picked[c][i]];
            shots.push_back({ex.text, ex.label});
        }
    }
    return shots;
}

PromptText build_prompt(const PromptConfig& config, std::span<const Exemplar> shots, std::string_view query_text) {
    if (detail::trim(query_text).empty()) throw InvariantError("prompt query text is empty");
    if (shots.size() != config.k()) {
        throw InvariantError(fmt::format("expected {} shots, got {}", config.k(), shots.size()));
    }
    const auto& o = config.options();
    std::string examples = "Examples:";
    for (const auto& shot : shots) {
        std::string_view description;
        if (shot.label == config.positive()) {
            description = o.positive_description;
        } else if (shot.label == config.negative()) {
            description = o.negative_description;
        } else {
            throw InvariantError("shot label is neither the positive nor the negative class");
        }
        examples += fmt::format(" An example of {} comment: {}.", description, shot.text);
    }

    const std::array<std::string, 4> bodies{
        fmt::format("Role: {}", o.role_text),
        fmt::format("Definition: {}", o.definition_text),
        examples,
        fmt::format("Task: Generate the label [YES/NO] for this \"{}\" in the following format: <{}> "
                    "Your_Predicted_Label </{}>. Thanks.",
                    query_text, o.output_tag, o.output_tag),
    };
    constexpr std::array<PromptSection, 4> order{PromptSection::role, PromptSection::definition,
                                                 PromptSection::examples, PromptSection::task};
    PromptText out;
    for (std::size_t s = 0; s < bodies.size(); ++s) {
        if (s) out.rendered += "\n\n";
        out.sections[s] = {order[s], out.rendered.size(), bodies[s].size()};
        out.rendered += bodies[s];
    }
    out.system_message = bodies[0] + "\n\n" + bodies[1];
    out.user_message = bodies[2] + "\n\n" + bodies[3];
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 computation failed");
    }
    std::string hex;
    hex.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string prompt_hash(const PromptText& prompt) { return sha256_hex(prompt.rendered); }

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Matches "<" ws* [closer] ws* tag ws* ">" at `pos`; returns one past '>'.
std::optional<std::size_t> match_tag(std::string_view s, std::size_t pos, std::string_view folded_tag, bool closer) {
    if (pos >= s.size() || s[pos] != '<') return std::nullopt;
    std::size_t i = pos + 1;
    while (i < s.size() && is_space(s[i])) ++i;
    if (closer) {
        if (i >= s.size() || (s[i] != '/' && s[i] != '\\')) return std::nullopt;
        ++i;
        while (i < s.size() && is_space(s[i])) ++i;
    }
    if (i + folded_tag.size() > s.size() || detail::ascii_fold(s.substr(i, folded_tag.size())) != folded_tag) {
        return std::nullopt;
    }
    i += folded_tag.size();
    while (i < s.size() && is_space(s[i])) ++i;
    if (i >= s.size() || s[i] != '>') return std::nullopt;
    return i + 1;
}

}  // namespace

ParsedResponse parse_response(std::string_view raw, const PromptConfig& config) {
    const auto tag = detail::ascii_fold(config.tag());
    for (std::size_t open = raw.find('<'); open != std::string_view::npos; open = raw.find('<', open + 1)) {
        const auto content_begin = match_tag(raw, open, tag, false);
        if (!content_begin) continue;
        for (std::size_t close = raw.find('<', *content_begin); close != std::string_view::npos;
             close = raw.find('<', close + 1)) {
            if (!match_tag(raw, close, tag, true)) continue;
            const auto content = detail::ascii_fold(detail::trim(raw.substr(*content_begin, close - *content_begin)));
            if (content == "yes") return config.positive();
            if (content == "no") return config.negative();
            return ParseFailure{fmt::format("unrecognized label '{}'", content), std::string(raw)};
        }
        return ParseFailure{fmt::format("<{}> tag is never closed", config.tag()), std::string(raw)};
    }
    return ParseFailure{fmt::format("no <{}> tag in response", config.tag()), std::string(raw)};
}

ReplayMissError::ReplayMissError(std::string hash)
    : Error(fmt::format("replay store has no response for prompt {}", hash)), hash_(std::move(hash)) {}

std::string ReplayStore::complete(const ChatRequest& request) {
    const auto it = responses_.find(request.prompt_sha256);
    if (it == responses_.end()) throw ReplayMissError(request.prompt_sha256);
    return it->second;
}

ReplayStore load_replay_store(const std::filesystem::path& path) {
    const auto text = detail::read_file(path);
    std::map<std::string, std::string> responses;
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = std::string_view(text).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line;
        if (detail::trim(raw).empty()) continue;
        try {
            const auto obj = nlohmann::json::parse(raw);
            auto hash = obj.at("prompt_sha256").get<std::string>();
            auto response = obj.at("response").get<std::string>();
            if (!responses.emplace(hash, std::move(response)).second) {
                throw LoadError(fmt::format("{}:{}: prompt {} recorded twice", path.string(), line, hash));
            }
        } catch (const nlohmann::json::exception&) {
            throw LoadError(fmt::format("{}:{}: expected {{\"prompt_sha256\", \"response\"}}", path.string(), line));
        }
    }
    return ReplayStore(std::move(responses));
}

std::string serialize_replay_store(const ReplayStore& store) {
    std::string out;
    for (const auto& [hash, response] : store.responses()) {
        nlohmann::ordered_json obj;
        obj["prompt_sha256"] = hash;
        obj["response"] = response;
        out += obj.dump() + "\n";
    }
    return out;
}

EndpointConfig parse_endpoint_config(std::string_view json_text) {
    EndpointConfig c;
    try {
        const auto doc = nlohmann::json::parse(json_text);
        c.base_url = doc.at("base_url").get<std::string>();
        if (doc.contains("path")) c.path = doc["path"].get<std::string>();
        if (doc.contains("credential_env")) c.credential_env = doc["credential_env"].get<std::string>();
        if (doc.contains("model")) c.model = doc["model"].get<std::string>();
        if (doc.contains("timeout_ms")) c.timeout = std::chrono::milliseconds(doc["timeout_ms"].get<long>());
        if (doc.contains("retries")) c.retries = doc["retries"].get<int>();
        if (doc.contains("backoff_base_ms")) c.backoff_base = std::chrono::milliseconds(doc["backoff_base_ms"].get<long>());
        if (doc.contains("max_in_flight")) c.max_in_flight = doc["max_in_flight"].get<std::size_t>();
        if (doc.contains("extra")) c.extra_fields_json = doc["extra"].dump();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(fmt::format("malformed endpoint configuration: {}", e.what()));
    }
    if (c.retries < 0) throw InvariantError("endpoint retries must be non-negative");
    if (c.max_in_flight == 0) throw InvariantError("endpoint max_in_flight must be at least 1");
    return c;
}

HttpChatBackend::HttpChatBackend(EndpointConfig config)
    : config_(std::move(config)), sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    const char* credential = std::getenv(config_.credential_env.c_str());
    if (credential == nullptr || *credential == '\0') {
        throw EndpointError(fmt::format("credential environment variable {} is not set", config_.credential_env));
    }
    credential_ = credential;
    if (!nlohmann::json::parse(config_.extra_fields_json, nullptr, false).is_object()) {
        throw InvariantError("endpoint extra fields must be a JSON object");
    }
}

std::string HttpChatBackend::complete(const ChatRequest& request) {
    nlohmann::ordered_json body = nlohmann::ordered_json::parse(config_.extra_fields_json);
    body["model"] = config_.model;
    body["messages"] = nlohmann::ordered_json::array({
        {{"role", "system"}, {"content", request.system}},
        {{"role", "user"}, {"content", request.user}},
    });
    const auto payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) sleeper_(config_.backoff_base * (1LL << (attempt - 1)));

        httplib::Client client(config_.base_url);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        const httplib::Headers headers{{"Authorization", "Bearer " + credential_}};
        const auto res = client.Post(config_.path, headers, payload, "application/json");
        if (!res) {
            last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = fmt::format("HTTP {}", res->status);
            continue;
        }
        if (res->status != 200) {
            throw EndpointError(fmt::format("endpoint answered HTTP {}: {}", res->status, res->body.substr(0, 200)));
        }
        const auto doc = nlohmann::json::parse(res->body, nullptr, false);
        if (!doc.is_discarded() && doc.is_object() && doc.contains("choices")) {
            try {
                return doc.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const nlohmann::json::exception&) {
                throw EndpointError("endpoint reply has no choices[0].message.content");
            }
        }
        return res->body;
    }
    throw EndpointError(fmt::format("endpoint failed after {} attempt(s): {}", config_.retries + 1, last_error));
}

BatchResult run_batch(ChatBackend& backend, const PromptConfig& config, std::span<const Exemplar> shots,
                      std::span<const PromptItem> items, const BatchOptions& options) {
    struct Outcome {
        std::string response;
        std::string error;
        std::exception_ptr fatal;
    };
    std::vector<Outcome> outcomes(items.size());

    auto work = [&](std::size_t i) {
        try {
            const auto prompt = build_prompt(config, shots, items[i].text);
            outcomes[i].response = backend.complete({prompt.system_message, prompt.user_message, prompt_hash(prompt)});
        } catch (const ReplayMissError& e) {
            if (!options.partial) throw;
            outcomes[i].error = e.what();
        } catch (const EndpointError& e) {
            if (!options.partial) {
                throw EndpointError(fmt::format("item '{}': {}", items[i].id, e.what()));
            }
            outcomes[i].error = e.what();
        }
    };

    const std::size_t workers = std::min(std::max<std::size_t>(options.max_in_flight, 1), items.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < items.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> stop{false};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < items.size() && !stop; i = next++) {
                    try {
                        work(i);
                    } catch (...) {
                        outcomes[i].fatal = std::current_exception();
                        stop = true;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& o : outcomes) {
            if (o.fatal) std::rethrow_exception(o.fatal);
        }
    }

    const auto k = config.schema().size();
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<PromptFailure> failures;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!outcomes[i].error.empty()) {
            failures.push_back({items[i].id, outcomes[i].error, ""});
            continue;
        }
        const auto parsed = parse_response(outcomes[i].response, config);
        if (const auto* failure = std::get_if<ParseFailure>(&parsed)) {
            failures.push_back({items[i].id, failure->reason, failure->raw});
            continue;
        }
        ids.push_back(items[i].id);
        std::vector<double> row(k, 0.0);
        row[std::get<LabelIndex>(parsed)] = 1.0;
        scores.insert(scores.end(), row.begin(), row.end());
    }
    return {PredictionSet(config.options().model_id, config.schema(), std::move(ids), std::move(scores), true),
            std::move(failures)};
}

namespace {

std::string excerpt(std::string_view raw, std::size_t limit) {
    if (raw.size() <= limit) return std::string(raw);
    std::size_t cut = limit;
    // back off to a code point boundary
    while (cut > 0 && (static_cast<unsigned char>(raw[cut]) & 0xC0) == 0x80) --cut;
    return std::string(raw.substr(0, cut)) + "...";
}

}  // namespace

std::string failures_csv(std::span<const PromptFailure> failures) {
    std::string out = "id,reason,raw_response_excerpt\n";
    for (const auto& f : failures) {
        out += detail::join_record({f.id, f.reason, excerpt(f.raw_response, 160)}, ',') + "\n";
    }
    return out;
}

}  // namespace hteval
