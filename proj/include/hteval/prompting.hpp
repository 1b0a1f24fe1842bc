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
#include "hteval/ensemble.hpp"
#include "hteval/error.hpp"
#include "hteval/schema.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hteval {

inline constexpr std::string_view kDefaultRoleText =
    "You are a helpful AI assistant. You are given the task of detecting homophobia and transphobia in a given "
    "text.";
inline constexpr std::string_view kDefaultDefinitionText =
    "Homophobia and transphobia detection is the process of identifying expressions of hatred or discrimination "
    "against LGBTQ+ individuals in communication.";

/// Plain settings for the binary few-shot pathway; validated by PromptConfig.
struct PromptOptions {
    std::string role_text{kDefaultRoleText};
    std::string definition_text{kDefaultDefinitionText};
    std::size_t k = 8;
    std::string positive_label = "H/T";
    std::string negative_label = "NON H/T";
    std::string positive_description = "Homophobic/Transphobic";
    std::string negative_description = "Non-Homophobic/Transphobic";
    std::string output_tag = "label";
    std::uint64_t seed = 0;
    std::string model_id = "prompted";
};

class PromptConfig {
  public:
    /// Throws InvariantError unless k is even and >= 2, both labels are
    /// distinct members of `schema`, and the tag is non-empty without angle
    /// brackets, slashes or whitespace.
    PromptConfig(PromptOptions options, LabelSchema schema);

    [[nodiscard]] const PromptOptions& options() const noexcept { return options_; }
    [[nodiscard]] const LabelSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] std::size_t k() const noexcept { return options_.k; }
    [[nodiscard]] LabelIndex positive() const noexcept { return positive_; }
    [[nodiscard]] LabelIndex negative() const noexcept { return negative_; }
    [[nodiscard]] const std::string& tag() const noexcept { return options_.output_tag; }

  private:
    PromptOptions options_;
    LabelSchema schema_;
    LabelIndex positive_ = 0;
    LabelIndex negative_ = 0;
};

/// Reads a JSON prompt configuration; absent fields keep PromptOptions defaults.
PromptOptions parse_prompt_options(std::string_view json_text);

struct Exemplar {
    std::string text;
    LabelIndex label = 0;

    friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

/// k/2 exemplars per class drawn by seeded uniform sampling without
/// replacement, returned as alternating positive/negative pairs. Throws
/// InvariantError naming a class that has fewer than k/2 examples.
std::vector<Exemplar> select_shots(std::span<const LabeledExample> train, const PromptConfig& config);

enum class PromptSection { role, definition, examples, task };

struct SectionSpan {
    PromptSection section;
    std::size_t offset = 0;
    std::size_t length = 0;
};

struct PromptText {
    std::string rendered;
    std::array<SectionSpan, 4> sections{};
    /// Role and Definition sections.
    std::string system_message;
    /// Examples and Task sections.
    std::string user_message;
};

/// Throws InvariantError on an empty query or shots that do not fit the config.
PromptText build_prompt(const PromptConfig& config, std::span<const Exemplar> shots, std::string_view query_text);

/// Lower-case hex SHA-256 of the rendered prompt.
std::string prompt_hash(const PromptText& prompt);
std::string sha256_hex(std::string_view data);

struct ParseFailure {
    std::string reason;
    std::string raw;
};

using ParsedResponse = std::variant<LabelIndex, ParseFailure>;

/// Takes the first <tag>...</tag> (or <tag>...<\tag>) span; the trimmed,
/// case-folded content "yes" maps to the positive label and "no" to the
/// negative one. Anything else is a ParseFailure; this never throws.
ParsedResponse parse_response(std::string_view raw, const PromptConfig& config);

struct ChatRequest {
    std::string system;
    std::string user;
    std::string prompt_sha256;
};

class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    /// Returns the plain-text completion. Must be safe to call concurrently.
    virtual std::string complete(const ChatRequest& request) = 0;
};

class ReplayMissError : public Error {
  public:
    explicit ReplayMissError(std::string hash);
    [[nodiscard]] const std::string& hash() const noexcept { return hash_; }

  private:
    std::string hash_;
};

class EndpointError : public Error {
  public:
    using Error::Error;
};

/// Recorded prompt-hash to response mapping; answers never reach the network.
class ReplayStore : public ChatBackend {
  public:
    ReplayStore() = default;
    explicit ReplayStore(std::map<std::string, std::string> responses) : responses_(std::move(responses)) {}

    /// Throws ReplayMissError naming the hash.
    std::string complete(const ChatRequest& request) override;
    [[nodiscard]] const std::map<std::string, std::string>& responses() const noexcept { return responses_; }
    void record(std::string hash, std::string response) { responses_.insert_or_assign(std::move(hash), std::move(response)); }

  private:
    std::map<std::string, std::string> responses_;
};

/// JSON Lines of {"prompt_sha256": ..., "response": ...}.
ReplayStore load_replay_store(const std::filesystem::path& path);
std::string serialize_replay_store(const ReplayStore& store);

struct EndpointConfig {
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string credential_env = "OPENAI_API_KEY";
    std::string model = "gpt-3.5-turbo";
    std::chrono::milliseconds timeout{30'000};
    int retries = 3;
    std::chrono::milliseconds backoff_base{2'000};
    std::size_t max_in_flight = 4;
    /// Pass-through request fields (temperature, max_tokens, ...), as a JSON object.
    std::string extra_fields_json = "{}";
};

EndpointConfig parse_endpoint_config(std::string_view json_text);

/// Chat-completion client. The body carries {"model", "messages": [system,
/// user], ...extra fields}; the reply may be plain text or an
/// OpenAI-style {"choices": [{"message": {"content": ...}}]} document.
/// Transport errors, 429 and 5xx are retried with delays base * 2^attempt.
class HttpChatBackend : public ChatBackend {
  public:
    /// Throws EndpointError naming the credential variable when it is unset.
    explicit HttpChatBackend(EndpointConfig config);
    std::string complete(const ChatRequest& request) override;

    /// Replaces the sleep between retries (tests).
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

  private:
    EndpointConfig config_;
    std::string credential_;
    std::function<void(std::chrono::milliseconds)> sleeper_;
};

struct PromptItem {
    std::string id;
    std::string text;
};

struct PromptFailure {
    std::string id;
    std::string reason;
    std::string raw_response;
};

struct BatchOptions {
    /// Record replay misses and endpoint failures as failures instead of aborting.
    bool partial = false;
    std::size_t max_in_flight = 1;
};

struct BatchResult {
    PredictionSet predictions;
    std::vector<PromptFailure> failures;
};

/// One-hot confidences for every parsed response, in item order; unparsable
/// responses are listed in `failures` and left out of the predictions.
/// Throws ReplayMissError / EndpointError unless options.partial is set.
BatchResult run_batch(ChatBackend& backend, const PromptConfig& config, std::span<const Exemplar> shots,
                      std::span<const PromptItem> items, const BatchOptions& options = {});

/// CSV `id,reason,raw_response_excerpt`.
std::string failures_csv(std::span<const PromptFailure> failures);

}  // namespace hteval
