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

// Test-only helpers: scratch directories, deterministic random numbers and
// fixture writers shared by the unit and acceptance suites.

#include <hteval/detail/text_io.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

namespace hteval::testing {

class ScratchDir {
  public:
    explicit ScratchDir(std::string_view tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("hteval-" + std::string(tag) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ignored;
        std::filesystem::remove_all(path_, ignored);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

    std::filesystem::path write(std::string_view name, std::string_view contents) const {
        const auto p = path_ / name;
        detail::write_file_atomic(p, contents);
        return p;
    }

  private:
    std::filesystem::path path_;
};

/// Portable generator: the mapping from engine output to values does not go
/// through the standard distributions, whose algorithms vary by library.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t below(std::uint64_t bound) { return engine_() % bound; }
    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool coin() { return (engine_() >> 63) != 0; }

  private:
    std::mt19937_64 engine_;
};

/// Every regular file under `root`, mapped from relative path to contents.
inline std::vector<std::pair<std::string, std::string>> snapshot_tree(const std::filesystem::path& root) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            files.emplace_back(std::filesystem::relative(entry.path(), root).string(),
                               detail::read_file(entry.path()));
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

/// CSV with `counts[i]` examples of `labels[i]`, interleaved rather than blocked.
inline std::string labeled_csv(const std::vector<std::string>& labels, const std::vector<std::size_t>& counts,
                               std::string_view id_prefix = "ex") {
    std::vector<std::size_t> remaining = counts;
    std::string out = "id,text,label\n";
    std::size_t id = 0;
    bool any = true;
    while (any) {
        any = false;
        for (std::size_t c = 0; c < labels.size(); ++c) {
            if (remaining[c] == 0) continue;
            --remaining[c];
            any = true;
            out += detail::join_record({std::string(id_prefix) + std::to_string(id), "comment number " + std::to_string(id),
                                        labels[c]},
                                       ',') +
                   "\n";
            ++id;
        }
    }
    return out;
}

}  // namespace hteval::testing
