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

#include "hteval/kernels.hpp"

#include "hteval/error.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cstdlib>
#include <string>

namespace hteval::kernels {

namespace scalar {
extern const KernelTable kTable;
}
#if defined(HTEVAL_HAVE_AVX2)
namespace avx2 {
const KernelTable* table() noexcept;
}
#endif

namespace {

const KernelTable* avx2_table() noexcept {
#if defined(HTEVAL_HAVE_AVX2)
    return avx2::table();
#else
    return nullptr;
#endif
}

Isa default_isa() noexcept {
    if (const char* env = std::getenv("HTEVAL_ISA")) {
        const std::string v(env);
        if (v == "scalar") return Isa::scalar;
        if (v == "avx2" && supported(Isa::avx2)) return Isa::avx2;
    }
    return supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& active() noexcept {
    static std::atomic<Isa> isa{default_isa()};
    return isa;
}

void check_sizes(std::size_t a, std::size_t b) {
    if (a != b) throw InvariantError(fmt::format("kernel operands differ in length ({} vs {})", a, b));
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "?";
}

bool supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(HTEVAL_HAVE_AVX2)
            return avx2_table() != nullptr && __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

Isa active_isa() noexcept { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    if (!supported(isa)) {
        throw InvariantError(fmt::format("kernel variant '{}' is not available on this machine", to_string(isa)));
    }
    active().store(isa, std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) {
    if (!supported(isa)) {
        throw InvariantError(fmt::format("kernel variant '{}' is not available on this machine", to_string(isa)));
    }
    return isa == Isa::avx2 ? *avx2_table() : scalar::kTable;
}

void weighted_accumulate(std::span<double> acc, std::span<const double> x, double weight) {
    check_sizes(acc.size(), x.size());
    table(active_isa()).weighted_accumulate(acc.data(), x.data(), weight, acc.size());
}

void divide(std::span<double> values, double divisor) {
    table(active_isa()).divide(values.data(), divisor, values.size());
}

void track_bounds(std::span<double> lo, std::span<double> hi, std::span<const double> x) {
    check_sizes(lo.size(), x.size());
    check_sizes(hi.size(), x.size());
    table(active_isa()).track_bounds(lo.data(), hi.data(), x.data(), x.size());
}

void clamp(std::span<double> values, std::span<const double> lo, std::span<const double> hi) {
    check_sizes(values.size(), lo.size());
    check_sizes(values.size(), hi.size());
    table(active_isa()).clamp(values.data(), lo.data(), hi.data(), values.size());
}

}  // namespace hteval::kernels
