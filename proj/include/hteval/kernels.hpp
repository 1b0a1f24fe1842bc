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

// Dense inner loops behind the weighted soft vote.
//
// Every kernel has a scalar reference and, on x86-64, an AVX2 variant picked
// at runtime. The variants evaluate the same IEEE operations in the same
// order per element (no fused multiply-add), so their outputs are bitwise
// identical; tests compare them with exact equality.

#include <cstddef>
#include <span>
#include <string_view>

namespace hteval::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

/// True when the build contains the variant and the CPU can run it.
bool supported(Isa isa) noexcept;

/// The variant used by the dispatching entry points. Defaults to the widest
/// supported one; the HTEVAL_ISA environment variable (scalar|avx2) overrides.
Isa active_isa() noexcept;

/// Throws InvariantError for an unsupported variant.
void set_active_isa(Isa isa);

struct KernelTable {
    /// acc[i] = acc[i] + weight * x[i]
    void (*weighted_accumulate)(double* acc, const double* x, double weight, std::size_t n);
    /// values[i] = values[i] / divisor
    void (*divide)(double* values, double divisor, std::size_t n);
    /// lo[i] = min(x[i], lo[i]); hi[i] = max(x[i], hi[i])
    void (*track_bounds)(double* lo, double* hi, const double* x, std::size_t n);
    /// values[i] = min(hi[i], max(lo[i], values[i]))
    void (*clamp)(double* values, const double* lo, const double* hi, std::size_t n);
};

/// Throws InvariantError for an unsupported variant.
const KernelTable& table(Isa isa);

void weighted_accumulate(std::span<double> acc, std::span<const double> x, double weight);
void divide(std::span<double> values, double divisor);
void track_bounds(std::span<double> lo, std::span<double> hi, std::span<const double> x);
void clamp(std::span<double> values, std::span<const double> lo, std::span<const double> hi);

}  // namespace hteval::kernels
