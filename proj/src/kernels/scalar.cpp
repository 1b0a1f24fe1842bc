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

namespace hteval::kernels::scalar {

namespace {

void weighted_accumulate(double* acc, const double* x, double weight, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] = acc[i] + weight * x[i];
}

void divide(double* values, double divisor, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) values[i] = values[i] / divisor;
}

// Comparison forms mirror the SSE/AVX min/max semantics operand for operand.
void track_bounds(double* lo, double* hi, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = x[i] < lo[i] ? x[i] : lo[i];
        hi[i] = x[i] > hi[i] ? x[i] : hi[i];
    }
}

void clamp(double* values, const double* lo, const double* hi, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = lo[i] > values[i] ? lo[i] : values[i];
        values[i] = hi[i] < v ? hi[i] : v;
    }
}

}  // namespace

extern const KernelTable kTable;
const KernelTable kTable{weighted_accumulate, divide, track_bounds, clamp};

}  // namespace hteval::kernels::scalar
