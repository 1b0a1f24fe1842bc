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

#include <immintrin.h>

namespace hteval::kernels::avx2 {

namespace {

constexpr std::size_t kLanes = 4;

void weighted_accumulate(double* acc, const double* x, double weight, std::size_t n) {
    const __m256d w = _mm256_set1_pd(weight);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d prod = _mm256_mul_pd(w, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), prod));
    }
    for (; i < n; ++i) acc[i] = acc[i] + weight * x[i];
}

void divide(double* values, double divisor, std::size_t n) {
    const __m256d d = _mm256_set1_pd(divisor);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        _mm256_storeu_pd(values + i, _mm256_div_pd(_mm256_loadu_pd(values + i), d));
    }
    for (; i < n; ++i) values[i] = values[i] / divisor;
}

// _mm256_min_pd(a, b) is (a < b) ? a : b; _mm256_max_pd(a, b) is (a > b) ? a : b
void track_bounds(double* lo, double* hi, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d v = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(lo + i, _mm256_min_pd(v, _mm256_loadu_pd(lo + i)));
        _mm256_storeu_pd(hi + i, _mm256_max_pd(v, _mm256_loadu_pd(hi + i)));
    }
    for (; i < n; ++i) {
        lo[i] = x[i] < lo[i] ? x[i] : lo[i];
        hi[i] = x[i] > hi[i] ? x[i] : hi[i];
    }
}

void clamp(double* values, const double* lo, const double* hi, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d v = _mm256_max_pd(_mm256_loadu_pd(lo + i), _mm256_loadu_pd(values + i));
        _mm256_storeu_pd(values + i, _mm256_min_pd(_mm256_loadu_pd(hi + i), v));
    }
    for (; i < n; ++i) {
        const double v = lo[i] > values[i] ? lo[i] : values[i];
        values[i] = hi[i] < v ? hi[i] : v;
    }
}

const KernelTable kTable{weighted_accumulate, divide, track_bounds, clamp};

}  // namespace

const KernelTable* table() noexcept { return &kTable; }

}  // namespace hteval::kernels::avx2
