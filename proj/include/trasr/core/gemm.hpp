// Copyright 2026 The trasr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <vector>

namespace trasr::gemm {

// Row-major kernels, all accumulating into C. Loop order keeps the innermost
// loop unit-stride over both C and B so the compiler vectorizes it; summation
// order per output element is fixed, which keeps results reproducible.

// C[M,N] += A[M,K] * B[K,N]
template <typename S>
void nn(std::int64_t M, std::int64_t N, std::int64_t K, const S* __restrict A,
        const S* __restrict B, S* __restrict C) {
  for (std::int64_t i = 0; i < M; ++i) {
    S* __restrict c = C + i * N;
    const S* a = A + i * K;
    for (std::int64_t p = 0; p < K; ++p) {
      const S av = a[p];
      const S* __restrict b = B + p * N;
      for (std::int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] += A^T * B, A stored [K,M], B stored [K,N]
template <typename S>
void tn(std::int64_t M, std::int64_t N, std::int64_t K, const S* __restrict A,
        const S* __restrict B, S* __restrict C) {
  for (std::int64_t p = 0; p < K; ++p) {
    const S* a = A + p * M;
    const S* __restrict b = B + p * N;
    for (std::int64_t i = 0; i < M; ++i) {
      const S av = a[i];
      S* __restrict c = C + i * N;
      for (std::int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] += A * B^T, A stored [M,K], B stored [N,K]
template <typename S>
void nt(std::int64_t M, std::int64_t N, std::int64_t K, const S* A, const S* B, S* C) {
  std::vector<S> bt(static_cast<std::size_t>(K * N));
  for (std::int64_t j = 0; j < N; ++j) {
    for (std::int64_t p = 0; p < K; ++p) bt[p * N + j] = B[j * K + p];
  }
  nn(M, N, K, A, bt.data(), C);
}

}  // namespace trasr::gemm
