// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_COMMON_PARALLEL_H_
#define FEDTUNE_COMMON_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace fedtune {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must not
// share mutable state. If any item throws, the exception of the lowest
// failing index is rethrown after all workers finish, so the reported error
// does not depend on scheduling.
template <typename Fn>
void ParallelFor(size_t n, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace fedtune

#endif  // FEDTUNE_COMMON_PARALLEL_H_
