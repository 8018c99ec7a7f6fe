#pragma once

#include "dodrom/autodiff/tensor.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dodrom::util {

// Runs body(i) for i in [0, n) on up to `threads` workers, interleaving indices. Each
// index writes only its own output slot, so the result does not depend on the schedule.
template <class Body>
void parallel_for(Index n, unsigned threads, Body&& body) {
  if (threads <= 1 || n <= 1) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  const unsigned workers = std::min<unsigned>(threads, unsigned(n));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (Index i = w; i < n; i += workers) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dodrom::util
