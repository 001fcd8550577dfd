#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace mfnn {

// Runs fn(cell) for cell = 0..n-1 on up to `workers` threads. Each cell must
// write only to its own preallocated slot; cells are claimed from a shared
// counter, so the assignment of cells to threads is irrelevant to the result.
inline void parallel_for_cells(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> threads;
  const int count = std::min(workers, n);
  threads.reserve(count);
  for (int i = 0; i < count; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

}  // namespace mfnn
