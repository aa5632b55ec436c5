#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace decktrack {

/// Runs fn(i) for i in [0, n) across hardware threads in contiguous chunks.
/// Callers write results into per-index slots, so the output is identical to
/// the serial order regardless of scheduling.
template <class F>
void parallel_for(std::size_t n, F&& fn, std::size_t min_grain = 256) {
  const unsigned hw = std::thread::hardware_concurrency();
  if (hw <= 1 || n < 2 * min_grain) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(hw, (n + min_grain - 1) / min_grain);
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace decktrack
