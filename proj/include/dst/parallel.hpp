#pragma once

#include <algorithm>
#include <future>
#include <thread>
#include <vector>

namespace dst {

// Splits [0, count) into one contiguous block per worker and runs
// fn(begin, end) on each. Results are returned in block order, so any
// later reduction is deterministic for a given worker count.
template <typename T, typename Fn>
std::vector<T> parallel_blocks(long count, int workers, Fn&& fn) {
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  workers = static_cast<int>(std::min<long>(workers, std::max<long>(count, 1)));

  std::vector<T> results;
  if (workers == 1) {
    results.push_back(fn(0L, count));
    return results;
  }
  std::vector<std::future<T>> futures;
  futures.reserve(static_cast<size_t>(workers));
  const long base = count / workers;
  const long extra = count % workers;
  long begin = 0;
  for (int w = 0; w < workers; ++w) {
    const long size = base + (w < extra ? 1 : 0);
    const long end = begin + size;
    futures.push_back(
        std::async(std::launch::async, [&fn, begin, end]() { return fn(begin, end); }));
    begin = end;
  }
  results.reserve(static_cast<size_t>(workers));
  for (auto& f : futures) results.push_back(f.get());
  return results;
}

}  // namespace dst
