#pragma once

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace prmkit {

// Runs fn(i) for every i in [0, n) across at most worker_count threads.
// Work item i must depend only on i (each derives its own rng stream from
// its index), so results are identical for every worker count; workers get
// static contiguous blocks. The first exception thrown by any item is
// rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, int worker_count, Fn&& fn) {
  if (n == 0) return;
  const std::size_t workers =
      worker_count <= 1 ? 1 : std::min<std::size_t>(static_cast<std::size_t>(worker_count), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t base = n / workers;
  const std::size_t extra = n % workers;
  std::size_t begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t count = base + (w < extra ? 1 : 0);
    const std::size_t end = begin + count;
    threads.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
    begin = end;
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Maps fn over [0, n) into a pre-sized vector; deterministic output order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, int worker_count, Fn&& fn) {
  std::vector<T> out(n);
  parallel_for(n, worker_count, [&](std::size_t i) { out[i] = fn(i); });
  return out;
}

}  // namespace prmkit
