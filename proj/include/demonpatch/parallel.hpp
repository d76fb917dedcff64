#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace demonpatch::parallel {

namespace detail {

inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{1};
  return n;
}

inline bool& inside_region() {
  thread_local bool flag = false;
  return flag;
}

}  // namespace detail

inline void set_threads(int n) { detail::thread_setting() = std::max(1, n); }

inline int threads() { return detail::thread_setting().load(); }

// Reads DEMONPATCH_THREADS; returns fallback when unset or unparsable.
inline int threads_from_env(int fallback = 1) {
  const char* v = std::getenv("DEMONPATCH_THREADS");
  if (v == nullptr || *v == '\0') return fallback;
  try {
    const int n = std::stoi(v);
    return n >= 1 ? n : fallback;
  } catch (...) {
    return fallback;
  }
}

// Runs fn(i) for every i in [begin, end). Work is split into contiguous
// chunks, one per worker. Callers must only write to slots owned by index i,
// which keeps results identical for every thread count. Nested calls run
// serially on the calling thread.
template <class Fn>
void for_each_index(std::size_t begin, std::size_t end, Fn&& fn) {
  if (end <= begin) return;
  const std::size_t count = end - begin;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads()), count);
  if (workers <= 1 || detail::inside_region()) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  auto run_chunk = [&](std::size_t w) {
    const bool was_inside = detail::inside_region();
    detail::inside_region() = true;
    const std::size_t lo = begin + count * w / workers;
    const std::size_t hi = begin + count * (w + 1) / workers;
    try {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    } catch (...) {
      errors[w] = std::current_exception();
    }
    detail::inside_region() = was_inside;
  };
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run_chunk, w);
  run_chunk(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace demonpatch::parallel
