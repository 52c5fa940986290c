#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace orderlab {

inline unsigned& jobs_override() {
  static unsigned jobs = 0;  // 0 = use hardware concurrency
  return jobs;
}

inline unsigned default_jobs() {
  unsigned jobs = jobs_override();
  return jobs ? jobs : std::max(1u, std::thread::hardware_concurrency());
}

inline void set_default_jobs(unsigned jobs) { jobs_override() = jobs; }

// Static chunking over [begin, end). fn(i) must be safe to run concurrently
// for distinct i; results must be written to disjoint slots.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn,
                  unsigned jobs = 0) {
  if (jobs == 0) jobs = default_jobs();
  const std::size_t count = end > begin ? end - begin : 0;
  if (count == 0) return;
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  if (jobs <= 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  const std::size_t chunk = (count + jobs - 1) / jobs;
  for (unsigned t = 0; t < jobs; ++t) {
    std::size_t lo = begin + t * chunk;
    std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace orderlab
