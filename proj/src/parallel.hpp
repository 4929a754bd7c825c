#pragma once

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

namespace mslab::detail {

/// Runs body(i) for i < count on `threads` workers with a fixed stride
/// assignment; results must be written to per-index slots.
template <class F>
void parallel_for(int count, int threads, F&& body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += threads) body(i);
    });
  for (auto& th : pool) th.join();
}

struct MeanErr {
  double mean = 0, stderr = 0;
};

inline MeanErr mean_stderr(const std::vector<double>& v) {
  MeanErr r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= v.size();
  if (v.size() > 1) {
    double s = 0;
    for (double x : v) s += (x - r.mean) * (x - r.mean);
    r.stderr = std::sqrt(s / (v.size() - 1) / v.size());
  }
  return r;
}

}  // namespace mslab::detail
