#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

namespace twoview::netforge {

struct Shape {
  int c = 0, h = 0, w = 0;
  std::size_t count() const {
    return static_cast<std::size_t>(c) * h * w;
  }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

// Dense (channels, height, width) tensor; channel-major storage. Vectors are
// represented as (n, 1, 1).
template <typename T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(Shape s) { resize(s); }
  Tensor(int C, int H, int W) { resize({C, H, W}); }

  void resize(Shape s) {
    c = s.c;
    h = s.h;
    w = s.w;
    v.assign(s.count(), T{0});
  }

  Shape shape() const { return {c, h, w}; }
  std::size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& at(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  T at(int ch, int y, int x) const { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }

  T* channel(int ch) { return v.data() + static_cast<std::size_t>(ch) * h * w; }
  const T* channel(int ch) const { return v.data() + static_cast<std::size_t>(ch) * h * w; }

  void zero() { std::fill(v.begin(), v.end(), T{0}); }
};

// Fixed-chunk parallel map: the work is always split into the same kChunks
// ranges regardless of how many threads run them, so any reduction done
// per-chunk and folded in chunk order is independent of the thread count.
constexpr int kChunks = 4;

template <typename Fn>
void parallel_chunks(std::size_t n, int n_threads, Fn&& fn) {
  if (n == 0) return;
  const std::size_t chunk = (n + kChunks - 1) / kChunks;
  if (n_threads <= 1 || n <= 1) {
    for (int k = 0; k < kChunks; ++k) {
      const std::size_t b = std::min(n, k * chunk);
      const std::size_t e = std::min(n, (k + 1) * chunk);
      if (b < e) fn(k, b, e);
    }
    return;
  }
  std::vector<std::thread> threads;
  std::vector<int> order(kChunks);
  for (int k = 0; k < kChunks; ++k) order[k] = k;
  const int workers = std::min(n_threads, kChunks);
  std::atomic<int> next{0};
  for (int t = 0; t < workers; ++t)
    threads.emplace_back([&] {
      for (;;) {
        const int k = next.fetch_add(1);
        if (k >= kChunks) return;
        const std::size_t b = std::min(n, k * chunk);
        const std::size_t e = std::min(n, (k + 1) * chunk);
        if (b < e) fn(k, b, e);
      }
    });
  for (auto& th : threads) th.join();
}

}  // namespace twoview::netforge
