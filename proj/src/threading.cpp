#include "dvgo/threading.hpp"

#include <algorithm>
#include <vector>

namespace dvgo {

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void parallel_for(std::size_t n, unsigned workers,
                  const std::function<void(unsigned, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  workers = std::max(1u, workers);
  if (workers > n) workers = static_cast<unsigned>(n);
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  auto range = [n, workers](unsigned w, std::size_t& b, std::size_t& e) {
    b = n * w / workers;
    e = n * (w + 1) / workers;
  };
  for (unsigned w = 1; w < workers; ++w) {
    std::size_t b, e;
    range(w, b, e);
    pool.emplace_back([&fn, w, b, e] { fn(w, b, e); });
  }
  std::size_t b, e;
  range(0, b, e);
  fn(0, b, e);
  for (auto& t : pool) t.join();
}

}  // namespace dvgo
