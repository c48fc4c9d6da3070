#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace heavytail {

/// Rows per seeded block. Block b of a job always draws from stream b, so
/// results depend on (seed, block partition) only, never on worker count.
inline constexpr std::size_t kBlockRows = 1 << 15;

inline unsigned worker_count() {
  if (const char* env = std::getenv("HEAVYTAIL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct BlockRange {
  std::size_t index;
  std::size_t begin;
  std::size_t end;
};

inline std::size_t block_count(std::size_t rows, std::size_t block_rows = kBlockRows) {
  return (rows + block_rows - 1) / block_rows;
}

/// Runs fn(BlockRange) for every block of [0, rows). Blocks are claimed by an
/// atomic counter; the callee must write only to block-owned state.
template <class Fn>
void for_each_block(std::size_t rows, Fn&& fn, std::size_t block_rows = kBlockRows) {
  const std::size_t blocks = block_count(rows, block_rows);
  if (blocks == 0) return;
  auto range = [&](std::size_t b) {
    return BlockRange{b, b * block_rows, std::min(rows, (b + 1) * block_rows)};
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), blocks));
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(range(b));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b; (b = next.fetch_add(1)) < blocks;) {
        try {
          fn(range(b));
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

}  // namespace heavytail
