#include "lowrank/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lrlab {

unsigned worker_count() {
  if (const char* env = std::getenv("LOWRANK_WORKERS")) {
    try {
      const long value = std::stol(env);
      if (value >= 1) return static_cast<unsigned>(value);
    } catch (const std::exception&) {
    }
    throw std::invalid_argument(std::string("LOWRANK_WORKERS must be a positive integer, got '") +
                                env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  unsigned workers) {
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace lrlab
