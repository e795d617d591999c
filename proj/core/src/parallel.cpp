#include "planefield/parallel.hpp"

#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "planefield/errors.hpp"

namespace planefield {

namespace {

int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace

int resolve_threads(int requested) {
  if (requested < 0) {
    throw DomainError("thread count must be non-negative");
  }
  if (requested > 0) {
    return requested;
  }
  if (const char* env = std::getenv("PLANEFIELD_THREADS")) {
    std::size_t consumed = 0;
    int value = 0;
    try {
      value = std::stoi(env, &consumed);
    } catch (const std::exception&) {
      throw DomainError("PLANEFIELD_THREADS is not an integer");
    }
    if (consumed != std::string(env).size() || value < 0) {
      throw DomainError("PLANEFIELD_THREADS must be a non-negative integer");
    }
    return value == 0 ? hardware_threads() : value;
  }
  return hardware_threads();
}

void parallel_chunks(int count, int threads,
                     const std::function<void(int, int)>& fn) {
  if (count <= 0) return;
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    const int begin = static_cast<int>(static_cast<long long>(count) * w / workers);
    const int end =
        static_cast<int>(static_cast<long long>(count) * (w + 1) / workers);
    pool.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

}  // namespace planefield
