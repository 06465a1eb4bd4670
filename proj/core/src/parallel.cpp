#include "cyclemt/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace cyclemt {

namespace {

std::atomic<std::size_t> g_override{0};

std::size_t from_environment() {
  if (const char* env = std::getenv("CYCLEMT_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

std::size_t worker_count() {
  const std::size_t n = g_override.load();
  return n > 0 ? n : from_environment();
}

void set_worker_count(std::size_t n) { g_override.store(n); }

}  // namespace cyclemt
