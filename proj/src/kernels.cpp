#include "dbwqs/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace dbwqs::kern {

// Defined in kernels_avx2.cpp; false when that TU was built without AVX2.
bool avx2_compiled();

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  return avx2_compiled() && __builtin_cpu_supports("avx2") &&
         __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Backend& backend_by_name(std::string_view name) {
  if (name == "scalar") return scalar_backend();
  if (name == "avx2") {
    if (!avx2_available())
      throw std::runtime_error("AVX2 kernels requested but not available");
    return avx2_backend();
  }
  throw std::runtime_error("unknown kernel backend: " + std::string(name));
}

namespace {

const Backend* select_default() {
  if (const char* env = std::getenv("DBWQS_KERNELS")) {
    return &backend_by_name(env);
  }
  return avx2_available() ? &avx2_backend() : &scalar_backend();
}

std::atomic<const Backend*>& active_slot() {
  static std::atomic<const Backend*> slot{select_default()};
  return slot;
}

}  // namespace

const Backend& active() { return *active_slot().load(std::memory_order_relaxed); }

void set_active(const Backend& backend) {
  active_slot().store(&backend, std::memory_order_relaxed);
}

}  // namespace dbwqs::kern
