#include "cyclone/threads.hpp"

#include <cstdlib>
#include <string>

namespace cyclone {

std::size_t worker_threads() {
  const char* env = std::getenv("CYCLONEKIT_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    const long value = std::stol(env);
    return value < 1 ? 1 : static_cast<std::size_t>(value);
  } catch (...) {
    return 1;
  }
}

}  // namespace cyclone
