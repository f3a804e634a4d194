#pragma once

#include <cstddef>

namespace cyclone {

// Worker cap from CYCLONEKIT_THREADS (default 1, minimum 1).
std::size_t worker_threads();

}  // namespace cyclone
