#include "rotor/parallel.hpp"

#include <cstdlib>
#include <string>

namespace rotor {

unsigned default_thread_count() {
  if (const char* env = std::getenv("ROTORSIM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace rotor
