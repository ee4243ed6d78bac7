#include "psifrac/parallel.hpp"

#include <cstdlib>
#include <string>

namespace psifrac {

unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PSIFRAC_THREADS")) {
    try {
      const long requested = std::stol(env);
      if (requested > 0) return static_cast<unsigned>(requested);
    } catch (const std::exception&) {
      // unparsable values fall back to auto
    }
  }
  return hw;
}

}  // namespace psifrac
