#include "evtach/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace evtach {

int effective_threads() {
#ifdef _OPENMP
    int n = omp_get_max_threads();
#else
    int n = 1;
#endif
    if (const char* env = std::getenv("EVTACH_THREADS")) {
        int cap = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), cap);
        if (ec == std::errc() && ptr == env + std::strlen(env) && cap > 0 && cap < n) n = cap;
    }
    return n > 0 ? n : 1;
}

} // namespace evtach
