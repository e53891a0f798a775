#include "lp/threads.hpp"

#include <omp.h>

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace lp {

int configure_threads() {
    const char* raw = std::getenv("LATENT_PROBE_THREADS");
    if (raw == nullptr || raw[0] == '\0') return omp_get_max_threads();
    int want = 0;
    try {
        std::size_t used = 0;
        want = std::stoi(raw, &used);
        if (used != std::string(raw).size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string("threads: LATENT_PROBE_THREADS is not an integer: ") + raw);
    }
    if (want < 0) throw std::invalid_argument("threads: LATENT_PROBE_THREADS must be >= 0");
    if (want == 0) return omp_get_max_threads();
    omp_set_num_threads(want);
    return want;
}

}  // namespace lp
