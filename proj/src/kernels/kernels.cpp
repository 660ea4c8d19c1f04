#include "sdm/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sdm::kernels {

const Ops& scalar_ops();
#if defined(SDM_HAVE_AVX2)
const Ops& avx2_ops();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(SDM_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

struct Selection {
    Backend backend;
    const Ops* table;
};

Selection select(Backend b) {
#if defined(SDM_HAVE_AVX2)
    if (b == Backend::avx2) return {Backend::avx2, &avx2_ops()};
#endif
    return {Backend::scalar, &scalar_ops()};
}

Selection initial_selection() {
    Backend pick = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("SDM_KERNELS")) {
        const std::string v(env);
        if (v == "scalar") {
            pick = Backend::scalar;
        } else if (v == "avx2") {
            if (!cpu_has_avx2()) {
                throw std::invalid_argument("SDM_KERNELS=avx2 but the host has no AVX2 support");
            }
            pick = Backend::avx2;
        } else if (v != "auto" && !v.empty()) {
            throw std::invalid_argument("SDM_KERNELS must be scalar, avx2 or auto, got '" + v + "'");
        }
    }
    return select(pick);
}

Selection& state() {
    static Selection s = initial_selection();
    return s;
}

} // namespace

bool backend_available(Backend b) {
    return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

Backend active_backend() { return state().backend; }

void set_backend(Backend b) {
    if (!backend_available(b)) {
        throw std::invalid_argument(std::string("kernel backend unavailable on this host: ") +
                                    backend_name(b));
    }
    state() = select(b);
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "?";
}

const Ops& ops() { return *state().table; }

} // namespace sdm::kernels
