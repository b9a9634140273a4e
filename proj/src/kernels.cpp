#include "semloc/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace semloc::kernels {

const KernelSet& scalar_kernels();
#if defined(__AVX2__)
const KernelSet& avx2_kernels();
#endif

FieldView make_field_view(const SemanticGridMap& map, const DistanceField& field) {
    FieldView v;
    v.dist = field.dist.data();
    v.width = field.width;
    v.height = field.height;
    v.origin_x = map.origin().x;
    v.origin_y = map.origin().y;
    v.cos_o = std::cos(map.origin().theta);
    v.sin_o = std::sin(map.origin().theta);
    v.resolution = field.resolution;
    v.d_max = field.d_max;
    return v;
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__AVX2__)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

Backend preferred_backend() {
    if (backend_available(Backend::avx2))
        return Backend::avx2;
    return Backend::scalar;
}

const KernelSet& get(Backend b) {
    switch (b) {
        case Backend::scalar:
            return scalar_kernels();
        case Backend::avx2:
#if defined(__AVX2__)
            if (backend_available(Backend::avx2))
                return avx2_kernels();
#endif
            throw std::runtime_error("avx2 kernels not available on this machine");
    }
    throw std::runtime_error("unknown kernel backend");
}

namespace {
std::atomic<const KernelSet*> g_active{nullptr};
std::atomic<Backend> g_active_backend{Backend::scalar};
}  // namespace

void set_active(Backend b) {
    g_active.store(&get(b));
    g_active_backend.store(b);
}

const KernelSet& active() {
    const KernelSet* set = g_active.load();
    if (!set) {
        set_active(preferred_backend());
        set = g_active.load();
    }
    return *set;
}

Backend active_backend() {
    active();
    return g_active_backend.load();
}

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

Backend backend_from_name(const std::string& name) {
    if (name == "scalar")
        return Backend::scalar;
    if (name == "avx2")
        return Backend::avx2;
    if (name == "auto")
        return preferred_backend();
    throw std::invalid_argument("unknown kernel backend '" + name + "' (scalar|avx2|auto)");
}

}  // namespace semloc::kernels
