#pragma once

// Data-parallel inner loops of the particle weighting step: batched SE(2)
// point transforms, distance-field gathers, and the likelihood-field mixture
// log-sum. Scalar reference kernels are the semantic ground truth; an AVX2
// variant is selected at runtime when the CPU supports it. The two backends
// are equivalence-tested: transform and lookup are bit-exact, the exp/log
// based kernels agree to ~1e-13 relative.

#include <string>

#include "semloc/semantic_map.hpp"

namespace semloc::kernels {

// Flattened view of one distance field plus the map frame, ready for tight
// loops. `dist` must outlive the view.
struct FieldView {
    const double* dist = nullptr;
    int width = 0;
    int height = 0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    double cos_o = 1.0;
    double sin_o = 0.0;
    double resolution = 1.0;
    double d_max = 0.0;
};

FieldView make_field_view(const SemanticGridMap& map, const DistanceField& field);

// Precomputed particle frame.
struct Se2 {
    double x = 0.0;
    double y = 0.0;
    double cos_t = 1.0;
    double sin_t = 0.0;
};

inline Se2 make_se2(const Pose2D& p) {
    return Se2{p.x, p.y, std::cos(p.theta), std::sin(p.theta)};
}

struct KernelSet {
    const char* name;

    // out[i] = pose applied to (xs[i], ys[i])
    void (*se2_transform)(const Se2& pose, const double* xs, const double* ys, double* out_x,
                          double* out_y, int n);

    // out[i] = field value at world point (xs[i], ys[i]); d_max outside bounds
    void (*field_lookup)(const FieldView& f, const double* xs, const double* ys, double* out,
                         int n);

    // sum over i of log(zhit_norm * exp(-d[i]^2 * inv_two_sigma_sq) + addend[i])
    double (*mixture_log_sum)(const double* d, const double* addend, int n, double zhit_norm,
                              double inv_two_sigma_sq);

    // Fused transform + lookup + mixture log-sum for one particle.
    double (*lfm_log_likelihood)(const FieldView& f, const Se2& pose, const double* ex,
                                 const double* ey, const double* addend, int n, double zhit_norm,
                                 double inv_two_sigma_sq);

    // Elementwise exp/log, exposed for equivalence tests and reuse.
    void (*vexp)(const double* in, double* out, int n);
    void (*vlog)(const double* in, double* out, int n);
};

enum class Backend { scalar, avx2 };

bool backend_available(Backend b);
Backend preferred_backend();
const KernelSet& get(Backend b);

// Process-wide selection; defaults to preferred_backend().
void set_active(Backend b);
const KernelSet& active();
Backend active_backend();

const char* backend_name(Backend b);
Backend backend_from_name(const std::string& name);  // "auto" -> preferred

}  // namespace semloc::kernels
