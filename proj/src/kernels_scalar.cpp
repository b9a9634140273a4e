#include <cmath>

#include "semloc/kernels.hpp"

// Reference kernels. Every operation here defines the semantics the SIMD
// variants must reproduce; keep the arithmetic order in sync with them.

namespace semloc::kernels {

namespace {

inline double lookup_one(const FieldView& f, double wx, double wy) {
    const double dx = wx - f.origin_x;
    const double dy = wy - f.origin_y;
    const double u = (f.cos_o * dx + f.sin_o * dy) / f.resolution;
    const double v = (f.cos_o * dy - f.sin_o * dx) / f.resolution;
    const double cu = std::floor(u);
    const double cv = std::floor(v);
    if (cu < 0.0 || cu >= f.width || cv < 0.0 || cv >= f.height)
        return f.d_max;
    return f.dist[static_cast<int>(cv) * f.width + static_cast<int>(cu)];
}

void se2_transform_scalar(const Se2& pose, const double* xs, const double* ys, double* out_x,
                          double* out_y, int n) {
    for (int i = 0; i < n; ++i) {
        out_x[i] = pose.x + pose.cos_t * xs[i] - pose.sin_t * ys[i];
        out_y[i] = pose.y + pose.sin_t * xs[i] + pose.cos_t * ys[i];
    }
}

void field_lookup_scalar(const FieldView& f, const double* xs, const double* ys, double* out,
                         int n) {
    for (int i = 0; i < n; ++i)
        out[i] = lookup_one(f, xs[i], ys[i]);
}

double mixture_log_sum_scalar(const double* d, const double* addend, int n, double zhit_norm,
                              double inv_two_sigma_sq) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double p = zhit_norm * std::exp(-d[i] * d[i] * inv_two_sigma_sq) + addend[i];
        sum += std::log(p);
    }
    return sum;
}

double lfm_log_likelihood_scalar(const FieldView& f, const Se2& pose, const double* ex,
                                 const double* ey, const double* addend, int n, double zhit_norm,
                                 double inv_two_sigma_sq) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double wx = pose.x + pose.cos_t * ex[i] - pose.sin_t * ey[i];
        const double wy = pose.y + pose.sin_t * ex[i] + pose.cos_t * ey[i];
        const double dist = lookup_one(f, wx, wy);
        const double p = zhit_norm * std::exp(-dist * dist * inv_two_sigma_sq) + addend[i];
        sum += std::log(p);
    }
    return sum;
}

void vexp_scalar(const double* in, double* out, int n) {
    for (int i = 0; i < n; ++i)
        out[i] = std::exp(in[i]);
}

void vlog_scalar(const double* in, double* out, int n) {
    for (int i = 0; i < n; ++i)
        out[i] = std::log(in[i]);
}

}  // namespace

const KernelSet& scalar_kernels() {
    static const KernelSet set{
        "scalar",          se2_transform_scalar,       field_lookup_scalar,
        mixture_log_sum_scalar, lfm_log_likelihood_scalar, vexp_scalar,
        vlog_scalar,
    };
    return set;
}

}  // namespace semloc::kernels
