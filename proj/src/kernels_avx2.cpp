// AVX2 variants of the weighting kernels. Four doubles per iteration, scalar
// tail identical to the reference kernels. Built with -mavx2 (no FMA), so the
// transform and lookup lanes execute the same IEEE mul/add sequence as the
// scalar reference and stay bit-exact. exp/log use polynomial evaluations
// (range-reduced Taylor / atanh series) accurate to a few ulp.

#if defined(__AVX2__)

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "semloc/kernels.hpp"

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

// ------------------------------------------------------------------
// exp for 4 doubles: n = round(x/ln2), r = x - n*ln2 (hi/lo split),
// e^r by degree-13 Taylor, scale by 2^n in two steps so the denormal
// range stays representable.
// ------------------------------------------------------------------

inline __m256d exp4(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(n, ln2_hi));
    r = _mm256_sub_pd(r, _mm256_mul_pd(n, ln2_lo));

    // Horner over 1/k! for k = 13 .. 0.
    __m256d p = _mm256_set1_pd(1.6059043836821614599e-10);  // 1/13!
    const double inv_fact[] = {
        2.0876756987868098979e-09,  // 1/12!
        2.5052108385441718775e-08,  // 1/11!
        2.7557319223985890653e-07,  // 1/10!
        2.7557319223985892511e-06,  // 1/9!
        2.4801587301587301566e-05,  // 1/8!
        1.9841269841269841253e-04,  // 1/7!
        1.3888888888888889419e-03,  // 1/6!
        8.3333333333333332177e-03,  // 1/5!
        4.1666666666666664354e-02,  // 1/4!
        1.6666666666666665741e-01,  // 1/3!
        5.0000000000000000000e-01,  // 1/2!
        1.0,
        1.0,
    };
    for (double c : inv_fact)
        p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(c));

    // 2^n = 2^n1 * 2^n2 with n1 = n/2 rounded toward zero, so each factor
    // stays inside the normal exponent range even for denormal results.
    const __m256d half_n = _mm256_round_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)),
                                           _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC);
    const __m256d rest_n = _mm256_sub_pd(n, half_n);
    const __m256i bias = _mm256_set1_epi64x(1023);
    auto pow2 = [&bias](__m256d k) {
        const __m256i k64 = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(k));
        return _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(k64, bias), 52));
    };
    __m256d result = _mm256_mul_pd(_mm256_mul_pd(p, pow2(half_n)), pow2(rest_n));

    // Saturate: exp underflows to +0 below -745.2, overflows above 709.8.
    const __m256d lo_mask = _mm256_cmp_pd(x, _mm256_set1_pd(-745.2), _CMP_LT_OQ);
    const __m256d hi_mask = _mm256_cmp_pd(x, _mm256_set1_pd(709.8), _CMP_GT_OQ);
    result = _mm256_andnot_pd(lo_mask, result);
    result = _mm256_blendv_pd(result, _mm256_set1_pd(std::numeric_limits<double>::infinity()),
                              hi_mask);
    return result;
}

// ------------------------------------------------------------------
// log for 4 positive doubles: x = m * 2^e with m in [sqrt(1/2), sqrt(2)),
// ln m = 2 atanh((m-1)/(m+1)) by odd series, ln x = e*ln2 + ln m.
// Zeros map to -inf; subnormals are pre-scaled by 2^54.
// ------------------------------------------------------------------

inline __m128i low32_of_epi64(__m256i v) {
    const __m128i lo = _mm256_castsi256_si128(v);
    const __m128i hi = _mm256_extracti128_si256(v, 1);
    return _mm_castps_si128(_mm_shuffle_ps(_mm_castsi128_ps(lo), _mm_castsi128_ps(hi),
                                           _MM_SHUFFLE(2, 0, 2, 0)));
}

inline __m256d log4(__m256d x) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d zero_mask = _mm256_cmp_pd(x, zero, _CMP_EQ_OQ);

    // Scale subnormals into the normal range.
    const __m256d tiny = _mm256_set1_pd(2.2250738585072014e-308);  // DBL_MIN
    const __m256d sub_mask = _mm256_andnot_pd(zero_mask, _mm256_cmp_pd(x, tiny, _CMP_LT_OQ));
    const __m256d scaled = _mm256_mul_pd(x, _mm256_set1_pd(0x1p54));
    x = _mm256_blendv_pd(x, scaled, sub_mask);
    const __m256d e_adjust = _mm256_and_pd(sub_mask, _mm256_set1_pd(54.0));

    const __m256i bits = _mm256_castpd_si256(x);
    const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
    __m256d e = _mm256_cvtepi32_pd(low32_of_epi64(exp_bits));
    e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));
    e = _mm256_sub_pd(e, e_adjust);

    const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFll);
    const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000ll);
    __m256d m = _mm256_castsi256_pd(
        _mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

    // Fold m into [sqrt(1/2), sqrt(2)).
    const __m256d sqrt2 = _mm256_set1_pd(1.4142135623730951);
    const __m256d fold = _mm256_cmp_pd(m, sqrt2, _CMP_GE_OQ);
    m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), fold);
    e = _mm256_add_pd(e, _mm256_and_pd(fold, _mm256_set1_pd(1.0)));

    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d t = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
    const __m256d s = _mm256_mul_pd(t, t);

    // 2*atanh(t) = t*(2 + s*(2/3 + s*(2/5 + ...))), up to t^15.
    __m256d p = _mm256_set1_pd(2.0 / 15.0);
    const double coeffs[] = {2.0 / 13.0, 2.0 / 11.0, 2.0 / 9.0, 2.0 / 7.0,
                             2.0 / 5.0,  2.0 / 3.0,  2.0};
    for (double c : coeffs)
        p = _mm256_add_pd(_mm256_mul_pd(p, s), _mm256_set1_pd(c));
    const __m256d ln_m = _mm256_mul_pd(t, p);

    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    __m256d result = _mm256_add_pd(_mm256_mul_pd(e, ln2_hi),
                                   _mm256_add_pd(ln_m, _mm256_mul_pd(e, ln2_lo)));

    result = _mm256_blendv_pd(result,
                              _mm256_set1_pd(-std::numeric_limits<double>::infinity()),
                              zero_mask);
    return result;
}

// ------------------------------------------------------------------
// Kernels
// ------------------------------------------------------------------

void se2_transform_avx2(const Se2& pose, const double* xs, const double* ys, double* out_x,
                        double* out_y, int n) {
    const __m256d px = _mm256_set1_pd(pose.x);
    const __m256d py = _mm256_set1_pd(pose.y);
    const __m256d c = _mm256_set1_pd(pose.cos_t);
    const __m256d s = _mm256_set1_pd(pose.sin_t);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(xs + i);
        const __m256d y = _mm256_loadu_pd(ys + i);
        const __m256d wx =
            _mm256_add_pd(px, _mm256_sub_pd(_mm256_mul_pd(c, x), _mm256_mul_pd(s, y)));
        const __m256d wy =
            _mm256_add_pd(py, _mm256_add_pd(_mm256_mul_pd(s, x), _mm256_mul_pd(c, y)));
        _mm256_storeu_pd(out_x + i, wx);
        _mm256_storeu_pd(out_y + i, wy);
    }
    for (; i < n; ++i) {
        out_x[i] = pose.x + pose.cos_t * xs[i] - pose.sin_t * ys[i];
        out_y[i] = pose.y + pose.sin_t * xs[i] + pose.cos_t * ys[i];
    }
}

// World points -> cell distances: inverse map rotation, floor, bounds mask,
// gather with out-of-bounds lanes parked on index 0 and blended to d_max.
inline __m256d lookup4(const FieldView& f, __m256d wx, __m256d wy) {
    const __m256d ox = _mm256_set1_pd(f.origin_x);
    const __m256d oy = _mm256_set1_pd(f.origin_y);
    const __m256d co = _mm256_set1_pd(f.cos_o);
    const __m256d so = _mm256_set1_pd(f.sin_o);
    const __m256d res = _mm256_set1_pd(f.resolution);

    const __m256d dx = _mm256_sub_pd(wx, ox);
    const __m256d dy = _mm256_sub_pd(wy, oy);
    const __m256d u = _mm256_div_pd(
        _mm256_add_pd(_mm256_mul_pd(co, dx), _mm256_mul_pd(so, dy)), res);
    const __m256d v = _mm256_div_pd(
        _mm256_sub_pd(_mm256_mul_pd(co, dy), _mm256_mul_pd(so, dx)), res);
    const __m256d cu = _mm256_floor_pd(u);
    const __m256d cv = _mm256_floor_pd(v);

    const __m256d zero = _mm256_setzero_pd();
    __m256d inb = _mm256_and_pd(_mm256_cmp_pd(cu, zero, _CMP_GE_OQ),
                                _mm256_cmp_pd(cu, _mm256_set1_pd(double(f.width)), _CMP_LT_OQ));
    inb = _mm256_and_pd(inb, _mm256_cmp_pd(cv, zero, _CMP_GE_OQ));
    inb = _mm256_and_pd(inb, _mm256_cmp_pd(cv, _mm256_set1_pd(double(f.height)), _CMP_LT_OQ));

    const __m256d safe_u = _mm256_and_pd(cu, inb);
    const __m256d safe_v = _mm256_and_pd(cv, inb);
    const __m128i iu = _mm256_cvtpd_epi32(safe_u);
    const __m128i iv = _mm256_cvtpd_epi32(safe_v);
    const __m128i idx =
        _mm_add_epi32(_mm_mullo_epi32(iv, _mm_set1_epi32(f.width)), iu);
    const __m256d gathered = _mm256_i32gather_pd(f.dist, idx, 8);
    return _mm256_blendv_pd(_mm256_set1_pd(f.d_max), gathered, inb);
}

void field_lookup_avx2(const FieldView& f, const double* xs, const double* ys, double* out,
                       int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, lookup4(f, _mm256_loadu_pd(xs + i), _mm256_loadu_pd(ys + i)));
    for (; i < n; ++i)
        out[i] = lookup_one(f, xs[i], ys[i]);
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d sum2 = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(sum2, _mm_unpackhi_pd(sum2, sum2)));
}

inline __m256d mixture_log4(__m256d dist, __m256d addend, __m256d zhit_norm,
                            __m256d inv_two_sigma_sq) {
    const __m256d d2 = _mm256_mul_pd(dist, dist);
    const __m256d arg =
        _mm256_sub_pd(_mm256_setzero_pd(), _mm256_mul_pd(d2, inv_two_sigma_sq));
    const __m256d gauss = _mm256_mul_pd(zhit_norm, exp4(arg));
    return log4(_mm256_add_pd(gauss, addend));
}

double mixture_log_sum_avx2(const double* d, const double* addend, int n, double zhit_norm,
                            double inv_two_sigma_sq) {
    const __m256d zh = _mm256_set1_pd(zhit_norm);
    const __m256d is = _mm256_set1_pd(inv_two_sigma_sq);
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, mixture_log4(_mm256_loadu_pd(d + i),
                                              _mm256_loadu_pd(addend + i), zh, is));
    double sum = hsum(acc);
    for (; i < n; ++i) {
        const double p = zhit_norm * std::exp(-d[i] * d[i] * inv_two_sigma_sq) + addend[i];
        sum += std::log(p);
    }
    return sum;
}

double lfm_log_likelihood_avx2(const FieldView& f, const Se2& pose, const double* ex,
                               const double* ey, const double* addend, int n, double zhit_norm,
                               double inv_two_sigma_sq) {
    const __m256d px = _mm256_set1_pd(pose.x);
    const __m256d py = _mm256_set1_pd(pose.y);
    const __m256d c = _mm256_set1_pd(pose.cos_t);
    const __m256d s = _mm256_set1_pd(pose.sin_t);
    const __m256d zh = _mm256_set1_pd(zhit_norm);
    const __m256d is = _mm256_set1_pd(inv_two_sigma_sq);
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(ex + i);
        const __m256d y = _mm256_loadu_pd(ey + i);
        const __m256d wx =
            _mm256_add_pd(px, _mm256_sub_pd(_mm256_mul_pd(c, x), _mm256_mul_pd(s, y)));
        const __m256d wy =
            _mm256_add_pd(py, _mm256_add_pd(_mm256_mul_pd(s, x), _mm256_mul_pd(c, y)));
        const __m256d dist = lookup4(f, wx, wy);
        acc = _mm256_add_pd(acc, mixture_log4(dist, _mm256_loadu_pd(addend + i), zh, is));
    }
    double sum = hsum(acc);
    for (; i < n; ++i) {
        const double wx = pose.x + pose.cos_t * ex[i] - pose.sin_t * ey[i];
        const double wy = pose.y + pose.sin_t * ex[i] + pose.cos_t * ey[i];
        const double dist = lookup_one(f, wx, wy);
        const double p = zhit_norm * std::exp(-dist * dist * inv_two_sigma_sq) + addend[i];
        sum += std::log(p);
    }
    return sum;
}

void vexp_avx2(const double* in, double* out, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(in + i)));
    for (; i < n; ++i)
        out[i] = std::exp(in[i]);
}

void vlog_avx2(const double* in, double* out, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, log4(_mm256_loadu_pd(in + i)));
    for (; i < n; ++i)
        out[i] = std::log(in[i]);
}

}  // namespace

const KernelSet& avx2_kernels() {
    static const KernelSet set{
        "avx2",        se2_transform_avx2,       field_lookup_avx2, mixture_log_sum_avx2,
        lfm_log_likelihood_avx2, vexp_avx2,     vlog_avx2,
    };
    return set;
}

}  // namespace semloc::kernels

#endif  // __AVX2__
