// Compiled with -mavx2 -mfma. Only reached through the dispatch table after a
// CPUID check, so nothing here may be inlined into generic code.

#include <immintrin.h>

#include "care/kernels.hpp"

namespace care::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(a + r * cols, x, cols);
}

void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(x[r], a + r * cols, y, cols);
}

void rank1_avx2(double* a, std::size_t rows, std::size_t cols, double alpha, const double* u,
                const double* v) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(alpha * u[r], v, a + r * cols, cols);
}

// Vectorised across output columns: each filter tap is broadcast and
// multiplied into a 4-wide strip of the shifted input row.
void xcorr2d_avx2(const double* in, const double* k, const ConvShape& s, double* out) {
    const std::size_t oh = s.out_h();
    const std::size_t ow = s.out_w();
    for (std::size_t i = 0; i < oh; ++i) {
        double* orow = out + i * ow;
        std::size_t j = 0;
        for (; j + 4 <= ow; j += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t a = 0; a < s.k_h; ++a) {
                const double* irow = in + (i + a) * s.in_w + j;
                for (std::size_t b = 0; b < s.k_w; ++b)
                    acc = _mm256_fmadd_pd(_mm256_set1_pd(k[a * s.k_w + b]),
                                          _mm256_loadu_pd(irow + b), acc);
            }
            _mm256_storeu_pd(orow + j, acc);
        }
        for (; j < ow; ++j) {
            double acc = 0.0;
            for (std::size_t a = 0; a < s.k_h; ++a)
                for (std::size_t b = 0; b < s.k_w; ++b)
                    acc += in[(i + a) * s.in_w + (j + b)] * k[a * s.k_w + b];
            orow[j] = acc;
        }
    }
}

void xcorr2d_filter_grad_avx2(const double* in, const double* g, const ConvShape& s, double* dk) {
    const std::size_t oh = s.out_h();
    const std::size_t ow = s.out_w();
    for (std::size_t a = 0; a < s.k_h; ++a) {
        for (std::size_t b = 0; b < s.k_w; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < oh; ++i)
                acc += dot_avx2(g + i * ow, in + (i + a) * s.in_w + b, ow);
            dk[a * s.k_w + b] += acc;
        }
    }
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{
    Isa::Avx2,       dot_avx2,     axpy_avx2,
    gemv_avx2,       gemv_t_avx2,  rank1_avx2,
    xcorr2d_avx2,    xcorr2d_filter_grad_avx2,
};
}  // namespace detail

}  // namespace care::kernels
