#include "care/kernels.hpp"

namespace care::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * cols, x, cols);
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x,
                   double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], a + r * cols, y, cols);
}

void rank1_scalar(double* a, std::size_t rows, std::size_t cols, double alpha, const double* u,
                  const double* v) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(alpha * u[r], v, a + r * cols, cols);
}

void xcorr2d_scalar(const double* in, const double* k, const ConvShape& s, double* out) {
    const std::size_t oh = s.out_h();
    const std::size_t ow = s.out_w();
    for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (std::size_t a = 0; a < s.k_h; ++a)
                for (std::size_t b = 0; b < s.k_w; ++b)
                    acc += in[(i + a) * s.in_w + (j + b)] * k[a * s.k_w + b];
            out[i * ow + j] = acc;
        }
    }
}

void xcorr2d_filter_grad_scalar(const double* in, const double* g, const ConvShape& s, double* dk) {
    const std::size_t oh = s.out_h();
    const std::size_t ow = s.out_w();
    for (std::size_t a = 0; a < s.k_h; ++a) {
        for (std::size_t b = 0; b < s.k_w; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j)
                    acc += g[i * ow + j] * in[(i + a) * s.in_w + (j + b)];
            dk[a * s.k_w + b] += acc;
        }
    }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{
    Isa::Scalar,         dot_scalar,     axpy_scalar,
    gemv_scalar,         gemv_t_scalar,  rank1_scalar,
    xcorr2d_scalar,      xcorr2d_filter_grad_scalar,
};
}  // namespace detail

}  // namespace care::kernels
