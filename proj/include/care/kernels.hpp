#pragma once

// Data-parallel inner loops used by the encoder, the scorer and the trainer.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2+FMA
// variant is compiled into a separate translation unit and picked at runtime
// when the CPU supports it. Setting CARE_KERNELS=scalar in the environment
// forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

#include "care/tensor.hpp"

namespace care::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa) noexcept;

/// Shapes of a single-channel valid cross-correlation.
struct ConvShape {
    std::size_t in_h = 0;
    std::size_t in_w = 0;
    std::size_t k_h = 0;
    std::size_t k_w = 0;

    std::size_t out_h() const noexcept { return in_h - k_h + 1; }
    std::size_t out_w() const noexcept { return in_w - k_w + 1; }
};

struct KernelTable {
    Isa isa;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y = A x, A is rows x cols row-major
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    // y = A^T x, x has `rows` entries, y has `cols` entries
    void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    // A += alpha * u v^T
    void (*rank1)(double* a, std::size_t rows, std::size_t cols, double alpha, const double* u,
                  const double* v);
    // out = in (*) k, valid cross-correlation, out is out_h x out_w
    void (*xcorr2d)(const double* in, const double* k, const ConvShape& shape, double* out);
    // dk += sum_ij g[i][j] * in[i+a][j+b]
    void (*xcorr2d_filter_grad)(const double* in, const double* g, const ConvShape& shape,
                                double* dk);
};

/// Table chosen for this process (cached after the first call).
const KernelTable& active();

/// Table for a specific ISA; returns nullptr when the ISA is unavailable on this
/// build or CPU.
const KernelTable* table_for(Isa isa);

bool cpu_supports(Isa isa) noexcept;

namespace detail {
extern const KernelTable kScalarTable;
#if defined(CARE_HAVE_AVX2_KERNELS)
extern const KernelTable kAvx2Table;
#endif
}  // namespace detail

// Convenience wrappers over the active table.

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void gemv(const Matrix& a, std::span<const double> x, std::span<double> y) {
    active().gemv(a.flat().data(), a.rows(), a.cols(), x.data(), y.data());
}

inline void gemv_t(const Matrix& a, std::span<const double> x, std::span<double> y) {
    active().gemv_t(a.flat().data(), a.rows(), a.cols(), x.data(), y.data());
}

inline void rank1(Matrix& a, double alpha, std::span<const double> u, std::span<const double> v) {
    active().rank1(a.flat().data(), a.rows(), a.cols(), alpha, u.data(), v.data());
}

}  // namespace care::kernels
