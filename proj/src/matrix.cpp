#include "npnet/matrix.hpp"

#include <cmath>

#include "npnet/common.hpp"

namespace npnet {

namespace {

// Chunk size that keeps threads busy for long enough to beat spawn cost;
// small products run sequentially.
std::size_t grain_for(std::size_t work_per_item) {
    return std::max<std::size_t>(16, 300000 / std::max<std::size_t>(1, work_per_item));
}

} // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.rows()) throw Error("matmul: inner dimensions differ");
    out = Matrix(a.rows(), b.cols());
    parallel_for(a.rows(), grain_for(a.cols() * b.cols()), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* dst = out.row(i);
            const double* ar = a.row(i);
            for (std::size_t k = 0; k < a.cols(); ++k) {
                const double aik = ar[k];
                if (aik == 0.0) continue;
                const double* br = b.row(k);
                for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * br[j];
            }
        }
    });
}

void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.rows() != b.rows()) throw Error("matmul_at_b: row counts differ");
    out = Matrix(a.cols(), b.cols());
    parallel_for(a.cols(), grain_for(a.rows() * b.cols()), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t n = 0; n < a.rows(); ++n) {
            const double* ar = a.row(n);
            const double* br = b.row(n);
            for (std::size_t i = lo; i < hi; ++i) {
                const double v = ar[i];
                if (v == 0.0) continue;
                double* dst = out.row(i);
                for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += v * br[j];
            }
        }
    });
}

void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.cols()) throw Error("matmul_a_bt: column counts differ");
    out = Matrix(a.rows(), b.rows());
    parallel_for(a.rows(), grain_for(a.cols() * b.rows()), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double* ar = a.row(i);
            double* dst = out.row(i);
            for (std::size_t j = 0; j < b.rows(); ++j) {
                const double* br = b.row(j);
                double acc = 0.0;
                for (std::size_t k = 0; k < a.cols(); ++k) acc += ar[k] * br[k];
                dst[j] = acc;
            }
        }
    });
}

double vec_norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double vec_dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace npnet
