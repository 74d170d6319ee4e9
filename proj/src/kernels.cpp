#include "gridincent/kernels.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace gridincent::kernels {

namespace {

std::atomic<Backend> g_backend{Backend::openmp};

// Serial dot of one block, identical on both paths.
inline double block_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double block_dot_strided(const double* a, std::size_t stride, const double* b,
                                std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i * stride] * b[i];
  return s;
}

// Deterministic two-level reduction: per-block partials in a fixed layout,
// combined left to right. The partial for block k does not depend on which
// thread computed it, so serial and OpenMP results are bitwise equal.
template <class BlockFn>
double blocked_reduce(std::size_t n, Backend backend, double empty, const BlockFn& fn,
                      bool combine_max = false, bool combine_min = false) {
  if (n == 0) return empty;
  const std::size_t nblocks = (n + kReductionBlock - 1) / kReductionBlock;
  Vector partial(nblocks);
  const auto run_block = [&](std::size_t k) {
    const std::size_t lo = k * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    partial[k] = fn(lo, hi);
  };
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (long k = 0; k < static_cast<long>(nblocks); ++k) run_block(static_cast<std::size_t>(k));
  } else {
    for (std::size_t k = 0; k < nblocks; ++k) run_block(k);
  }
  double acc = partial[0];
  for (std::size_t k = 1; k < nblocks; ++k) {
    if (combine_max)
      acc = std::max(acc, partial[k]);
    else if (combine_min)
      acc = std::min(acc, partial[k]);
    else
      acc += partial[k];
  }
  return acc;
}

}  // namespace

Backend default_backend() { return g_backend.load(std::memory_order_relaxed); }
void set_default_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

double dot(std::span<const double> a, std::span<const double> b, Backend backend) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  return blocked_reduce(a.size(), backend, 0.0, [&](std::size_t lo, std::size_t hi) {
    return block_dot(a.data() + lo, b.data() + lo, hi - lo);
  });
}

double dot_naive(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  return block_dot(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a, Backend backend) {
  return blocked_reduce(a.size(), backend, 0.0, [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += a[i];
    return s;
  });
}

double max_abs(std::span<const double> a, Backend backend) {
  return blocked_reduce(
      a.size(), backend, 0.0,
      [&](std::size_t lo, std::size_t hi) {
        double m = 0.0;
        for (std::size_t i = lo; i < hi; ++i) m = std::max(m, std::abs(a[i]));
        return m;
      },
      /*combine_max=*/true);
}

double max_val(std::span<const double> a, Backend backend) {
  if (a.empty()) throw std::invalid_argument("max_val: empty");
  return blocked_reduce(
      a.size(), backend, 0.0,
      [&](std::size_t lo, std::size_t hi) {
        double m = a[lo];
        for (std::size_t i = lo + 1; i < hi; ++i) m = std::max(m, a[i]);
        return m;
      },
      /*combine_max=*/true);
}

double min_val(std::span<const double> a, Backend backend) {
  if (a.empty()) throw std::invalid_argument("min_val: empty");
  return blocked_reduce(
      a.size(), backend, 0.0,
      [&](std::size_t lo, std::size_t hi) {
        double m = a[lo];
        for (std::size_t i = lo + 1; i < hi; ++i) m = std::min(m, a[i]);
        return m;
      },
      /*combine_max=*/false, /*combine_min=*/true);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y, Backend backend) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: size mismatch");
  const long n = static_cast<long>(x.size());
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) y[i] += alpha * x[i];
  } else {
    for (long i = 0; i < n; ++i) y[i] += alpha * x[i];
  }
}

void scale(std::span<double> x, double alpha, Backend backend) {
  const long n = static_cast<long>(x.size());
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) x[i] *= alpha;
  } else {
    for (long i = 0; i < n; ++i) x[i] *= alpha;
  }
}

void clamp_nonneg(std::span<double> x, Backend backend) {
  const long n = static_cast<long>(x.size());
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) x[i] = std::max(0.0, x[i]);
  } else {
    for (long i = 0; i < n; ++i) x[i] = std::max(0.0, x[i]);
  }
}

void matvec(const Matrix& m, std::span<const double> x, std::span<double> y, Backend backend) {
  if (x.size() != m.cols() || y.size() != m.rows())
    throw std::invalid_argument("matvec: size mismatch");
  const long rows = static_cast<long>(m.rows());
  const auto row_product = [&](long i) {
    // Same blocked order as dot() so the result is backend independent.
    double s = 0.0;
    const double* r = m.row(static_cast<std::size_t>(i));
    const std::size_t n = m.cols();
    for (std::size_t lo = 0; lo < n; lo += kReductionBlock)
      s += block_dot(r + lo, x.data() + lo, std::min(n, lo + kReductionBlock) - lo);
    y[static_cast<std::size_t>(i)] = s;
  };
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) row_product(i);
  } else {
    for (long i = 0; i < rows; ++i) row_product(i);
  }
}

void matvec_t(const Matrix& m, std::span<const double> x, std::span<double> y, Backend backend) {
  if (x.size() != m.rows() || y.size() != m.cols())
    throw std::invalid_argument("matvec_t: size mismatch");
  const long cols = static_cast<long>(m.cols());
  const auto col_product = [&](long j) {
    double s = 0.0;
    const std::size_t n = m.rows();
    const double* base = m.data() + static_cast<std::size_t>(j);
    for (std::size_t lo = 0; lo < n; lo += kReductionBlock)
      s += block_dot_strided(base + lo * m.cols(), m.cols(), x.data() + lo,
                             std::min(n, lo + kReductionBlock) - lo);
    y[static_cast<std::size_t>(j)] = s;
  };
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (long j = 0; j < cols; ++j) col_product(j);
  } else {
    for (long j = 0; j < cols; ++j) col_product(j);
  }
}

bool cholesky_in_place(Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("cholesky: not square");
  const std::size_t n = m.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
    if (!(d > 0.0)) return false;
    const double l = std::sqrt(d);
    m(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
      m(i, j) = s / l;
    }
  }
  // zero the strictly upper triangle so the factor is clean
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = 0.0;
  return true;
}

}  // namespace gridincent::kernels
