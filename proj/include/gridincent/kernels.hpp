#pragma once

#include <cstddef>
#include <span>

#include "gridincent/dense.hpp"

// Dense numeric kernels with a serial reference path and an OpenMP path.
//
// Both paths are constructed to be bitwise identical: matrix products are
// parallel over output elements (each element accumulated serially in the
// same order as the reference), and scalar reductions use a fixed block
// decomposition whose combine order does not depend on the thread count.

namespace gridincent::kernels {

enum class Backend { serial, openmp };

Backend default_backend();
void set_default_backend(Backend b);

// Fixed block size of the deterministic reductions. Part of the numeric
// contract: changing it changes the last bits of reduction results.
inline constexpr std::size_t kReductionBlock = 1024;

double dot(std::span<const double> a, std::span<const double> b,
           Backend backend = default_backend());
double sum(std::span<const double> a, Backend backend = default_backend());
double max_abs(std::span<const double> a, Backend backend = default_backend());
double max_val(std::span<const double> a, Backend backend = default_backend());
double min_val(std::span<const double> a, Backend backend = default_backend());

// Straight left-to-right reduction, used by tests as an order-independent
// cross-check of the blocked reductions.
double dot_naive(std::span<const double> a, std::span<const double> b);

void axpy(double alpha, std::span<const double> x, std::span<double> y,
          Backend backend = default_backend());
void scale(std::span<double> x, double alpha, Backend backend = default_backend());
void clamp_nonneg(std::span<double> x, Backend backend = default_backend());

// y = M x
void matvec(const Matrix& m, std::span<const double> x, std::span<double> y,
            Backend backend = default_backend());
// y = M^T x
void matvec_t(const Matrix& m, std::span<const double> x, std::span<double> y,
              Backend backend = default_backend());

// In-place lower Cholesky of a symmetric matrix; returns false when a pivot
// is not strictly positive (matrix not positive definite).
bool cholesky_in_place(Matrix& m);

// Largest eigenvalue of a symmetric positive semidefinite operator given as
// a matrix-free product, by power iteration from the deterministic start
// (1/sqrt(n)) * ones. `apply(x, y)` must write y = S x.
template <class Apply>
double power_iteration(std::size_t n, const Apply& apply, double tol = 1e-10,
                       long max_iterations = 200000);

}  // namespace gridincent::kernels

#include "gridincent/kernels_impl.hpp"
