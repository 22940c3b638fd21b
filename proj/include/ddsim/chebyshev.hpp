#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "ddsim/linalg.hpp"

namespace ddsim {

struct SpectralInterval {
  double lower = 0.0;
  double upper = 0.0;
  double center() const { return 0.5 * (lower + upper); }
  double half_width() const { return 0.5 * (upper - lower); }
};

// Gershgorin enclosure of the spectrum of a Hermitian matrix.
SpectralInterval gershgorin_interval(const SparseMatrix& h);

// J_0(x) .. J_{count-1}(x) by Miller's downward recurrence.
std::vector<double> bessel_j_sequence(double x, std::size_t count);

/// exp(-i H t) acting on vectors through a Chebyshev expansion of H rescaled onto
/// [-1, 1]. Coefficients are computed once; apply() may be called repeatedly.
class ChebyshevExpm {
 public:
  // margin scales the Gershgorin half-width; max_terms = 0 selects 10*(a*t) + 100.
  ChebyshevExpm(std::shared_ptr<const SparseMatrix> h, double t, double tol, double margin = 1.05, std::size_t max_terms = 0);

  std::size_t terms() const { return coeffs_.size(); }
  double time() const { return t_; }

  // In place on every column of block.
  void apply(ComplexBlock& block) const;

 private:
  std::shared_ptr<const SparseMatrix> h_;
  double t_;
  double center_;
  double half_width_;
  std::vector<Complex> coeffs_;
};

}  // namespace ddsim
