#include "ddsim/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ddsim {

SpectralInterval gershgorin_interval(const SparseMatrix& h) {
  if (h.rows() == 0) return {};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (Index r = 0; r < h.outerSize(); ++r) {
    double diag = 0.0;
    double radius = 0.0;
    for (SparseMatrix::InnerIterator it(h, r); it; ++it) {
      if (it.col() == r)
        diag = it.value().real();
      else
        radius += std::abs(it.value());
    }
    lo = std::min(lo, diag - radius);
    hi = std::max(hi, diag + radius);
  }
  return {lo, hi};
}

std::vector<double> bessel_j_sequence(double x, std::size_t count) {
  std::vector<double> out(count, 0.0);
  if (count == 0) return out;
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const double ax = std::abs(x);
  std::size_t start = std::max(count, static_cast<std::size_t>(std::ceil(ax))) + 64 +
                      4 * static_cast<std::size_t>(std::ceil(std::cbrt(ax)));
  if (start % 2 != 0) ++start;

  std::vector<double> j(start + 2, 0.0);
  j[start + 1] = 0.0;
  j[start] = 1e-300;
  for (std::size_t k = start; k >= 1; --k) {
    j[k - 1] = (2.0 * static_cast<double>(k) / ax) * j[k] - j[k + 1];
    if (std::abs(j[k - 1]) > 1e250) {
      for (std::size_t m = k - 1; m <= start + 1; ++m) j[m] *= 1e-250;
    }
  }
  // J_0 + 2 sum_k J_2k = 1
  double norm = j[0];
  for (std::size_t k = 2; k <= start; k += 2) norm += 2.0 * j[k];
  for (std::size_t k = 0; k < count; ++k) {
    double v = j[k] / norm;
    if (x < 0.0 && (k % 2 == 1)) v = -v;
    out[k] = v;
  }
  return out;
}

ChebyshevExpm::ChebyshevExpm(std::shared_ptr<const SparseMatrix> h, double t, double tol, double margin,
                             std::size_t max_terms)
    : h_(std::move(h)), t_(t) {
  if (!h_) throw std::invalid_argument("ChebyshevExpm: null Hamiltonian");
  if (!(tol > 0.0)) throw std::invalid_argument("ChebyshevExpm: tolerance must be positive");
  if (!(margin >= 1.0)) throw std::invalid_argument("ChebyshevExpm: spectral margin must be >= 1");
  const SpectralInterval iv = gershgorin_interval(*h_);
  center_ = iv.center();
  half_width_ = iv.half_width() * margin;

  const double x = half_width_ * t;
  const double ax = std::abs(x);
  if (max_terms == 0) max_terms = static_cast<std::size_t>(10.0 * ax) + 100;
  if (half_width_ == 0.0) {
    coeffs_.assign(1, Complex(1.0, 0.0));
    return;
  }
  const std::vector<double> bj = bessel_j_sequence(x, max_terms + 1);
  std::size_t cut = 0;
  for (std::size_t k = 0; k <= max_terms; ++k) {
    const double weight = (k == 0 ? 1.0 : 2.0) * std::abs(bj[k]);
    if (static_cast<double>(k) >= ax && weight < tol) {
      cut = k;
      break;
    }
  }
  if (cut == 0)
    throw ConvergenceError("Chebyshev expansion did not converge within " + std::to_string(max_terms) + " terms");
  coeffs_.resize(cut);
  Complex minus_i_pow(1.0, 0.0);
  for (std::size_t k = 0; k < cut; ++k) {
    coeffs_[k] = (k == 0 ? 1.0 : 2.0) * minus_i_pow * bj[k];
    minus_i_pow *= Complex(0.0, -1.0);
  }
}

void ChebyshevExpm::apply(ComplexBlock& block) const {
  const Complex phase = std::exp(Complex(0.0, -center_ * t_));
  if (coeffs_.size() == 1 && half_width_ == 0.0) {
    block *= phase;
    return;
  }
  const double inv_a = 1.0 / half_width_;
  auto scaled = [&](const ComplexBlock& v) -> ComplexBlock {
    ComplexBlock w = (*h_) * v;
    w -= center_ * v;
    w *= inv_a;
    return w;
  };

  ComplexBlock prev = block;
  ComplexBlock result = coeffs_[0] * prev;
  if (coeffs_.size() > 1) {
    ComplexBlock cur = scaled(prev);
    result += coeffs_[1] * cur;
    for (std::size_t k = 2; k < coeffs_.size(); ++k) {
      ComplexBlock next = 2.0 * scaled(cur) - prev;
      result += coeffs_[k] * next;
      prev.swap(cur);
      cur.swap(next);
    }
  }
  block = phase * result;
}

}  // namespace ddsim
