#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ddsim {

using Complex = std::complex<double>;
using Index = Eigen::Index;

using ComplexVector = Eigen::VectorXcd;
using ComplexBlock = Eigen::MatrixXcd;
using DenseMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// Operators on spaces of at least this dimension are stored sparse.
inline constexpr Index kSparseThreshold = Index{1} << 12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or site-count guard tripped.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Propagation lost unitarity beyond tolerance.
class NormDriftError : public Error {
 public:
  using Error::Error;
};

/// Complex matrix acting on a model Hilbert space, stored dense or sparse.
class Operator {
 public:
  Operator() = default;
  explicit Operator(DenseMatrix m, bool hermitian = false);
  explicit Operator(SparseMatrix m, bool hermitian = false);

  // Picks storage from the dimension: sparse at or above kSparseThreshold.
  static Operator automatic(const DenseMatrix& m, bool hermitian = false);

  Index dim() const;
  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }
  bool hermitian() const { return hermitian_; }

  const DenseMatrix& dense() const;
  const SparseMatrix& sparse() const;
  DenseMatrix to_dense() const;
  SparseMatrix to_sparse() const;

  ComplexVector apply(const ComplexVector& v) const;

 private:
  void check_hermitian() const;

  std::variant<DenseMatrix, SparseMatrix> storage_{DenseMatrix{}};
  bool hermitian_ = false;
};

/// Normalized amplitude vector.
class StateVector {
 public:
  StateVector() = default;
  // Throws if the norm differs from 1 by more than 1e-12.
  explicit StateVector(ComplexVector amplitudes);

  static StateVector normalized(ComplexVector v);

  Index dim() const { return amplitudes_.size(); }
  const ComplexVector& amplitudes() const { return amplitudes_; }

 private:
  ComplexVector amplitudes_;
};

double max_abs(const DenseMatrix& m);
double max_abs(const SparseMatrix& m);

// max |A - A^dagger|
double hermiticity_defect(const DenseMatrix& m);
double hermiticity_defect(const SparseMatrix& m);

DenseMatrix commutator(const DenseMatrix& a, const DenseMatrix& b);

// Largest singular value.
double spectral_norm(const DenseMatrix& m);

// exp(-i H t) for dense Hermitian H via eigendecomposition.
DenseMatrix expm_hermitian(const DenseMatrix& h, double t);

}  // namespace ddsim
