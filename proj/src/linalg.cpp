#include "ddsim/linalg.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace ddsim {

namespace {
constexpr double kHermitianTol = 1e-12;
constexpr double kNormTol = 1e-12;
}  // namespace

Operator::Operator(DenseMatrix m, bool hermitian) : storage_(std::move(m)), hermitian_(hermitian) {
  if (dense().rows() != dense().cols()) throw std::invalid_argument("Operator: matrix not square");
  if (hermitian_) check_hermitian();
}

Operator::Operator(SparseMatrix m, bool hermitian) : storage_(std::move(m)), hermitian_(hermitian) {
  auto& s = std::get<SparseMatrix>(storage_);
  if (s.rows() != s.cols()) throw std::invalid_argument("Operator: matrix not square");
  s.makeCompressed();
  if (hermitian_) check_hermitian();
}

Operator Operator::automatic(const DenseMatrix& m, bool hermitian) {
  if (m.rows() >= kSparseThreshold) {
    SparseMatrix s = m.sparseView(Complex(0.0), 0.0);
    return Operator(std::move(s), hermitian);
  }
  return Operator(m, hermitian);
}

Index Operator::dim() const {
  return std::visit([](const auto& m) { return m.rows(); }, storage_);
}

const DenseMatrix& Operator::dense() const {
  if (is_sparse()) throw std::logic_error("Operator: dense() on sparse storage");
  return std::get<DenseMatrix>(storage_);
}

const SparseMatrix& Operator::sparse() const {
  if (!is_sparse()) throw std::logic_error("Operator: sparse() on dense storage");
  return std::get<SparseMatrix>(storage_);
}

DenseMatrix Operator::to_dense() const {
  if (is_sparse()) return DenseMatrix(sparse());
  return dense();
}

SparseMatrix Operator::to_sparse() const {
  if (is_sparse()) return sparse();
  SparseMatrix s = dense().sparseView(Complex(0.0), 0.0);
  s.makeCompressed();
  return s;
}

ComplexVector Operator::apply(const ComplexVector& v) const {
  if (v.size() != dim()) throw std::invalid_argument("Operator::apply: dimension mismatch");
  return std::visit([&](const auto& m) -> ComplexVector { return m * v; }, storage_);
}

void Operator::check_hermitian() const {
  const double defect = std::visit([](const auto& m) { return hermiticity_defect(m); }, storage_);
  if (defect > kHermitianTol)
    throw std::invalid_argument("Operator: flagged Hermitian but |H - H^dagger| = " + std::to_string(defect));
}

StateVector::StateVector(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {
  const double n = amplitudes_.norm();
  if (!(std::abs(n - 1.0) <= kNormTol))
    throw std::invalid_argument("StateVector: norm " + std::to_string(n) + " is not 1");
}

StateVector StateVector::normalized(ComplexVector v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("StateVector: cannot normalize zero vector");
  v /= n;
  return StateVector(std::move(v));
}

double max_abs(const DenseMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double max_abs(const SparseMatrix& m) {
  double best = 0.0;
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) best = std::max(best, std::abs(it.value()));
  return best;
}

double hermiticity_defect(const DenseMatrix& m) { return max_abs(DenseMatrix(m - m.adjoint())); }

double hermiticity_defect(const SparseMatrix& m) {
  SparseMatrix adj = m.adjoint();
  SparseMatrix diff = m - adj;
  return max_abs(diff);
}

DenseMatrix commutator(const DenseMatrix& a, const DenseMatrix& b) { return a * b - b * a; }

double spectral_norm(const DenseMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<DenseMatrix> svd(m);
  return svd.singularValues()(0);
}

DenseMatrix expm_hermitian(const DenseMatrix& h, double t) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
  if (es.info() != Eigen::Success) throw ConvergenceError("expm_hermitian: eigendecomposition failed");
  const ComplexVector phases = (es.eigenvalues().cast<Complex>() * Complex(0.0, -t)).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace ddsim
