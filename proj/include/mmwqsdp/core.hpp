#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace mmwqsdp {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kPsdTol = 1e-9;
inline constexpr double kTraceTol = 1e-9;
inline constexpr double kClampFloor = 1e-13;
inline constexpr double kImagTol = 1e-9;

namespace detail {

inline std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

inline void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b)
    throw UsageError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
}

// Hermitian part, used after a tolerance check to remove rounding asymmetry.
inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace detail

// Dense Hermitian matrix. Construction checks |m_ij - conj(m_ji)| against
// kHermitianTol * max(1, max|m|) and then stores the exact Hermitian part.
class HermitianMatrix {
 public:
  HermitianMatrix() : m_(Matrix::Zero(1, 1)) {}

  explicit HermitianMatrix(Matrix m, double tol = kHermitianTol) {
    if (m.rows() != m.cols())
      throw ContractViolation("HermitianMatrix: not square (" + detail::dims(m.rows(), m.cols()) + ")");
    if (m.rows() < 1) throw ContractViolation("HermitianMatrix: dimension must be >= 1");
    if (!m.allFinite()) throw ContractViolation("HermitianMatrix: non-finite entry");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (asym > tol * scale)
      throw ContractViolation("HermitianMatrix: not Hermitian (max asymmetry " + std::to_string(asym) + ")");
    m_ = detail::symmetrize(m);
  }

  static HermitianMatrix zero(Eigen::Index n) { return HermitianMatrix(Matrix::Zero(n, n)); }
  static HermitianMatrix identity(Eigen::Index n) { return HermitianMatrix(Matrix::Identity(n, n)); }

  static HermitianMatrix diagonal(std::span<const double> d) {
    Matrix m = Matrix::Zero(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return HermitianMatrix(std::move(m));
  }
  static HermitianMatrix diagonal(std::initializer_list<double> d) {
    return diagonal(std::span<const double>(d.begin(), d.size()));
  }

  // |v><v| for the given (not necessarily normalized) vector.
  static HermitianMatrix outer(const Vector& v) { return HermitianMatrix(v * v.adjoint()); }

  Eigen::Index dim() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  HermitianMatrix operator+(const HermitianMatrix& o) const {
    detail::require_same_dim(dim(), o.dim(), "HermitianMatrix +");
    return trusted(m_ + o.m_);
  }
  HermitianMatrix operator-(const HermitianMatrix& o) const {
    detail::require_same_dim(dim(), o.dim(), "HermitianMatrix -");
    return trusted(m_ - o.m_);
  }
  HermitianMatrix operator*(double s) const { return trusted(m_ * s); }
  friend HermitianMatrix operator*(double s, const HermitianMatrix& h) { return h * s; }
  HermitianMatrix& operator+=(const HermitianMatrix& o) {
    detail::require_same_dim(dim(), o.dim(), "HermitianMatrix +=");
    m_ += o.m_;
    return *this;
  }

  // Wraps a matrix already known to be Hermitian (closed operations).
  static HermitianMatrix trusted(Matrix m) {
    HermitianMatrix h;
    h.m_ = detail::symmetrize(m);
    return h;
  }

 private:
  Matrix m_;
};

struct Spectrum {
  RealVector eigenvalues;  // ascending
  Matrix eigenvectors;     // columns

  Eigen::Index dim() const noexcept { return eigenvalues.size(); }
  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
  }
};

inline Spectrum eigh(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
  if (solver.info() != Eigen::Success)
    throw NumericFailure("eigh: eigensolver did not converge for dimension " + std::to_string(h.rows()));
  return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

inline Spectrum eigh(const HermitianMatrix& h) { return eigh(h.matrix()); }

inline std::pair<double, double> spectral_range(const HermitianMatrix& h) {
  const Spectrum s = eigh(h);
  return {s.eigenvalues(0), s.eigenvalues(s.dim() - 1)};
}

// Matrix with eigenvectors of s and eigenvalues g(lambda_i).
template <class F>
Matrix spectral_apply(const Spectrum& s, F&& g) {
  RealVector w(s.dim());
  for (Eigen::Index i = 0; i < s.dim(); ++i) w(i) = g(s.eigenvalues(i));
  return s.eigenvectors * w.cast<Complex>().asDiagonal() * s.eigenvectors.adjoint();
}

// Positive semidefinite, unit trace. Construction enforces both within
// kPsdTol/kTraceTol; eigenvalues in [-kPsdTol, -kClampFloor) are clamped to
// zero. Rounding-level negatives are left alone so stored states reload
// bit for bit.
class DensityMatrix {
 public:
  DensityMatrix() : h_(HermitianMatrix::identity(1)) {}

  explicit DensityMatrix(const HermitianMatrix& h) : h_(h) {
    const Spectrum s = eigh(h);
    const double lo = s.eigenvalues(0);
    if (lo < -kPsdTol)
      throw ContractViolation("DensityMatrix: minimum eigenvalue " + std::to_string(lo) + " below -1e-9");
    const double tr = h.matrix().trace().real();
    if (std::abs(tr - 1.0) > kTraceTol)
      throw ContractViolation("DensityMatrix: trace " + std::to_string(tr) + " differs from 1");
    if (lo < -kClampFloor) {
      const Matrix clamped = spectral_apply(s, [](double x) { return std::max(x, 0.0); });
      h_ = HermitianMatrix::trusted(clamped / clamped.trace().real());
    }
  }

  explicit DensityMatrix(const Matrix& m) : DensityMatrix(HermitianMatrix(m)) {}

  static DensityMatrix maximally_mixed(Eigen::Index n) {
    return trusted(Matrix::Identity(n, n) / static_cast<double>(n));
  }

  // |v><v| / <v|v>.
  static DensityMatrix pure(const Vector& v) {
    const double nrm = v.squaredNorm();
    if (!(nrm > 0.0)) throw ContractViolation("DensityMatrix::pure: zero vector");
    return trusted(v * v.adjoint() / nrm);
  }

  static DensityMatrix basis(Eigen::Index n, Eigen::Index k) {
    Vector v = Vector::Zero(n);
    v(k) = 1.0;
    return pure(v);
  }

  // sum_i w_i |v_i><v_i| / sum w, for nonnegative weights.
  static DensityMatrix from_spectrum(const Matrix& vecs, const RealVector& weights) {
    const double total = weights.sum();
    if (!(total > 0.0)) throw NumericFailure("DensityMatrix::from_spectrum: zero total weight");
    return trusted(vecs * (weights / total).cast<Complex>().asDiagonal() * vecs.adjoint());
  }

  // For matrices that are valid by construction (mixtures of valid states).
  static DensityMatrix trusted(const Matrix& m) {
    DensityMatrix d;
    d.h_ = HermitianMatrix::trusted(m);
    return d;
  }

  Eigen::Index dim() const noexcept { return h_.dim(); }
  const HermitianMatrix& hermitian() const noexcept { return h_; }
  const Matrix& matrix() const noexcept { return h_.matrix(); }

 private:
  HermitianMatrix h_;
};

inline HermitianMatrix exp_neg(const HermitianMatrix& h) {
  return HermitianMatrix::trusted(spectral_apply(eigh(h), [](double x) { return std::exp(-x); }));
}

// exp(-H)/Tr exp(-H), shifted by the smallest eigenvalue so nothing overflows.
inline DensityMatrix gibbs_of(const Spectrum& s) {
  const double lo = s.eigenvalues(0);
  RealVector w(s.dim());
  for (Eigen::Index i = 0; i < s.dim(); ++i) w(i) = std::exp(-(s.eigenvalues(i) - lo));
  return DensityMatrix::from_spectrum(s.eigenvectors, w);
}

inline DensityMatrix gibbs_of(const HermitianMatrix& h) { return gibbs_of(eigh(h)); }

// Tr(A B) without forming the product.
inline Complex raw_trace_product(const Matrix& a, const Matrix& b) {
  return (a.cwiseProduct(b.transpose())).sum();
}

inline double trace_inner(const HermitianMatrix& a, const DensityMatrix& r) {
  detail::require_same_dim(a.dim(), r.dim(), "trace_inner");
  const Complex t = raw_trace_product(a.matrix(), r.matrix());
  if (std::abs(t.imag()) > kImagTol)
    throw NumericFailure("trace_inner: imaginary part " + std::to_string(t.imag()) + " exceeds 1e-9");
  return t.real();
}

inline double trace_distance(const DensityMatrix& r1, const DensityMatrix& r2) {
  detail::require_same_dim(r1.dim(), r2.dim(), "trace_distance");
  const Spectrum s = eigh(Matrix(r1.matrix() - r2.matrix()));
  return std::clamp(0.5 * s.eigenvalues.cwiseAbs().sum(), 0.0, 1.0);
}

inline double frobenius(const Matrix& m) { return m.norm(); }

// True when every eigenvalue lies in [lo - tol, hi + tol].
inline bool spectrum_within(const HermitianMatrix& h, double lo, double hi, double tol) {
  const auto [a, b] = spectral_range(h);
  return a >= lo - tol && b <= hi + tol;
}

}  // namespace mmwqsdp
