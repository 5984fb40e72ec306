#pragma once

// Dense PSD-cone toolkit: Kronecker and block-diagonal assembly, cone-order
// tests, Schur-complement marginalization, inverse square roots and the three
// spectral performance measures.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace netsel {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the landmark block of a joint information matrix cannot be
/// inverted reliably.
class NotTriangulated : public Error {
 public:
  NotTriangulated() : Error("feature not triangulated") {}
};

/// Relative tolerance used for every PSD membership test.
inline constexpr double kPsdTolerance = 1e-8;
/// Largest admissible condition number of a block that must be inverted.
inline constexpr double kConditionLimit = 1e8;

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Mat& m, double tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol * (1.0 + std::abs(m(i, j)))) return false;
  return true;
}

/// Ascending eigenvalues of the symmetrized matrix.
inline Vec sym_eigenvalues(const Mat& m) {
  if (m.rows() == 0) return Vec{};
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error("symmetric eigensolver failed");
  return es.eigenvalues();
}

inline double lambda_min(const Mat& m) { return sym_eigenvalues(m)(0); }
inline double lambda_max(const Mat& m) {
  const Vec ev = sym_eigenvalues(m);
  return ev(ev.size() - 1);
}

/// lambda_min >= -tol * max(|lambda_max|, 0) on the symmetrized matrix.
inline bool is_psd(const Mat& m, double tol = kPsdTolerance) {
  if (m.rows() == 0) return true;
  const Vec ev = sym_eigenvalues(m);
  return ev(0) >= -tol * std::max(std::abs(ev(ev.size() - 1)), 0.0);
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat block_diag(std::span<const Mat> blocks) {
  if (blocks.empty()) throw Error("no blocks");
  Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Mat out = Mat::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

/// Cone order x <= y, i.e. y - x is PSD up to a relative tolerance.
inline bool psd_leq(const Mat& x, const Mat& y, double tol = kPsdTolerance) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw Error("psd_leq: dimension mismatch");
  if (x.rows() == 0) return true;
  const Vec ev = sym_eigenvalues(y - x);
  return ev(0) >= -tol * (1.0 + ev(ev.size() - 1));
}

/// Condition number of a symmetric matrix; +inf when it is not PD.
inline double sym_condition(const Mat& m) {
  const Vec ev = sym_eigenvalues(m);
  if (ev.size() == 0 || ev(0) <= 0.0) return std::numeric_limits<double>::infinity();
  return ev(ev.size() - 1) / ev(0);
}

/// Marginalizes the trailing block: for omega = [[A, B], [B^T, D]] returns
/// A - B D^{-1} B^T. Throws NotTriangulated when D is singular or its
/// condition number reaches `cond_limit`.
inline Mat schur_marginalize(const Mat& omega, Index split,
                             double cond_limit = kConditionLimit) {
  if (omega.rows() != omega.cols() || split < 0 || split > omega.rows())
    throw Error("schur_marginalize: bad split");
  const Index tail = omega.rows() - split;
  const Mat sym = symmetrized(omega);
  if (tail == 0) return sym;
  const Mat d = sym.bottomRightCorner(tail, tail);
  if (!(sym_condition(d) < cond_limit)) throw NotTriangulated();
  const Mat b = sym.topRightCorner(split, tail);
  Eigen::LDLT<Mat> ldlt(d);
  return symmetrized(sym.topLeftCorner(split, split) - b * ldlt.solve(b.transpose()));
}

/// Symmetric inverse square root R with R h R = I.
inline Mat inv_sqrt(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(h));
  if (es.info() != Eigen::Success) throw Error("symmetric eigensolver failed");
  const Vec& ev = es.eigenvalues();
  if (ev.size() == 0) return Mat{};
  if (!(ev(0) > 1e-10 * ev(ev.size() - 1)) || !(ev(0) > 0.0))
    throw Error("inv_sqrt: matrix is not positive definite");
  const Mat& v = es.eigenvectors();
  return v * ev.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
}

/// Inverse of an SPD matrix through a Cholesky factorization.
inline Mat spd_inverse(const Mat& h) {
  Eigen::LLT<Mat> llt(symmetrized(h));
  if (llt.info() != Eigen::Success) throw Error("matrix is not positive definite");
  return symmetrized(llt.solve(Mat::Identity(h.rows(), h.cols())));
}

struct SpectralFunctionals {
  double trace_inv = 0.0;    ///< Tr(H^{-1})
  double neg_logdet = 0.0;   ///< -log det H
  double min_eig_inv = 0.0;  ///< lambda_min(H^{-1}) = 1 / lambda_max(H)
};

inline SpectralFunctionals spectral_functionals(const Mat& h) {
  const Vec ev = sym_eigenvalues(h);
  if (ev.size() == 0 || !(ev(0) > 0.0) || !(ev(0) > 1e-14 * ev(ev.size() - 1)))
    throw Error("spectral_functionals: matrix is singular");
  SpectralFunctionals out;
  for (Index i = 0; i < ev.size(); ++i) {
    out.trace_inv += 1.0 / ev(i);
    out.neg_logdet -= std::log(ev(i));
  }
  out.min_eig_inv = 1.0 / ev(ev.size() - 1);
  return out;
}

/// The three scalar performance measures of an information matrix.
enum class Measure { Variance, Entropy, Spectral };

inline std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::Variance: return "variance";
    case Measure::Entropy: return "entropy";
    case Measure::Spectral: return "spectral";
  }
  return "?";
}

inline Measure parse_measure(std::string_view s) {
  if (s == "variance" || s == "rho_v") return Measure::Variance;
  if (s == "entropy" || s == "rho_e") return Measure::Entropy;
  if (s == "spectral" || s == "rho_lambda") return Measure::Spectral;
  throw Error("unknown performance measure: " + std::string(s));
}

/// Evaluates one measure, using a Cholesky factorization where the full
/// spectrum is not needed.
inline double measure_value(const Mat& h, Measure m) {
  if (m == Measure::Spectral) return spectral_functionals(h).min_eig_inv;
  Eigen::LLT<Mat> llt(symmetrized(h));
  if (llt.info() != Eigen::Success) throw Error("measure: matrix is singular");
  if (m == Measure::Entropy) {
    return -2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  return llt.solve(Mat::Identity(h.rows(), h.cols())).trace();
}

}  // namespace netsel
