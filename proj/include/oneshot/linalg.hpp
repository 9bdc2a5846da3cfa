// Dense complex Hermitian linear algebra used by every other component.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oneshot/error.hpp"

namespace oneshot {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;

namespace linalg {

inline Matrix identity(std::size_t d) { return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)); }

inline Matrix diag(std::span<const double> values) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = values[i];
  return m;
}

inline Matrix diag(std::initializer_list<double> values) {
  std::vector<double> v(values);
  return diag(std::span<const double>(v));
}

inline Matrix ket_bra(const Vector& a, const Vector& b) { return a * b.adjoint(); }
inline Matrix projector(const Vector& v) { return v * v.adjoint(); }

inline Vector basis(std::size_t d, std::size_t i) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(d));
  v(static_cast<Eigen::Index>(i)) = 1.0;
  return v;
}

inline bool is_square(const Matrix& m) { return m.rows() == m.cols(); }

inline bool all_finite(const Matrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) return false;
  return true;
}

inline bool is_hermitian(const Matrix& m, double tol = kHermitianTol) {
  if (!is_square(m)) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

inline Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline double real_trace(const Matrix& m) { return m.trace().real(); }

/// Kronecker product; the first factor is the most significant index.
inline Matrix tensor(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vector tensor(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline Matrix tensor_all(std::span<const Matrix> factors) {
  Matrix out = Matrix::Identity(1, 1);
  for (const auto& f : factors) out = tensor(out, f);
  return out;
}

inline Matrix tensor_power(const Matrix& a, std::size_t n) {
  Matrix out = Matrix::Identity(1, 1);
  for (std::size_t i = 0; i < n; ++i) out = tensor(out, a);
  return out;
}

/// Eigendecomposition with eigenvalues in descending order.
struct Eigh {
  RealVector values;
  Matrix vectors;
};

inline Eigh eigh(const Matrix& op) {
  if (!is_square(op)) throw InvalidArgument("eigh: matrix is not square");
  if (!is_hermitian(op)) throw InvalidArgument("eigh: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitize(op));
  if (solver.info() != Eigen::Success) throw NumericalError("eigh: eigensolver failed");
  const Eigen::Index n = op.rows();
  Eigh out{RealVector(n), Matrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = solver.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return out;
}

/// Eigenvalues only, descending. Skips the Hermiticity check; callers pass Hermitian input.
inline RealVector eigvalsh(const Matrix& op) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitize(op), Eigen::EigenvaluesOnly);
  RealVector v = solver.eigenvalues();
  return v.reverse();
}

inline double min_eigenvalue(const Matrix& op) {
  if (op.size() == 0) return 0.0;
  return eigvalsh(op).minCoeff();
}

inline double max_eigenvalue(const Matrix& op) {
  if (op.size() == 0) return 0.0;
  return eigvalsh(op).maxCoeff();
}

inline bool is_psd(const Matrix& op, double tol = kPsdTol) { return is_hermitian(op) && min_eigenvalue(op) >= -tol; }

/// Apply a real function to the spectrum of a Hermitian matrix.
template <class F>
Matrix spectral_apply(const Matrix& op, F&& f) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitize(op));
  RealVector mapped = solver.eigenvalues().unaryExpr([&](double x) { return f(x); });
  return solver.eigenvectors() * mapped.cast<cplx>().asDiagonal() * solver.eigenvectors().adjoint();
}

inline void require_psd_for_root(const Matrix& op, const char* who) {
  if (!is_hermitian(op)) throw InvalidArgument(std::string(who) + ": matrix is not Hermitian");
  if (min_eigenvalue(op) < -1e-8) throw InvalidArgument(std::string(who) + ": matrix has a negative eigenvalue below -1e-8");
}

/// Principal square root; tiny negative eigenvalues are clamped to zero.
inline Matrix matrix_sqrt(const Matrix& op) {
  require_psd_for_root(op, "matrix_sqrt");
  return spectral_apply(op, [](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

/// Support threshold used for pseudo-inverses: relative to the largest eigenvalue.
inline double support_cutoff(double largest) { return 1e-12 * std::max(1.0, std::abs(largest)); }

/// Inverse square root on the support, zero on the kernel.
inline Matrix pseudo_inverse_sqrt(const Matrix& op) {
  require_psd_for_root(op, "pseudo_inverse_sqrt");
  const double cut = support_cutoff(max_eigenvalue(op));
  return spectral_apply(op, [cut](double x) { return x > cut ? 1.0 / std::sqrt(x) : 0.0; });
}

inline Matrix pseudo_inverse_psd(const Matrix& op) {
  const double cut = support_cutoff(max_eigenvalue(op));
  return spectral_apply(op, [cut](double x) { return x > cut ? 1.0 / x : 0.0; });
}

inline Matrix support_projector(const Matrix& op) {
  const double cut = support_cutoff(max_eigenvalue(op));
  return spectral_apply(op, [cut](double x) { return x > cut ? 1.0 : 0.0; });
}

/// Projection onto the PSD cone in Frobenius norm.
inline Matrix psd_part(const Matrix& op) {
  return spectral_apply(op, [](double x) { return x > 0.0 ? x : 0.0; });
}

inline double trace_norm(const Matrix& op) {
  if (op.size() == 0) return 0.0;
  return eigvalsh(op).cwiseAbs().sum();
}

inline double trace_norm_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument("trace_norm_distance: dimension mismatch");
  return trace_norm(a - b);
}

/// Schatten-1 norm of a general (non-Hermitian) matrix.
inline double nuclear_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

/// Root fidelity ||sqrt(a) sqrt(b)||_1 of two PSD operators.
inline double fidelity(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument("fidelity: dimension mismatch");
  const Matrix sa = matrix_sqrt(a);
  const RealVector ev = eigvalsh(sa * b * sa);
  double f = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) f += ev(i) > 0.0 ? std::sqrt(ev(i)) : 0.0;
  return std::clamp(f, 0.0, 1.0);
}

inline double purified_distance(const Matrix& a, const Matrix& b) {
  const double f = fidelity(a, b);
  return std::sqrt(std::max(0.0, 1.0 - f * f));
}

// ---------------------------------------------------------------------------
// Multipartite bookkeeping

/// Ordered tensor factors with labels.
class SystemLayout {
 public:
  struct Factor {
    std::string label;
    std::size_t dim;
  };

  SystemLayout() = default;
  SystemLayout(std::initializer_list<Factor> factors) : factors_(factors) { validate(); }
  explicit SystemLayout(std::vector<Factor> factors) : factors_(std::move(factors)) { validate(); }

  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }
  std::size_t total_dim() const {
    std::size_t d = 1;
    for (const auto& f : factors_) d *= f.dim;
    return d;
  }
  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> out;
    for (const auto& f : factors_) out.push_back(f.dim);
    return out;
  }
  std::size_t index_of(const std::string& label) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].label == label) return i;
    throw InvalidArgument("SystemLayout: unknown label '" + label + "'");
  }
  std::size_t dim_of(const std::string& label) const { return factors_[index_of(label)].dim; }
  bool has(const std::string& label) const {
    return std::any_of(factors_.begin(), factors_.end(), [&](const Factor& f) { return f.label == label; });
  }
  SystemLayout restricted(const std::vector<std::string>& keep) const {
    std::vector<Factor> out;
    for (const auto& f : factors_)
      if (std::find(keep.begin(), keep.end(), f.label) != keep.end()) out.push_back(f);
    return SystemLayout(std::move(out));
  }

 private:
  void validate() const {
    std::set<std::string> seen;
    for (const auto& f : factors_) {
      if (f.dim == 0) throw InvalidArgument("SystemLayout: zero dimension for '" + f.label + "'");
      if (!seen.insert(f.label).second) throw InvalidArgument("SystemLayout: duplicate label '" + f.label + "'");
    }
  }
  std::vector<Factor> factors_;
};

/// Partial trace keeping the factors flagged in `keep` (in their original order).
inline Matrix partial_trace(const Matrix& op, const std::vector<std::size_t>& dims, const std::vector<bool>& keep) {
  std::size_t total = 1;
  for (auto d : dims) total *= d;
  if (static_cast<std::size_t>(op.rows()) != total || !is_square(op))
    throw InvalidArgument("partial_trace: operator dimension does not match layout");
  const std::size_t n = dims.size();
  std::size_t dk = 1;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) dk *= dims[i];
  const std::size_t dt = total / dk;

  // strides of each factor in the full index
  std::vector<std::size_t> stride(n);
  {
    std::size_t s = 1;
    for (std::size_t i = n; i-- > 0;) {
      stride[i] = s;
      s *= dims[i];
    }
  }
  // map (kept multi-index, traced multi-index) -> full index
  auto full_index = [&](std::size_t kept, std::size_t traced) {
    std::size_t idx = 0;
    for (std::size_t i = n; i-- > 0;) {
      if (keep[i]) {
        idx += (kept % dims[i]) * stride[i];
        kept /= dims[i];
      } else {
        idx += (traced % dims[i]) * stride[i];
        traced /= dims[i];
      }
    }
    return idx;
  };
  std::vector<std::size_t> table(dk * dt);
  for (std::size_t k = 0; k < dk; ++k)
    for (std::size_t t = 0; t < dt; ++t) table[k * dt + t] = full_index(k, t);

  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
  for (std::size_t a = 0; a < dk; ++a)
    for (std::size_t b = 0; b < dk; ++b) {
      cplx s = 0.0;
      for (std::size_t t = 0; t < dt; ++t)
        s += op(static_cast<Eigen::Index>(table[a * dt + t]), static_cast<Eigen::Index>(table[b * dt + t]));
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = s;
    }
  return out;
}

inline Matrix partial_trace(const Matrix& op, const SystemLayout& layout, const std::vector<std::string>& keep) {
  std::vector<bool> mask(layout.size(), false);
  for (const auto& label : keep) mask[layout.index_of(label)] = true;
  return partial_trace(op, layout.dims(), mask);
}

/// Reorder tensor factors: output factor i is input factor perm[i].
inline Matrix permute_subsystems(const Matrix& op, const std::vector<std::size_t>& dims, const std::vector<std::size_t>& perm) {
  const std::size_t n = dims.size();
  std::size_t total = 1;
  for (auto d : dims) total *= d;
  if (static_cast<std::size_t>(op.rows()) != total) throw InvalidArgument("permute_subsystems: dimension mismatch");
  std::vector<std::size_t> in_stride(n), out_dims(n), out_stride(n);
  {
    std::size_t s = 1;
    for (std::size_t i = n; i-- > 0;) {
      in_stride[i] = s;
      s *= dims[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) out_dims[i] = dims[perm[i]];
  std::vector<std::size_t> map(total);
  for (std::size_t o = 0; o < total; ++o) {
    std::size_t rem = o, idx = 0;
    for (std::size_t i = n; i-- > 0;) {
      idx += (rem % out_dims[i]) * in_stride[perm[i]];
      rem /= out_dims[i];
    }
    map[o] = idx;
  }
  Matrix out(op.rows(), op.cols());
  for (std::size_t a = 0; a < total; ++a)
    for (std::size_t b = 0; b < total; ++b)
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          op(static_cast<Eigen::Index>(map[a]), static_cast<Eigen::Index>(map[b]));
  return out;
}

// ---------------------------------------------------------------------------
// Purifications

/// Purification on system (x) mirror: amplitude sqrt(rho)_{ij} on |i>|j>.
inline Vector purify(const Matrix& rho) {
  const Matrix s = matrix_sqrt(rho);
  const Eigen::Index d = rho.rows();
  Vector psi(d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) psi(i * d + j) = s(i, j);
  return psi;
}

/// View a vector on S (x) E as the dS x dE coefficient matrix.
inline Matrix as_coefficients(const Vector& psi, std::size_t dim_system) {
  const auto ds = static_cast<Eigen::Index>(dim_system);
  if (ds == 0 || psi.size() % ds != 0) throw InvalidArgument("as_coefficients: vector length not divisible by system dimension");
  const Eigen::Index de = psi.size() / ds;
  Matrix m(ds, de);
  for (Eigen::Index i = 0; i < ds; ++i)
    for (Eigen::Index j = 0; j < de; ++j) m(i, j) = psi(i * de + j);
  return m;
}

inline Vector from_coefficients(const Matrix& m) {
  Vector v(m.rows() * m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

/// Reduced state on the first (system) factor of a pure state.
inline Matrix reduced_system_state(const Vector& psi, std::size_t dim_system) {
  const Matrix c = as_coefficients(psi, dim_system);
  return c * c.adjoint();
}

/// Purification of `target` on the same S (x) E space maximising the overlap with `psi`.
/// The overlap <phi|psi> is real and nonnegative and equals the fidelity of the reduced states.
inline Vector uhlmann_partner(const Vector& psi, std::size_t dim_system, const Matrix& target) {
  const Matrix coeff = as_coefficients(psi, dim_system);
  if (target.rows() != coeff.rows()) throw InvalidArgument("uhlmann_partner: target dimension does not match system");
  Eigh eg = eigh(target);
  const double cut = support_cutoff(eg.values.size() ? eg.values(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < eg.values.size() && eg.values(rank) > cut) ++rank;
  if (rank > coeff.cols()) throw InvalidArgument("uhlmann_partner: purifying dimension smaller than target rank");
  if (rank == 0) throw InvalidArgument("uhlmann_partner: target is zero");
  const Matrix w = eg.vectors.leftCols(rank);
  RealVector d(rank);
  for (Eigen::Index i = 0; i < rank; ++i) d(i) = std::sqrt(std::max(0.0, eg.values(i)));
  const Matrix reduced = d.cast<cplx>().asDiagonal() * (w.adjoint() * coeff);  // rank x dE
  Eigen::JacobiSVD<Matrix> svd(reduced, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix u = svd.matrixU();                      // rank x rank
  const Matrix v = svd.matrixV().leftCols(rank);       // dE x rank
  const Matrix phi = w * d.cast<cplx>().asDiagonal() * u * v.adjoint();
  return from_coefficients(phi);
}

}  // namespace linalg
}  // namespace oneshot
