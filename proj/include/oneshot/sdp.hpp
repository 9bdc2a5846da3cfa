// Small dense SDP feasibility engine: Douglas-Rachford splitting between an affine
// subspace and a product of PSD cones.
#pragma once

#include <Eigen/Cholesky>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "oneshot/error.hpp"
#include "oneshot/linalg.hpp"

namespace oneshot::sdp {

// Real coordinates of a Hermitian matrix: diagonal, then sqrt(2)*Re and sqrt(2)*Im of
// the strict upper triangle, row by row. The map is an isometry for the Frobenius norm.
inline Eigen::Index herm_size(Eigen::Index d) { return d * d; }

inline void herm_to_vec(const Matrix& m, double* out) {
  const Eigen::Index d = m.rows();
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) out[k++] = m(i, i).real();
  const double r2 = std::sqrt(2.0);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const cplx v = 0.5 * (m(i, j) + std::conj(m(j, i)));
      out[k++] = r2 * v.real();
      out[k++] = r2 * v.imag();
    }
}

inline Matrix vec_to_herm(const double* in, Eigen::Index d) {
  Matrix m(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) m(i, i) = in[k++];
  const double s = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const cplx v(s * in[k], s * in[k + 1]);
      k += 2;
      m(i, j) = v;
      m(j, i) = std::conj(v);
    }
  return m;
}

struct Variable {
  std::string label;
  Eigen::Index dim = 0;
  bool complex = false;  // general square matrix instead of Hermitian
  Eigen::Index params() const { return complex ? 2 * dim * dim : dim * dim; }
};

/// Real-linear map from one variable to a Hermitian matrix.
struct LinearTerm {
  std::size_t var;
  std::function<Matrix(const Matrix&)> map;
};

/// constant + sum of linear terms; must be Hermitian-valued.
struct AffineMatrix {
  Matrix constant;
  std::vector<LinearTerm> terms;
};

struct LinearFunctional {
  std::size_t var;
  std::function<double(const Matrix&)> map;
};

/// constant + sum of real linear functionals.
struct AffineScalar {
  double constant = 0.0;
  std::vector<LinearFunctional> terms;
};

struct Problem {
  std::vector<Variable> variables;
  std::vector<AffineMatrix> psd;         // each must be PSD
  std::vector<AffineScalar> equalities;  // each must vanish
  std::optional<AffineScalar> objective;  // minimized

  std::size_t add_variable(std::string label, Eigen::Index dim, bool complex = false) {
    variables.push_back(Variable{std::move(label), dim, complex});
    return variables.size() - 1;
  }
};

struct Config {
  int maxIterations = 50000;
  double tol = 1e-7;               // feasibility: min eigenvalue >= -tol, equalities within tol
  int stagnationWindow = 500;      // iterations without relative progress => infeasible
  double stagnationImprovement = 1e-4;
  double relaxation = 1.5;
  int checkEvery = 10;
  double objectiveLower = 0.0;     // bracket for objective bisection
  double objectiveTol = 1e-6;
  std::stop_token stop;
};

enum class Status { feasible, infeasible, maxIterations };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::feasible: return "feasible";
    case Status::infeasible: return "infeasible";
    case Status::maxIterations: return "maxIterations";
  }
  return "?";
}

struct Result {
  Status status = Status::maxIterations;
  std::map<std::string, Matrix> assignment;
  double primalResidual = std::numeric_limits<double>::infinity();  // distance between affine and cone iterates
  double dualResidual = std::numeric_limits<double>::infinity();    // most negative eigenvalue / equality violation
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  Eigen::VectorXd state;  // splitting iterate, usable as a warm start
};

namespace detail {

inline Matrix variable_basis(const Variable& v, Eigen::Index k) {
  const Eigen::Index d = v.dim;
  Matrix b = Matrix::Zero(d, d);
  if (v.complex) {
    const Eigen::Index e = k / 2;
    b(e / d, e % d) = (k % 2 == 0) ? cplx(1.0, 0.0) : cplx(0.0, 1.0);
    return b;
  }
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(d * d);
  unit(k) = 1.0;
  return vec_to_herm(unit.data(), d);
}

inline Matrix variable_value(const Variable& v, const double* x) {
  if (!v.complex) return vec_to_herm(x, v.dim);
  Matrix m(v.dim, v.dim);
  for (Eigen::Index e = 0; e < v.dim * v.dim; ++e) m(e / v.dim, e % v.dim) = cplx(x[2 * e], x[2 * e + 1]);
  return m;
}

}  // namespace detail

/// Dense compiled form of a Problem. Constants of the PSD expressions may be replaced
/// without refactoring.
class Compiled {
 public:
  explicit Compiled(const Problem& p) : problem_(p) {
    offsets_.push_back(0);
    for (const auto& v : p.variables) offsets_.push_back(offsets_.back() + v.params());
    n_ = offsets_.back();
    rowOffsets_.push_back(0);
    for (const auto& e : p.psd) {
      const Eigen::Index d = e.constant.rows();
      if (e.constant.cols() != d) throw InvalidArgument("sdp: PSD expression is not square");
      dims_.push_back(d);
      rowOffsets_.push_back(rowOffsets_.back() + herm_size(d));
    }
    m_ = rowOffsets_.back();
    A_ = Eigen::MatrixXd::Zero(m_, n_);
    c_ = Eigen::VectorXd::Zero(m_);
    E_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.equalities.size()), n_);
    f_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.equalities.size()));

    for (std::size_t j = 0; j < p.psd.size(); ++j) {
      const auto& e = p.psd[j];
      herm_to_vec(e.constant, c_.data() + rowOffsets_[j]);
      for (const auto& t : e.terms) {
        const auto& v = p.variables.at(t.var);
        for (Eigen::Index k = 0; k < v.params(); ++k) {
          const Matrix img = t.map(detail::variable_basis(v, k));
          if (img.rows() != dims_[j] || img.cols() != dims_[j]) throw InvalidArgument("sdp: term dimension mismatch");
          Eigen::VectorXd col(herm_size(dims_[j]));
          herm_to_vec(img, col.data());
          A_.block(rowOffsets_[j], offsets_[t.var] + k, col.size(), 1) += col;
        }
      }
    }
    for (std::size_t i = 0; i < p.equalities.size(); ++i) {
      const auto& e = p.equalities[i];
      f_(static_cast<Eigen::Index>(i)) = -e.constant;
      for (const auto& t : e.terms) {
        const auto& v = p.variables.at(t.var);
        for (Eigen::Index k = 0; k < v.params(); ++k)
          E_(static_cast<Eigen::Index>(i), offsets_[t.var] + k) += t.map(detail::variable_basis(v, k));
      }
    }
    factor();
  }

  Eigen::Index num_params() const { return n_; }
  Eigen::Index num_rows() const { return m_; }
  const Problem& problem() const { return problem_; }

  void set_constant(std::size_t j, const Matrix& c) {
    if (c.rows() != dims_[j]) throw InvalidArgument("sdp: constant dimension mismatch");
    herm_to_vec(c, c_.data() + rowOffsets_[j]);
  }

  /// Value of the j-th PSD expression at x.
  Matrix expression(std::size_t j, const Eigen::VectorXd& x) const {
    Eigen::VectorXd s = A_.middleRows(rowOffsets_[j], herm_size(dims_[j])) * x + c_.segment(rowOffsets_[j], herm_size(dims_[j]));
    return vec_to_herm(s.data(), dims_[j]);
  }

  /// Independent re-check: most negative eigenvalue over PSD expressions and largest equality violation.
  std::pair<double, double> violation(const Eigen::VectorXd& x) const {
    double eig = 0.0;
    for (std::size_t j = 0; j < dims_.size(); ++j) eig = std::max(eig, -linalg::min_eigenvalue(expression(j, x)));
    double eq = E_.rows() ? (E_ * x - f_).cwiseAbs().maxCoeff() : 0.0;
    return {eig, eq};
  }

  std::map<std::string, Matrix> assignment(const Eigen::VectorXd& x) const {
    std::map<std::string, Matrix> out;
    for (std::size_t i = 0; i < problem_.variables.size(); ++i)
      out[problem_.variables[i].label] = detail::variable_value(problem_.variables[i], x.data() + offsets_[i]);
    return out;
  }

  Result solve(const Config& cfg, const Eigen::VectorXd* warm = nullptr) const {
    const Eigen::Index N = n_ + m_;
    Eigen::VectorXd z = (warm && warm->size() == N) ? *warm : Eigen::VectorXd::Zero(N);
    Eigen::VectorXd y(N), w(N), x(n_);
    Result res;
    double best = std::numeric_limits<double>::infinity();
    double bestAtWindowStart = best;
    int windowStart = 0;

    for (int it = 1; it <= cfg.maxIterations; ++it) {
      if (cfg.stop.stop_requested()) throw Cancelled();
      project_cone(z, y);
      project_affine(2.0 * y - z, w, x);
      const double r = (w - y).norm();
      z += cfg.relaxation * (w - y);
      res.iterations = it;
      res.primalResidual = r;
      if (!std::isfinite(r)) throw NumericalError("sdp: iterate diverged");
      best = std::min(best, r);

      if (it % cfg.checkEvery == 0 || r <= cfg.tol) {
        double worst = 0.0;
        for (std::size_t j = 0; j < dims_.size() && worst <= cfg.tol; ++j) {
          const Eigen::Index d = dims_[j];
          worst = std::max(worst, -linalg::min_eigenvalue(vec_to_herm(w.data() + n_ + rowOffsets_[j], d)));
        }
        res.dualResidual = worst;
        if (worst <= cfg.tol) {
          const auto [eig, eq] = violation(x);
          if (eig <= cfg.tol && eq <= cfg.tol) {
            res.status = Status::feasible;
            res.dualResidual = std::max(eig, eq);
            res.assignment = assignment(x);
            res.state = z;
            return res;
          }
        }
      }
      if (it - windowStart >= cfg.stagnationWindow) {
        if (bestAtWindowStart - best < cfg.stagnationImprovement * best && best > 10.0 * cfg.tol) {
          res.status = Status::infeasible;
          res.state = z;
          return res;
        }
        bestAtWindowStart = best;
        windowStart = it;
      }
    }
    res.status = Status::maxIterations;
    res.state = z;
    return res;
  }

 private:
  void factor() {
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n_, n_) + A_.transpose() * A_;
    llt_.compute(H);
    if (llt_.info() != Eigen::Success) throw NumericalError("sdp: normal matrix factorization failed");
    if (E_.rows()) {
      HinvEt_ = llt_.solve(E_.transpose());
      Eigen::MatrixXd S = E_ * HinvEt_;
      schur_.compute(S);
    }
  }

  void project_cone(const Eigen::VectorXd& z, Eigen::VectorXd& y) const {
    y = z;
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      const Eigen::Index d = dims_[j];
      double* s = y.data() + n_ + rowOffsets_[j];
      if (d == 1) {
        s[0] = std::max(0.0, s[0]);
        continue;
      }
      const Matrix clipped = linalg::psd_part(vec_to_herm(s, d));
      herm_to_vec(clipped, s);
    }
  }

  // argmin ||x - x0||^2 + ||s - s0||^2 subject to s = A x + c, E x = f
  void project_affine(const Eigen::VectorXd& u, Eigen::VectorXd& w, Eigen::VectorXd& x) const {
    Eigen::VectorXd rhs = u.head(n_) + A_.transpose() * (u.tail(m_) - c_);
    x = llt_.solve(rhs);
    if (E_.rows()) {
      const Eigen::VectorXd mu = schur_.solve(E_ * x - f_);
      x -= HinvEt_ * mu;
    }
    w.head(n_) = x;
    w.tail(m_) = A_ * x + c_;
  }

  Problem problem_;
  std::vector<Eigen::Index> offsets_, rowOffsets_, dims_;
  Eigen::Index n_ = 0, m_ = 0;
  Eigen::MatrixXd A_, E_, HinvEt_;
  Eigen::VectorXd c_, f_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::LDLT<Eigen::MatrixXd> schur_;
};

/// Feasibility, or minimisation of the objective by bisection on an added bound.
inline Result solve(const Problem& problem, const Config& cfg = {}) {
  Compiled base(problem);
  Result feas = base.solve(cfg);
  if (feas.status != Status::feasible || !problem.objective) return feas;

  const auto& obj = *problem.objective;
  auto evaluate = [&](const std::map<std::string, Matrix>& a) {
    double v = obj.constant;
    for (const auto& t : obj.terms) v += t.map(a.at(problem.variables[t.var].label));
    return v;
  };
  double hi = evaluate(feas.assignment);
  feas.objective = hi;
  double lo = cfg.objectiveLower;
  if (lo >= hi) return feas;

  // bound: t - objective >= 0 as a 1x1 PSD expression
  Problem bounded = problem;
  bounded.objective.reset();
  AffineMatrix cut;
  cut.constant = Matrix::Constant(1, 1, hi - obj.constant);
  for (const auto& t : obj.terms) {
    auto f = t.map;
    cut.terms.push_back(LinearTerm{t.var, [f](const Matrix& m) { return Matrix::Constant(1, 1, -f(m)); }});
  }
  bounded.psd.push_back(cut);
  Compiled comp(bounded);
  const std::size_t cutIndex = bounded.psd.size() - 1;
  Result best = feas;
  Eigen::VectorXd warm;
  while (hi - lo > cfg.objectiveTol) {
    const double mid = 0.5 * (lo + hi);
    comp.set_constant(cutIndex, Matrix::Constant(1, 1, mid - obj.constant));
    Result r = comp.solve(cfg, warm.size() ? &warm : nullptr);
    warm = r.state;
    if (r.status == Status::feasible) {
      hi = mid;
      best = r;
      best.objective = evaluate(r.assignment);
    } else {
      lo = mid;
    }
  }
  return best;
}

}  // namespace oneshot::sdp
