// Random inputs shared by the unit and acceptance tests.
#pragma once

#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include "oneshot/quantum.hpp"

namespace fixtures {

using oneshot::Matrix;
using oneshot::Vector;
using Rng = std::mt19937_64;

inline std::vector<double> random_probs(Rng& g, std::size_t n, double floor = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) s += (v = e(g) + floor);
  for (auto& v : p) v /= s;
  return p;
}

inline Matrix ginibre(Rng& g, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = {n(g), n(g)};
  return m;
}

/// Full-rank by default; rank r mixed state otherwise.
inline Matrix random_state(Rng& g, std::size_t d, std::size_t rank = 0) {
  const Matrix G = ginibre(g, d, rank ? rank : d);
  Matrix r = G * G.adjoint();
  return r / r.trace().real();
}

inline Vector random_pure(Rng& g, std::size_t d) {
  Vector v = ginibre(g, d, 1).col(0);
  return v / v.norm();
}

inline Matrix diag(const std::vector<double>& p) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = p[i];
  return m;
}

/// n-outcome POVM on dimension d: E_i = S^{-1/2} G_i S^{-1/2}, S = sum G_i.
inline std::vector<Matrix> random_povm(Rng& g, std::size_t d, std::size_t n) {
  std::vector<Matrix> G;
  Matrix S = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix a = ginibre(g, d, 1);
    G.push_back(a * a.adjoint());
    S += G.back();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Matrix inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().cast<std::complex<double>>().asDiagonal() *
                     es.eigenvectors().adjoint();
  for (auto& e : G) e = 0.5 * (inv * e * inv + (inv * e * inv).adjoint());
  return G;
}

inline std::vector<std::string> symbols(std::size_t n) {
  std::vector<std::string> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(std::to_string(i));
  return s;
}

inline oneshot::JointPOVM random_joint_povm(Rng& g, std::size_t d, std::size_t nx, std::size_t ny) {
  return oneshot::JointPOVM(symbols(nx), symbols(ny), random_povm(g, d, nx * ny));
}

/// sum_x p(x) |x><x| (x) rho_x with rho_x random states of dimension d.
inline oneshot::CQState random_cq(Rng& g, std::size_t nx, std::size_t d, std::size_t rank = 0) {
  oneshot::CQState cq({"X"}, {symbols(nx)}, oneshot::linalg::SystemLayout{{"B", d}});
  const auto p = random_probs(g, nx, 0.05);
  for (std::size_t x = 0; x < nx; ++x) cq.add({x}, p[x] * random_state(g, d, rank));
  return cq;
}

/// Directory holding the bundled instance files.
inline std::string instances_dir() {
  if (const char* e = std::getenv("ONESHOT_INSTANCES")) return e;
  return ONESHOT_SOURCE_DIR "/instances";
}

inline std::string instance(const std::string& name) { return instances_dir() + "/" + name + ".json"; }

}  // namespace fixtures
