// Independent checks of GOOD-set certificates: recomputes every claimed inequality from
// the raw inputs using only Eigen and the oracle helpers.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "support/oracles.hpp"

namespace certcheck {

using oracle::CMat;

struct Verdict {
  bool ok = true;
  std::string why;
  double probGood = 0.0;
  void fail(const std::string& s) {
    if (ok) why = s;
    ok = false;
  }
};

/// Plain lemma: for i in GOOD, rho'_i is a state with ||rho'_i - rho_i||_1 <= 2 eps^{1/4},
/// sum_GOOD P(i) rho'_i <= (1 + eps^{1/4}) target, and P(GOOD) >= 1 - 10 eps^{1/4}.
inline Verdict check_plain(const std::vector<CMat>& parts, const std::vector<double>& P, const CMat& target, double eps,
                           const std::vector<std::size_t>& good, const std::vector<CMat>& primed, double tol = 1e-8) {
  Verdict v;
  const double r = std::pow(eps, 0.25);
  CMat sum = CMat::Zero(target.rows(), target.cols());
  for (std::size_t i : good) {
    const CMat& q = primed.at(i);
    if (oracle::min_eig(q) < -tol) v.fail("primed state " + std::to_string(i) + " is not PSD");
    if (std::abs(q.trace().real() - 1.0) > tol) v.fail("primed state " + std::to_string(i) + " is not normalized");
    if (oracle::trace_dist(q, parts[i]) > 2.0 * r + tol) v.fail("primed state " + std::to_string(i) + " is not close");
    sum += P[i] * q;
    v.probGood += P[i];
  }
  if (oracle::min_eig((1.0 + r) * target - sum) < -tol) v.fail("operator inequality violated");
  if (v.probGood < 1.0 - 10.0 * r - tol) v.fail("GOOD set too light");
  return v;
}

/// Measure-transformed lemma with sigma_i subnormalized, rho_i = sigma_i / Tr sigma_i,
/// P'(i) ~ P(i) Tr sigma_i and slack 2 eps: closeness 2 (2 eps)^{1/4},
/// sum_GOOD P(i) Tr[sigma_i] rho'_i <= S (1 + (2 eps)^{1/4}) target with S = sum P(i) Tr sigma_i.
/// probGood is measured under P'.
inline Verdict check_transformed(const std::vector<CMat>& sigmas, const std::vector<double>& P, const CMat& target,
                                 double eps, const std::vector<std::size_t>& good, const std::vector<CMat>& primed,
                                 double tol = 1e-8) {
  Verdict v;
  const double e2 = std::min(2.0 * eps, 1.999);
  const double r = std::pow(e2, 0.25);
  double S = 0.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) S += P[i] * sigmas[i].trace().real();
  CMat sum = CMat::Zero(target.rows(), target.cols());
  for (std::size_t i : good) {
    const double tr = sigmas[i].trace().real();
    const CMat& q = primed.at(i);
    if (oracle::min_eig(q) < -tol) v.fail("primed state " + std::to_string(i) + " is not PSD");
    if (std::abs(q.trace().real() - 1.0) > tol) v.fail("primed state " + std::to_string(i) + " is not normalized");
    if (oracle::trace_dist(q, sigmas[i] / tr) > 2.0 * r + tol) v.fail("primed state " + std::to_string(i) + " is not close");
    sum += P[i] * tr * q;
    v.probGood += P[i] * tr / S;
  }
  if (oracle::min_eig(S * (1.0 + r) * target - sum) < -tol) v.fail("operator inequality violated");
  if (v.probGood < 1.0 - 10.0 * std::pow(eps, 0.25) - tol) v.fail("GOOD set too light");
  return v;
}

}  // namespace certcheck
