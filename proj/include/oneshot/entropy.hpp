// One-shot and von Neumann entropic quantities. All logarithms are base 2.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "oneshot/error.hpp"
#include "oneshot/linalg.hpp"
#include "oneshot/quantum.hpp"
#include "oneshot/sdp.hpp"

namespace oneshot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void check_eps(double eps) {
  if (!(eps >= 0.0) || !(eps < 1.0)) throw InvalidArgument("smoothing parameter must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Smooth max entropy of a distribution

struct HmaxSolution {
  double value = 0.0;
  std::vector<double> lambda;   // per alphabet symbol
  Distribution subdistribution;  // P restricted to the kept symbols
};

/// Optimal lambda of the smooth max entropy program for a bare probability vector:
/// symbols are dropped from the least likely upwards (later indices first on ties)
/// while the dropped mass stays within eps; the next one gets the fractional weight.
inline std::vector<double> h_max_lambda(const std::vector<double>& probs, double eps) {
  check_eps(eps);
  const std::size_t n = probs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<double> lambda(n, 1.0);
  double dropped = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t i = order[k];
    const double pi = probs[i];
    if (pi == 0.0) {
      lambda[i] = 0.0;
      continue;
    }
    if (dropped + pi <= eps) {
      dropped += pi;
      lambda[i] = 0.0;
      continue;
    }
    lambda[i] = 1.0 - (eps - dropped) / pi;  // boundary symbol
    break;
  }
  return lambda;
}

inline HmaxSolution h_max_smooth(const Distribution& p, double eps) {
  check_eps(eps);
  p.validate();
  HmaxSolution out;
  out.lambda = h_max_lambda(p.probs, eps);
  std::vector<double> sub = p.probs;
  for (std::size_t i = 0; i < sub.size(); ++i)
    if (out.lambda[i] == 0.0) sub[i] = 0.0;
  out.value = std::log2(std::accumulate(out.lambda.begin(), out.lambda.end(), 0.0));
  out.subdistribution = Distribution(p.alphabet, std::move(sub));
  return out;
}

// ---------------------------------------------------------------------------
// Hypothesis testing relative entropy (Neyman-Pearson minimisation)

/// Block-diagonal test operator with its type-I success and type-II error.
struct NPTest {
  std::vector<Matrix> blocks;
  double achievedAlpha = 0.0;
  double achievedBeta = 0.0;
  Matrix dense() const {
    Eigen::Index d = 0;
    for (const auto& b : blocks) d += b.rows();
    Matrix out = Matrix::Zero(d, d);
    Eigen::Index o = 0;
    for (const auto& b : blocks) {
      out.block(o, o, b.rows(), b.cols()) = b;
      o += b.rows();
    }
    return out;
  }
};

struct HypothesisResult {
  double value = 0.0;
  NPTest test;
};

namespace detail {

inline double scale_of(const std::vector<Matrix>& blocks) {
  double s = 0.0;
  for (const auto& b : blocks)
    if (b.size()) s = std::max(s, b.cwiseAbs().maxCoeff());
  return s;
}

struct Tested {
  std::vector<Matrix> proj;
  double alpha = 0.0, beta = 0.0;
};

inline Tested positive_part_test(const std::vector<Matrix>& rho, const std::vector<Matrix>& sigma, double t, double cut) {
  Tested out;
  for (std::size_t s = 0; s < rho.size(); ++s) {
    Matrix p = linalg::spectral_apply(rho[s] - t * sigma[s], [cut](double x) { return x > cut ? 1.0 : 0.0; });
    out.alpha += (p * rho[s]).trace().real();
    out.beta += (p * sigma[s]).trace().real();
    out.proj.push_back(std::move(p));
  }
  return out;
}

}  // namespace detail

/// min Tr[P sigma] over 0 <= P <= I with Tr[P rho] >= 1 - eps, blockwise.
inline HypothesisResult d_hyp_blocks(const std::vector<Matrix>& rho, const std::vector<Matrix>& sigma, double eps) {
  check_eps(eps);
  if (rho.size() != sigma.size()) throw InvalidArgument("d_hyp: block count mismatch");
  for (std::size_t s = 0; s < rho.size(); ++s)
    if (rho[s].rows() != sigma[s].rows()) throw InvalidArgument("d_hyp: dimension mismatch");
  const double target = 1.0 - eps;
  const double sigmaScale = std::max(detail::scale_of(sigma), 1e-300);
  const double sigmaCut = linalg::support_cutoff(sigmaScale);

  // tests supported on ker(sigma) cost nothing
  {
    NPTest ker;
    double a = 0.0;
    for (std::size_t s = 0; s < rho.size(); ++s) {
      Matrix k = linalg::spectral_apply(sigma[s], [sigmaCut](double x) { return x > sigmaCut ? 0.0 : 1.0; });
      a += (k * rho[s]).trace().real();
      ker.blocks.push_back(std::move(k));
    }
    if (a >= target - 1e-12) {
      ker.achievedAlpha = a;
      ker.achievedBeta = 0.0;
      return {kInf, ker};
    }
  }

  const double cut = 1e-14 * std::max({detail::scale_of(rho), sigmaScale, 1e-300});
  if (eps == 0.0) {
    detail::Tested sup = detail::positive_part_test(rho, sigma, 0.0, cut);
    NPTest t{sup.proj, sup.alpha, sup.beta};
    return {-std::log2(sup.beta), t};
  }

  double tlo = 0.0, thi = 1.0;
  detail::Tested hiTest = detail::positive_part_test(rho, sigma, 0.0, cut);  // alpha >= target
  detail::Tested loTest = detail::positive_part_test(rho, sigma, thi, cut);
  while (loTest.alpha >= target) {
    tlo = thi;
    hiTest = std::move(loTest);
    thi *= 2.0;
    if (thi > 1e300) throw NumericalError("d_hyp: threshold search did not terminate");
    loTest = detail::positive_part_test(rho, sigma, thi, cut);
  }
  for (int it = 0; it < 400 && thi - tlo > 1e-13 * thi; ++it) {
    const double mid = tlo == 0.0 ? 0.5 * thi : std::sqrt(tlo * thi);
    detail::Tested m = detail::positive_part_test(rho, sigma, mid, cut);
    if (m.alpha >= target) {
      tlo = mid;
      hiTest = std::move(m);
    } else {
      thi = mid;
      loTest = std::move(m);
    }
  }
  // mix the two tests so that the type-I constraint is met with equality
  const double gap = hiTest.alpha - loTest.alpha;
  const double w = gap > 0.0 ? std::clamp((target - loTest.alpha) / gap, 0.0, 1.0) : 1.0;
  NPTest test;
  for (std::size_t s = 0; s < rho.size(); ++s) test.blocks.push_back(w * hiTest.proj[s] + (1.0 - w) * loTest.proj[s]);
  test.achievedAlpha = w * hiTest.alpha + (1.0 - w) * loTest.alpha;
  test.achievedBeta = w * hiTest.beta + (1.0 - w) * loTest.beta;
  return {test.achievedBeta > 0.0 ? -std::log2(test.achievedBeta) : kInf, test};
}

inline HypothesisResult d_hyp(const Matrix& rho, const Matrix& sigma, double eps) {
  if (rho.rows() != sigma.rows() || !linalg::is_square(rho) || !linalg::is_square(sigma))
    throw InvalidArgument("d_hyp: dimension mismatch");
  return d_hyp_blocks({rho}, {sigma}, eps);
}

// ---------------------------------------------------------------------------
// Bipartite bookkeeping

/// Reorders a state on `layout` so the `first` factors come first (in layout order).
struct Bipartition {
  std::vector<std::size_t> perm;
  std::size_t dimA = 1, dimB = 1;
};

inline Bipartition bipartition(const linalg::SystemLayout& layout, const std::vector<std::string>& first) {
  Bipartition b;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& f = layout.factors()[i];
    if (std::find(first.begin(), first.end(), f.label) != first.end()) {
      b.perm.push_back(i);
      b.dimA *= f.dim;
    } else {
      rest.push_back(i);
      b.dimB *= f.dim;
    }
  }
  for (const auto& l : first) layout.index_of(l);  // unknown labels are an error
  b.perm.insert(b.perm.end(), rest.begin(), rest.end());
  return b;
}

/// rho in (first, rest) order together with the product of its two marginals.
inline std::pair<Matrix, Matrix> state_and_product(const Matrix& rho, const linalg::SystemLayout& layout,
                                                   const std::vector<std::string>& first) {
  const Bipartition b = bipartition(layout, first);
  const Matrix r = linalg::permute_subsystems(rho, layout.dims(), b.perm);
  const std::vector<std::size_t> dims{b.dimA, b.dimB};
  const Matrix ra = linalg::partial_trace(r, dims, {true, false});
  const Matrix rb = linalg::partial_trace(r, dims, {false, true});
  return {r, linalg::tensor(ra, rb)};
}

/// Blocks of rho and of rho^A (x) rho^B for a cq state whose classical registers `first`
/// form the A side; the remaining registers and the quantum part form the B side.
/// Blocks follow the entries of `cq`.
inline std::pair<std::vector<Matrix>, std::vector<Matrix>> cq_blocks_and_product(const CQState& cq,
                                                                                  const std::vector<std::string>& first) {
  std::vector<std::size_t> apos;
  for (const auto& a : first) apos.push_back(cq.axis_index(a));
  auto akey = [&](const CQState::Entry& e) {
    std::vector<std::size_t> k;
    for (auto p : apos) k.push_back(e.index[p]);
    return k;
  };
  auto bkey = [&](const CQState::Entry& e) {
    std::vector<std::size_t> k;
    for (std::size_t i = 0; i < e.index.size(); ++i)
      if (std::find(apos.begin(), apos.end(), i) == apos.end()) k.push_back(e.index[i]);
    return k;
  };
  std::map<std::vector<std::size_t>, double> pA;
  std::map<std::vector<std::size_t>, Matrix> mB;
  for (const auto& e : cq.entries()) {
    pA[akey(e)] += e.weight();
    auto [it, inserted] = mB.try_emplace(bkey(e), e.op);
    if (!inserted) it->second += e.op;
  }
  std::vector<Matrix> rho, sigma;
  for (const auto& e : cq.entries()) {
    rho.push_back(e.op);
    sigma.push_back(pA[akey(e)] * mB[bkey(e)]);
  }
  return {rho, sigma};
}

// ---------------------------------------------------------------------------
// Hypothesis testing mutual information

inline HypothesisResult i_hyp(const Matrix& rho, const linalg::SystemLayout& layout, const std::vector<std::string>& first,
                              double eps) {
  const auto [r, prod] = state_and_product(rho, layout, first);
  return d_hyp(r, prod, eps);
}

/// Block-diagonal optimiser: test.blocks[i] is the component for cq.entries()[i].
inline HypothesisResult i_hyp(const CQState& cq, const std::vector<std::string>& first, double eps) {
  const auto [rho, sigma] = cq_blocks_and_product(cq, first);
  return d_hyp_blocks(rho, sigma, eps);
}

// ---------------------------------------------------------------------------
// Max relative entropy

inline double d_max_blocks(const std::vector<Matrix>& rho, const std::vector<Matrix>& sigma) {
  if (rho.size() != sigma.size()) throw InvalidArgument("d_max: block count mismatch");
  const double cut = linalg::support_cutoff(detail::scale_of(sigma));
  double best = 0.0;
  bool any = false;
  for (std::size_t s = 0; s < rho.size(); ++s) {
    if (rho[s].rows() != sigma[s].rows()) throw InvalidArgument("d_max: dimension mismatch");
    if (rho[s].cwiseAbs().maxCoeff() == 0.0) continue;
    const Matrix ker = linalg::spectral_apply(sigma[s], [cut](double x) { return x > cut ? 0.0 : 1.0; });
    if ((ker * rho[s]).trace().real() > 1e-10 * std::max(1.0, rho[s].trace().real())) return kInf;
    const Matrix is = linalg::spectral_apply(sigma[s], [cut](double x) { return x > cut ? 1.0 / std::sqrt(x) : 0.0; });
    const double l = linalg::max_eigenvalue(linalg::hermitize(is * rho[s] * is));
    best = any ? std::max(best, l) : l;
    any = true;
  }
  if (!any) return -kInf;
  return std::log2(best);
}

inline double d_max(const Matrix& rho, const Matrix& sigma) { return d_max_blocks({rho}, {sigma}); }

// ---------------------------------------------------------------------------
// Smoothed max quantities

struct SmoothingOptions {
  double bisectionTol = 2.5e-4;  // width of the final bracket in bits
  sdp::Config sdp;
};

struct SmoothResult {
  double value = 0.0;
  std::vector<Matrix> primed;  // certified optimiser blocks at `value`
  int solves = 0;
  int unconverged = 0;  // bisection steps that hit the iteration limit
};

namespace detail {

/// sigma_s as a function of the primed blocks: sum over (block t, linear map).
struct SigmaTerm {
  std::size_t block;
  std::function<Matrix(const Matrix&)> map;
};

struct SmoothingProblem {
  std::vector<Matrix> rho;                     // zero blocks allowed
  std::vector<Matrix> sigma;                   // used when `coupled` is empty
  std::vector<std::vector<SigmaTerm>> coupled;  // sigma depending on the primed blocks
  double lowerBound = 0.0;
};

inline sdp::Problem build_smoothing_sdp(const SmoothingProblem& sp, double eps, double lambda,
                                        std::size_t* sigmaConstraintStart) {
  sdp::Problem p;
  const std::size_t m = sp.rho.size();
  const double scale = std::exp2(lambda);
  std::vector<std::size_t> R(m), Z(m, static_cast<std::size_t>(-1));
  for (std::size_t s = 0; s < m; ++s) {
    const Eigen::Index d = sp.rho[s].rows();
    R[s] = p.add_variable("rho'" + std::to_string(s), d);
    if (sp.rho[s].cwiseAbs().maxCoeff() > 0.0) Z[s] = p.add_variable("Z" + std::to_string(s), d, true);
  }
  // fidelity blocks [[rho, Z], [Z^dagger, rho']] >= 0
  for (std::size_t s = 0; s < m; ++s) {
    const Eigen::Index d = sp.rho[s].rows();
    sdp::AffineMatrix e;
    if (Z[s] == static_cast<std::size_t>(-1)) {
      e.constant = Matrix::Zero(d, d);
      e.terms.push_back({R[s], [](const Matrix& v) { return v; }});
    } else {
      e.constant = Matrix::Zero(2 * d, 2 * d);
      e.constant.topLeftCorner(d, d) = sp.rho[s];
      e.terms.push_back({Z[s], [d](const Matrix& v) {
                           Matrix out = Matrix::Zero(2 * d, 2 * d);
                           out.topRightCorner(d, d) = v;
                           out.bottomLeftCorner(d, d) = v.adjoint();
                           return out;
                         }});
      e.terms.push_back({R[s], [d](const Matrix& v) {
                           Matrix out = Matrix::Zero(2 * d, 2 * d);
                           out.bottomRightCorner(d, d) = v;
                           return out;
                         }});
    }
    p.psd.push_back(std::move(e));
  }
  // 2^lambda sigma - rho' >= 0
  if (sigmaConstraintStart) *sigmaConstraintStart = p.psd.size();
  for (std::size_t s = 0; s < m; ++s) {
    const Eigen::Index d = sp.rho[s].rows();
    sdp::AffineMatrix e;
    e.constant = sp.coupled.empty() ? Matrix(scale * sp.sigma[s]) : Matrix(Matrix::Zero(d, d));
    e.terms.push_back({R[s], [](const Matrix& v) { return Matrix(-v); }});
    if (!sp.coupled.empty())
      for (const auto& t : sp.coupled[s]) {
        auto f = t.map;
        e.terms.push_back({R[t.block], [f, scale](const Matrix& v) { return Matrix(scale * f(v)); }});
      }
    p.psd.push_back(std::move(e));
  }
  // sum_s Re Tr Z_s >= sqrt(1 - eps^2)
  {
    sdp::AffineMatrix e;
    e.constant = Matrix::Constant(1, 1, -std::sqrt(1.0 - eps * eps));
    for (std::size_t s = 0; s < m; ++s)
      if (Z[s] != static_cast<std::size_t>(-1))
        e.terms.push_back({Z[s], [](const Matrix& v) { return Matrix::Constant(1, 1, v.trace().real()); }});
    p.psd.push_back(std::move(e));
  }
  // sum_s Tr rho'_s = 1
  {
    sdp::AffineScalar e;
    e.constant = -1.0;
    for (std::size_t s = 0; s < m; ++s) e.terms.push_back({R[s], [](const Matrix& v) { return v.trace().real(); }});
    p.equalities.push_back(std::move(e));
  }
  return p;
}

inline std::vector<Matrix> extract_primed(const sdp::Result& r, std::size_t m) {
  std::vector<Matrix> out;
  for (std::size_t s = 0; s < m; ++s) out.push_back(r.assignment.at("rho'" + std::to_string(s)));
  return out;
}

/// Smallest lambda (within tolerance) for which the smoothing SDP is feasible,
/// given that `upper` is feasible with rho' = rho.
inline SmoothResult smooth_bisect(const SmoothingProblem& sp, double eps, double upper, const SmoothingOptions& opt) {
  SmoothResult res;
  res.primed = sp.rho;
  const std::size_t m = sp.rho.size();
  if (eps == 0.0) {
    res.value = upper;
    return res;
  }
  double lo = sp.lowerBound;
  double hi = upper;
  if (!std::isfinite(hi)) hi = lo + 64.0;
  if (hi <= lo) {
    res.value = std::max(hi, lo);
    return res;
  }

  const bool fixed = sp.coupled.empty();
  std::size_t sigmaStart = 0;
  std::optional<sdp::Compiled> compiled;
  Eigen::VectorXd warm;

  auto feasible_at = [&](double lambda) -> bool {
    ++res.solves;
    sdp::Result r;
    if (fixed) {
      if (!compiled) compiled.emplace(build_smoothing_sdp(sp, eps, lambda, &sigmaStart));
      const double scale = std::exp2(lambda);
      for (std::size_t s = 0; s < m; ++s) compiled->set_constant(sigmaStart + s, scale * sp.sigma[s]);
      r = compiled->solve(opt.sdp, warm.size() ? &warm : nullptr);
    } else {
      sdp::Compiled c(build_smoothing_sdp(sp, eps, lambda, nullptr));
      r = c.solve(opt.sdp, warm.size() ? &warm : nullptr);
    }
    if (r.status == sdp::Status::maxIterations) ++res.unconverged;
    if (r.status != sdp::Status::feasible) return false;
    warm = r.state;
    res.primed = extract_primed(r, m);
    return true;
  };

  if (!std::isfinite(upper)) {
    if (!feasible_at(hi)) {
      res.value = kInf;
      return res;
    }
  }
  if (feasible_at(lo)) {
    res.value = lo;
    return res;
  }
  std::vector<Matrix> bestPrimed = res.primed;
  while (hi - lo > opt.bisectionTol) {
    const double mid = 0.5 * (lo + hi);
    if (feasible_at(mid)) {
      hi = mid;
      bestPrimed = res.primed;
    } else {
      lo = mid;
    }
  }
  res.value = hi;
  res.primed = bestPrimed;
  return res;
}

}  // namespace detail

/// Smoothing over normalized states within purified distance eps.
inline SmoothResult d_max_smooth_blocks(const std::vector<Matrix>& rho, const std::vector<Matrix>& sigma, double eps,
                                        const SmoothingOptions& opt = {}) {
  check_eps(eps);
  detail::SmoothingProblem sp;
  sp.rho = rho;
  sp.sigma = sigma;
  double tr = 0.0;
  for (const auto& s : sigma) tr += s.trace().real();
  if (tr <= 0.0) throw InvalidArgument("d_max_smooth: sigma has zero trace");
  sp.lowerBound = -std::log2(tr);  // Tr rho' = 1 <= 2^lambda Tr sigma
  return detail::smooth_bisect(sp, eps, d_max_blocks(rho, sigma), opt);
}

inline double d_max_smooth(const Matrix& rho, const Matrix& sigma, double eps, const SmoothingOptions& opt = {}) {
  if (rho.rows() != sigma.rows()) throw InvalidArgument("d_max_smooth: dimension mismatch");
  return d_max_smooth_blocks({rho}, {sigma}, eps, opt).value;
}

inline double i_max_smooth(const Matrix& rho, const linalg::SystemLayout& layout, const std::vector<std::string>& first,
                           double eps, const SmoothingOptions& opt = {}) {
  const auto [r, prod] = state_and_product(rho, layout, first);
  return d_max_smooth(r, prod, eps, opt);
}

namespace detail {

/// Blocks for I_max-type smoothing over a cq state: all pairs (a, b) with p_A(a) > 0 and
/// b a B-side key occurring in the state; rho blocks may be zero.
struct CQGrid {
  std::vector<Matrix> rho, sigma;
  std::vector<std::size_t> aOf, bOf;  // grid coordinates of each block
  std::vector<double> pA;
  std::size_t nb = 0;
};

inline CQGrid cq_grid(const CQState& cq, const std::vector<std::string>& first) {
  std::vector<std::size_t> apos;
  for (const auto& a : first) apos.push_back(cq.axis_index(a));
  std::map<std::vector<std::size_t>, std::size_t> akeys, bkeys;
  for (const auto& e : cq.entries()) {
    std::vector<std::size_t> kb;
    for (std::size_t i = 0; i < e.index.size(); ++i)
      if (std::find(apos.begin(), apos.end(), i) == apos.end()) kb.push_back(e.index[i]);
    // A-side key in the caller's register order
    std::vector<std::size_t> kaOrdered;
    for (auto p : apos) kaOrdered.push_back(e.index[p]);
    akeys.try_emplace(kaOrdered, 0);
    bkeys.try_emplace(kb, 0);
  }
  std::size_t i = 0;
  for (auto& [k, v] : akeys) v = i++;
  i = 0;
  for (auto& [k, v] : bkeys) v = i++;
  const std::size_t na = akeys.size(), nb = bkeys.size();
  const auto d = static_cast<Eigen::Index>(cq.qdim());
  std::vector<Matrix> joint(na * nb, Matrix::Zero(d, d));
  std::vector<double> pA(na, 0.0);
  std::vector<Matrix> mB(nb, Matrix::Zero(d, d));
  for (const auto& e : cq.entries()) {
    std::vector<std::size_t> ka, kb;
    for (auto p : apos) ka.push_back(e.index[p]);
    for (std::size_t j = 0; j < e.index.size(); ++j)
      if (std::find(apos.begin(), apos.end(), j) == apos.end()) kb.push_back(e.index[j]);
    const std::size_t a = akeys[ka], b = bkeys[kb];
    joint[a * nb + b] += e.op;
    pA[a] += e.weight();
    mB[b] += e.op;
  }
  CQGrid g;
  g.nb = nb;
  g.pA = pA;
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b) {
      g.rho.push_back(joint[a * nb + b]);
      g.sigma.push_back(pA[a] * mB[b]);
      g.aOf.push_back(a);
      g.bOf.push_back(b);
    }
  return g;
}

}  // namespace detail

/// I_max^eps(first : rest) of a cq state, smoothing in block form.
inline SmoothResult i_max_smooth_cq(const CQState& cq, const std::vector<std::string>& first, double eps,
                                   const SmoothingOptions& opt = {}) {
  check_eps(eps);
  const detail::CQGrid g = detail::cq_grid(cq, first);
  detail::SmoothingProblem sp;
  sp.rho = g.rho;
  sp.sigma = g.sigma;
  sp.lowerBound = 0.0;
  return detail::smooth_bisect(sp, eps, d_max_blocks(g.rho, g.sigma), opt);
}

/// Variable-second-marginal version: rho' <= 2^lambda rho^A (x) rho'^B.
inline SmoothResult i_max_tilde_cq(const CQState& cq, const std::vector<std::string>& first, double eps,
                                   const SmoothingOptions& opt = {}) {
  check_eps(eps);
  const detail::CQGrid g = detail::cq_grid(cq, first);
  detail::SmoothingProblem sp;
  sp.rho = g.rho;
  sp.lowerBound = 0.0;
  const std::size_t na = g.pA.size(), nb = g.nb;
  sp.coupled.resize(g.rho.size());
  for (std::size_t s = 0; s < g.rho.size(); ++s) {
    const double pa = g.pA[g.aOf[s]];
    const std::size_t b = g.bOf[s];
    for (std::size_t a2 = 0; a2 < na; ++a2)
      sp.coupled[s].push_back({a2 * nb + b, [pa](const Matrix& v) { return Matrix(pa * v); }});
  }
  return detail::smooth_bisect(sp, eps, d_max_blocks(g.rho, g.sigma), opt);
}

inline double i_max_tilde(const Matrix& rho, const linalg::SystemLayout& layout, const std::vector<std::string>& first,
                          double eps, const SmoothingOptions& opt = {}) {
  check_eps(eps);
  const auto [r, prod] = state_and_product(rho, layout, first);
  const Bipartition b = bipartition(layout, first);
  const std::vector<std::size_t> dims{b.dimA, b.dimB};
  const Matrix ra = linalg::partial_trace(r, dims, {true, false});
  detail::SmoothingProblem sp;
  sp.rho = {r};
  sp.lowerBound = 0.0;
  sp.coupled = {{{0, [ra, dims](const Matrix& v) {
                    return linalg::tensor(ra, linalg::partial_trace(linalg::hermitize(v), dims, {false, true}));
                  }}}};
  return detail::smooth_bisect(sp, eps, d_max(r, prod), opt).value;
}

// ---------------------------------------------------------------------------
// von Neumann quantities

/// -sum lambda log lambda over the spectra of all blocks (blocks may be subnormalized).
inline double block_entropy(const std::vector<Matrix>& blocks) {
  double h = 0.0;
  for (const auto& b : blocks) {
    const RealVector ev = linalg::eigvalsh(b);
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (ev(i) > 1e-300) h -= ev(i) * std::log2(ev(i));
  }
  return h;
}

inline double entropy(const Matrix& rho) { return block_entropy({rho}); }

inline double relative_entropy(const Matrix& rho, const Matrix& sigma) {
  const linalg::Eigh er = linalg::eigh(rho), es = linalg::eigh(sigma);
  const double cut = linalg::support_cutoff(es.values.size() ? es.values(0) : 0.0);
  double d = 0.0;
  for (Eigen::Index i = 0; i < er.values.size(); ++i) {
    const double p = er.values(i);
    if (p <= 1e-300) continue;
    d += p * std::log2(p);
    for (Eigen::Index j = 0; j < es.values.size(); ++j) {
      const double overlap = std::norm(er.vectors.col(i).dot(es.vectors.col(j)));
      if (overlap <= 1e-14) continue;
      if (es.values(j) <= cut) return kInf;
      d -= p * overlap * std::log2(es.values(j));
    }
  }
  return std::max(0.0, d);
}

inline double mutual_information(const Matrix& rho, const linalg::SystemLayout& layout, const std::vector<std::string>& a,
                                 const std::vector<std::string>& b) {
  return entropy(linalg::partial_trace(rho, layout, a)) + entropy(linalg::partial_trace(rho, layout, b)) -
         entropy(linalg::partial_trace(rho, layout, [&] {
           std::vector<std::string> ab = a;
           ab.insert(ab.end(), b.begin(), b.end());
           return ab;
         }()));
}

/// H(A|B) = H(AB) - H(B).
inline double conditional_entropy(const Matrix& rho, const linalg::SystemLayout& layout, const std::vector<std::string>& a,
                                  const std::vector<std::string>& b) {
  std::vector<std::string> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  return entropy(linalg::partial_trace(rho, layout, ab)) - entropy(linalg::partial_trace(rho, layout, b));
}

/// A subsystem of a cq state: some classical registers plus some quantum factors.
struct CQGroup {
  std::vector<std::string> classical;
  std::vector<std::string> quantum;
};

inline double cq_entropy(const CQState& cq, const CQGroup& g) {
  const CQState m = cq.marginal(g.classical).trace_quantum(g.quantum);
  std::vector<Matrix> blocks;
  for (const auto& e : m.entries()) blocks.push_back(e.op);
  return block_entropy(blocks);
}

inline double cq_mutual_information(const CQState& cq, const CQGroup& a, const CQGroup& b) {
  CQGroup ab{a.classical, a.quantum};
  ab.classical.insert(ab.classical.end(), b.classical.begin(), b.classical.end());
  ab.quantum.insert(ab.quantum.end(), b.quantum.begin(), b.quantum.end());
  return cq_entropy(cq, a) + cq_entropy(cq, b) - cq_entropy(cq, ab);
}

}  // namespace oneshot
