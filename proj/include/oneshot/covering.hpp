// Covering-type constructions: codebooks, convex split states, the measure-transformed
// sequential covering estimator and the GOOD-set extraction behind the operator inequality.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "oneshot/error.hpp"
#include "oneshot/linalg.hpp"
#include "oneshot/parallel.hpp"
#include "oneshot/quantum.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

// ---------------------------------------------------------------------------
// Codebooks

/// samples[k * L + l] is the alphabet index of x(k, l).
struct Codebook {
  std::string axis;
  std::size_t K = 1, L = 1;
  std::vector<std::uint16_t> samples;
  Distribution source;
  std::uint64_t seed = 0;

  std::size_t at(std::size_t k, std::size_t l) const { return samples[k * L + l]; }
  /// Symbol counts inside block k.
  std::vector<std::size_t> block_counts(std::size_t k) const {
    std::vector<std::size_t> c(source.size(), 0);
    for (std::size_t l = 0; l < L; ++l) ++c[at(k, l)];
    return c;
  }
};

/// Draws K*L iid samples from `source`; the draws form one stream, so a smaller
/// codebook from the same (seed, trial, stream) is a prefix of a larger one.
inline Codebook draw_codebook(const std::string& axis, const Distribution& source, std::size_t K, std::size_t L,
                              std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  if (K == 0 || L == 0) throw InvalidArgument("draw_codebook: empty codebook");
  if (source.size() > 65535) throw InvalidArgument("draw_codebook: alphabet too large");
  Codebook cb;
  cb.axis = axis;
  cb.K = K;
  cb.L = L;
  cb.source = source;
  cb.seed = seed;
  cb.samples.resize(K * L);
  auto eng = rng::stream(seed, trial, stream);
  for (auto& s : cb.samples) s = static_cast<std::uint16_t>(rng::sample(eng, source.probs));
  return cb;
}

// ---------------------------------------------------------------------------
// Convex split

namespace detail {

struct ConvexSplitParts {
  Matrix rhoABR;  // ordered A, B, R
  Matrix rhoA, rhoB, rhoR;
  std::size_t dA = 1, dB = 1, dR = 1;
};

/// Reorders to (A, B, R) where R collects every other factor in layout order.
inline ConvexSplitParts convex_split_parts(const Matrix& rho, const linalg::SystemLayout& layout) {
  if (!layout.has("A") || !layout.has("B")) throw InvalidArgument("convex_split_state: layout needs A and B factors");
  if (static_cast<std::size_t>(rho.rows()) != layout.total_dim())
    throw InvalidArgument("convex_split_state: state does not match layout");
  std::vector<std::size_t> perm{layout.index_of("A"), layout.index_of("B")};
  ConvexSplitParts p;
  p.dA = layout.dim_of("A");
  p.dB = layout.dim_of("B");
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (i != perm[0] && i != perm[1]) {
      perm.push_back(i);
      p.dR *= layout.factors()[i].dim;
    }
  p.rhoABR = linalg::permute_subsystems(rho, layout.dims(), perm);
  const std::vector<std::size_t> dims{p.dA, p.dB, p.dR};
  p.rhoA = linalg::partial_trace(p.rhoABR, dims, {true, false, false});
  p.rhoB = linalg::partial_trace(p.rhoABR, dims, {false, true, false});
  p.rhoR = linalg::partial_trace(p.rhoABR, dims, {false, false, true});
  return p;
}

}  // namespace detail

namespace detail {

/// Average over (k, l) of `base` placed on (A_k, B_l, R) with rho^A on the other A copies
/// and rho^B on the other B copies, ordered A_1..A_K B_1..B_L R.
inline Matrix convex_average(const Matrix& base3, const ConvexSplitParts& p, std::size_t K, std::size_t L) {
  if (K == 0 || L == 0) throw InvalidArgument("convex_split_state: K and L must be positive");
  double total = static_cast<double>(p.dR);
  for (std::size_t i = 0; i < K; ++i) total *= static_cast<double>(p.dA);
  for (std::size_t i = 0; i < L; ++i) total *= static_cast<double>(p.dB);
  if (total > 4096) throw InvalidArgument("convex_split_state: dimension exceeds 4096");

  // base operator on (A_1, B_1, R, A_2..A_K, B_2..B_L)
  Matrix base = base3;
  for (std::size_t i = 1; i < K; ++i) base = linalg::tensor(base, p.rhoA);
  for (std::size_t i = 1; i < L; ++i) base = linalg::tensor(base, p.rhoB);
  std::vector<std::size_t> dims{p.dA, p.dB, p.dR};
  for (std::size_t i = 1; i < K; ++i) dims.push_back(p.dA);
  for (std::size_t i = 1; i < L; ++i) dims.push_back(p.dB);
  // positions of the factors inside `base`
  auto posA = [&](std::size_t j, std::size_t k) { return j == k ? 0 : 3 + (j < k ? j : j - 1); };
  auto posB = [&](std::size_t j, std::size_t l) { return j == l ? 1 : 3 + (K - 1) + (j < l ? j : j - 1); };

  const auto D = static_cast<Eigen::Index>(total);
  Matrix tau = Matrix::Zero(D, D);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<std::size_t> perm;
      for (std::size_t j = 0; j < K; ++j) perm.push_back(posA(j, k));
      for (std::size_t j = 0; j < L; ++j) perm.push_back(posB(j, l));
      perm.push_back(2);
      tau += linalg::permute_subsystems(base, dims, perm);
    }
  return tau / static_cast<double>(K * L);
}

}  // namespace detail

/// tau on A_1..A_K B_1..B_L R: the average over (k, l) of rho on (A_k, B_l, R) with
/// rho^A on the other A copies and rho^B on the other B copies.
inline Matrix convex_split_state(const Matrix& rho, const linalg::SystemLayout& layout, std::size_t K, std::size_t L) {
  const auto p = detail::convex_split_parts(rho, layout);
  return detail::convex_average(p.rhoABR, p, K, L);
}

/// rho^A^{(x)K} (x) rho^B^{(x)L} (x) rho^R in the ordering of convex_split_state.
inline Matrix convex_split_target(const Matrix& rho, const linalg::SystemLayout& layout, std::size_t K, std::size_t L) {
  const auto p = detail::convex_split_parts(rho, layout);
  Matrix t = Matrix::Identity(1, 1);
  for (std::size_t i = 0; i < K; ++i) t = linalg::tensor(t, p.rhoA);
  for (std::size_t i = 0; i < L; ++i) t = linalg::tensor(t, p.rhoB);
  return linalg::tensor(t, p.rhoR);
}

/// ||tau - target||_1 computed as the convex average of Delta = rho^{ABR} - rho^A (x) rho^B (x) rho^R
/// (the target is invariant under the copy permutations). Entries of Delta at rounding level
/// are cleared, so product inputs give exactly 0.
inline double convex_split_distance(const Matrix& rho, const linalg::SystemLayout& layout, std::size_t K, std::size_t L) {
  const auto p = detail::convex_split_parts(rho, layout);
  Matrix delta = p.rhoABR - linalg::tensor(linalg::tensor(p.rhoA, p.rhoB), p.rhoR);
  const double cut = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, p.rhoABR.cwiseAbs().maxCoeff());
  bool zero = true;
  for (Eigen::Index i = 0; i < delta.rows(); ++i)
    for (Eigen::Index j = 0; j < delta.cols(); ++j) {
      if (std::abs(delta(i, j)) <= cut)
        delta(i, j) = 0.0;
      else
        zero = false;
    }
  if (zero) return 0.0;
  return linalg::trace_norm(linalg::hermitize(detail::convex_average(delta, p, K, L)));
}

// ---------------------------------------------------------------------------
// Measure-transformed covering

struct CoveringEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t trials = 0;
};

namespace detail {

/// Precomputed pieces of a two-register cq state sum |x,y><x,y| (x) omega_{x,y}.
struct CoveringModel {
  std::vector<double> pX, pY;
  std::vector<Matrix> scaled;  // omega_{x,y} / (pX(x) pY(y)), zero where omega vanishes
  Matrix sigma;
  std::size_t nx = 0, ny = 0;
};

inline CoveringModel covering_model(const CQState& joint) {
  if (joint.axes().size() != 2) throw InvalidArgument("covering_error: expected a state over two classical registers");
  CoveringModel m;
  m.nx = joint.alphabets()[0].size();
  m.ny = joint.alphabets()[1].size();
  m.pX = joint.distribution({joint.axes()[0]}).probs;
  m.pY = joint.distribution({joint.axes()[1]}).probs;
  const auto d = static_cast<Eigen::Index>(joint.qdim());
  m.scaled.assign(m.nx * m.ny, Matrix::Zero(d, d));
  for (const auto& e : joint.entries()) {
    const std::size_t x = e.index[0], y = e.index[1];
    m.scaled[x * m.ny + y] = e.op / (m.pX[x] * m.pY[y]);
  }
  m.sigma = joint.quantum_state();
  return m;
}

inline double covering_deviation(const CoveringModel& m, const std::vector<std::size_t>& cx,
                                 const std::vector<std::size_t>& cy) {
  double K = 0, L = 0;
  for (auto c : cx) K += static_cast<double>(c);
  for (auto c : cy) L += static_cast<double>(c);
  Matrix avg = Matrix::Zero(m.sigma.rows(), m.sigma.cols());
  for (std::size_t x = 0; x < m.nx; ++x) {
    if (!cx[x]) continue;
    for (std::size_t y = 0; y < m.ny; ++y)
      if (cy[y]) avg += (static_cast<double>(cx[x]) * static_cast<double>(cy[y]) / (K * L)) * m.scaled[x * m.ny + y];
  }
  return linalg::trace_norm_distance(avg, m.sigma);
}

inline std::vector<std::size_t> draw_counts(const std::vector<double>& p, std::size_t n, std::uint64_t seed,
                                            std::uint64_t trial, std::uint64_t stream) {
  auto eng = rng::stream(seed, trial, stream);
  std::vector<std::size_t> c(p.size(), 0);
  for (std::size_t i = 0; i < n; ++i) ++c[rng::sample(eng, p)];
  return c;
}

/// All count vectors of n draws over the support of p, with multinomial probabilities.
inline void enumerate_counts(const std::vector<double>& p, std::size_t n,
                             std::vector<std::pair<std::vector<std::size_t>, double>>& out) {
  std::vector<std::size_t> c(p.size(), 0);
  std::vector<double> logf(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) logf[i] = logf[i - 1] + std::log(static_cast<double>(i));
  auto rec = [&](auto&& self, std::size_t i, std::size_t left) -> void {
    if (i + 1 == p.size()) {
      if (left > 0 && p[i] <= 0.0) return;
      c[i] = left;
      double lp = logf[n];
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (c[j] == 0) continue;
        lp += static_cast<double>(c[j]) * std::log(p[j]) - logf[c[j]];
      }
      out.emplace_back(c, std::exp(lp));
      return;
    }
    const std::size_t top = p[i] > 0.0 ? left : 0;
    for (std::size_t v = 0; v <= top; ++v) {
      c[i] = v;
      self(self, i + 1, left - v);
    }
  };
  rec(rec, 0, n);
}

}  // namespace detail

/// Monte Carlo mean of || (1/KL) sum_{k,l} P_XY/(P_X P_Y) rho_{x(k),y(l)} - sigma ||_1 over
/// `trials` independent codebook pairs (x-codebook of size K, y-codebook of size L).
inline CoveringEstimate covering_error(const CQState& joint, std::size_t K, std::size_t L, std::size_t trials,
                                       std::uint64_t seed) {
  if (trials == 0) throw InvalidArgument("covering_error: trials must be positive");
  const auto m = detail::covering_model(joint);
  const auto dev = parallel_map(trials, [&](std::size_t t) {
    return detail::covering_deviation(m, detail::draw_counts(m.pX, K, seed, t, rng::kStreamX),
                                      detail::draw_counts(m.pY, L, seed, t, rng::kStreamY));
  });
  CoveringEstimate est;
  est.trials = trials;
  double s = 0.0, s2 = 0.0;
  for (double v : dev) s += v;
  est.mean = s / static_cast<double>(trials);
  for (double v : dev) s2 += (v - est.mean) * (v - est.mean);
  est.stderr_ = trials > 1 ? std::sqrt(s2 / static_cast<double>(trials - 1) / static_cast<double>(trials)) : 0.0;
  return est;
}

/// Exact expectation by enumerating the multinomial count vectors of both codebooks.
inline double covering_error_exact(const CQState& joint, std::size_t K, std::size_t L) {
  const auto m = detail::covering_model(joint);
  std::vector<std::pair<std::vector<std::size_t>, double>> ex, ey;
  detail::enumerate_counts(m.pX, K, ex);
  detail::enumerate_counts(m.pY, L, ey);
  if (static_cast<double>(ex.size()) * static_cast<double>(ey.size()) > 1e6)
    throw InvalidArgument("covering_error_exact: too many count configurations");
  double total = 0.0;
  for (const auto& [cx, px] : ex)
    for (const auto& [cy, py] : ey) total += px * py * detail::covering_deviation(m, cx, cy);
  return total;
}

struct CoveringRow {
  int logK = 0, logL = 0;
  CoveringEstimate est;
};

/// Grid sweep over logK in [0, maxLogK], logL in [0, maxLogL] with common random numbers
/// (each trial's codebooks at smaller sizes are prefixes of the larger ones).
inline std::vector<CoveringRow> covering_sweep(const CQState& joint, int maxLogK, int maxLogL, std::size_t trials,
                                               std::uint64_t seed) {
  std::vector<CoveringRow> rows;
  for (int a = 0; a <= maxLogK; ++a)
    for (int b = 0; b <= maxLogL; ++b)
      rows.push_back({a, b, covering_error(joint, std::size_t{1} << a, std::size_t{1} << b, trials, seed)});
  return rows;
}

// ---------------------------------------------------------------------------
// GOOD-set extraction

struct GoodSetCertificate {
  std::vector<std::size_t> good;
  std::vector<Matrix> primed;     // rho'_i for every index (zero where Q(i) = 0)
  std::vector<double> weights;    // the distribution the lemma is applied with (P, or P' when transformed)
  std::vector<double> Q;
  double probGood = 0.0;          // weight of GOOD under `weights`
  double opSlack = 0.0;           // min eig(factor * rho - sum_GOOD scale_i rho'_i)
  double factor = 1.0;            // operator-inequality constant
  double closeBound = 0.0;        // bound on ||rho'_i - rho_i||_1 for i in GOOD
  double maxCloseness = 0.0;      // measured max over GOOD
  double epsilon = 0.0;           // slack the lemma was applied with
  double hypothesisDistance = 0.0;
  std::vector<double> scale;      // coefficient of rho'_i in the operator inequality
  bool contains(std::size_t i) const { return std::binary_search(good.begin(), good.end(), i); }
};

/// Literal construction: purify the average with an index register, take the Uhlmann
/// partner of the target's purification, and read off v_i, Q, rho'_i, INDEX, CLOSE.
inline GoodSetCertificate extract_good_set(const std::vector<Matrix>& parts, const std::vector<double>& weights,
                                           const Matrix& target, double eps) {
  if (parts.empty() || parts.size() != weights.size()) throw InvalidArgument("extract_good_set: parts/weights mismatch");
  if (!(eps >= 0.0 && eps < 2.0)) throw InvalidArgument("extract_good_set: eps out of range");
  const std::size_t n = parts.size();
  const auto d = target.rows();
  Matrix avg = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (parts[i].rows() != d) throw InvalidArgument("extract_good_set: dimension mismatch");
    avg += weights[i] * parts[i];
  }
  GoodSetCertificate c;
  c.epsilon = eps;
  c.weights = weights;
  c.hypothesisDistance = linalg::trace_norm_distance(avg, target);
  if (c.hypothesisDistance > eps + 1e-10)
    throw InvalidArgument("extract_good_set: the average is farther than eps from the target");

  // psi = sum_i sqrt(P(i)) |rho_i>^{AB} |i>^C, purifying index (b, i) -> b * n + i
  Matrix coeff = Matrix::Zero(d, d * static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] <= 0.0) continue;
    const Matrix s = linalg::matrix_sqrt(parts[i]);
    const double w = std::sqrt(weights[i]);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) coeff(a, b * static_cast<Eigen::Index>(n) + static_cast<Eigen::Index>(i)) = w * s(a, b);
  }
  const Vector psi = linalg::from_coefficients(coeff);
  const Matrix phi = linalg::as_coefficients(linalg::uhlmann_partner(psi, static_cast<std::size_t>(d), target),
                                             static_cast<std::size_t>(d));

  const double r = std::pow(eps, 0.25);
  const double slack = 1e-9;
  c.factor = 1.0 + r;
  c.closeBound = 2.0 * r;
  c.Q.assign(n, 0.0);
  c.primed.assign(n, Matrix::Zero(d, d));
  c.scale = weights;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix v(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) v(a, b) = phi(a, b * static_cast<Eigen::Index>(n) + static_cast<Eigen::Index>(i));
    const double q = v.squaredNorm();
    c.Q[i] = q;
    if (q <= 1e-300) continue;
    c.primed[i] = linalg::hermitize(v * v.adjoint()) / q;
    if (weights[i] <= 0.0) continue;
    const double ratio = weights[i] / q;
    const bool index = std::abs(1.0 - ratio) <= r + slack;
    const bool close = linalg::trace_norm_distance(c.primed[i], ratio * parts[i]) <= r + slack;
    if (index && close) c.good.push_back(i);
  }
  Matrix sum = Matrix::Zero(d, d);
  for (auto i : c.good) {
    c.probGood += weights[i];
    sum += weights[i] * c.primed[i];
    c.maxCloseness = std::max(c.maxCloseness, linalg::trace_norm_distance(c.primed[i], parts[i]));
  }
  c.opSlack = linalg::min_eigenvalue(linalg::hermitize(c.factor * target - sum));
  return c;
}

/// Measure-transformed variant: sigma_i subnormalized, rho_i = sigma_i / Tr sigma_i,
/// P'(i) proportional to P(i) Tr sigma_i, slack doubled. The operator inequality is
/// stated for sum_GOOD P(i) Tr[sigma_i] rho'_i with factor S (1 + (2 eps)^{1/4}),
/// S = sum_i P(i) Tr sigma_i.
inline GoodSetCertificate extract_good_set_transformed(const std::vector<Matrix>& sigmas, const std::vector<double>& weights,
                                                       const Matrix& target, double eps) {
  if (sigmas.empty() || sigmas.size() != weights.size())
    throw InvalidArgument("extract_good_set_transformed: parts/weights mismatch");
  const std::size_t n = sigmas.size();
  const auto d = target.rows();
  Matrix avg = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) avg += weights[i] * sigmas[i];
  const double dist = linalg::trace_norm_distance(avg, target);
  if (dist > eps + 1e-10)
    throw InvalidArgument("extract_good_set_transformed: the weighted sum is farther than eps from the target");

  std::vector<Matrix> rho(n);
  std::vector<double> pp(n, 0.0), tr(n, 0.0);
  double S = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tr[i] = sigmas[i].trace().real();
    if (tr[i] > 1e-300 && weights[i] > 0.0) {
      rho[i] = sigmas[i] / tr[i];
      pp[i] = weights[i] * tr[i];
      S += pp[i];
    } else {
      rho[i] = Matrix::Zero(d, d);
      rho[i](0, 0) = 1.0;  // placeholder state, carries no weight
    }
  }
  if (S <= 0.0) throw InvalidArgument("extract_good_set_transformed: all parts vanish");
  for (auto& v : pp) v /= S;
  const double eps2 = std::min(2.0 * eps, 1.999);
  GoodSetCertificate c = extract_good_set(rho, pp, target, eps2);
  c.hypothesisDistance = dist;
  c.factor = S * (1.0 + std::pow(eps2, 0.25));
  c.scale.assign(n, 0.0);
  Matrix sum = Matrix::Zero(d, d);
  for (auto i : c.good) {
    c.scale[i] = weights[i] * tr[i];
    sum += c.scale[i] * c.primed[i];
  }
  c.opSlack = linalg::min_eigenvalue(linalg::hermitize(c.factor * target - sum));
  return c;
}

}  // namespace oneshot
