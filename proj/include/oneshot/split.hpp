// Rate splitting: X = max(U, V) with U, V independent, parametrised by theta.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "oneshot/error.hpp"
#include "oneshot/quantum.hpp"

namespace oneshot {

struct SplitPair {
  double theta = 0.0;
  Distribution pU, pV;
};

/// CDF_U = CDF^(1-theta), CDF_V = CDF^theta along the alphabet order of p.
inline SplitPair split(const Distribution& p, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("split: theta must lie in [0, 1]");
  p.validate();
  const std::size_t n = p.size();
  SplitPair s;
  s.theta = theta;
  std::vector<double> pu(n, 0.0), pv(n, 0.0);
  if (theta == 0.0) {
    pu = p.probs;
    pv[0] = 1.0;
  } else if (theta == 1.0) {
    pv = p.probs;
    pu[0] = 1.0;
  } else {
    double cdf = 0.0, prevU = 0.0, prevV = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cdf = (i + 1 == n) ? 1.0 : cdf + p.probs[i];
      const double cu = std::pow(cdf, 1.0 - theta), cv = std::pow(cdf, theta);
      pu[i] = cu - prevU;
      pv[i] = cv - prevV;
      prevU = cu;
      prevV = cv;
    }
  }
  s.pU = Distribution(p.alphabet, std::move(pu));
  s.pV = Distribution(p.alphabet, std::move(pv));
  return s;
}

/// Law of max(U, V) in alphabet order.
inline std::vector<double> max_law(const SplitPair& s) {
  const std::size_t n = s.pU.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) out[std::max(u, v)] += s.pU.probs[u] * s.pV.probs[v];
  return out;
}

inline bool is_point_mass(const Distribution& d) {
  std::size_t nz = 0;
  for (double v : d.probs)
    if (v > 0.0) ++nz;
  return nz <= 1;
}

/// Which outcome register gets split.
enum class SplitAxis { X, Y };

/// Split POVM on A with registers (U, V, other): element (u, v, w) is
/// Lambda_{max(u,v), w} pU(u) pV(v) / P(max(u,v)), which sums to the identity.
/// Returns the element list row-major over (u, v, w) together with the split pair.
struct SplitPOVM {
  SplitPair pair;
  std::vector<std::string> alphabetSplit, alphabetOther;
  std::vector<Matrix> elements;  // (u * n + v) * m + w
  const Matrix& element(std::size_t u, std::size_t v, std::size_t w) const {
    return elements[(u * alphabetSplit.size() + v) * alphabetOther.size() + w];
  }
};

inline std::pair<Distribution, std::vector<Matrix>> split_axis_view(const JointPOVM& povm, const Matrix& rhoA,
                                                                    SplitAxis axis) {
  // marginal of the split register and the elements indexed [split][other]
  const Distribution joint = induced_distribution(povm, rhoA);
  const bool sx = axis == SplitAxis::X;
  const std::size_t n = sx ? povm.nx() : povm.ny(), m = sx ? povm.ny() : povm.nx();
  std::vector<double> marg(n, 0.0);
  std::vector<Matrix> el;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const std::size_t x = sx ? a : b, y = sx ? b : a;
      marg[a] += joint.probs[x * povm.ny() + y];
      el.push_back(povm.element(x, y));
    }
  return {Distribution(sx ? povm.alphabetX : povm.alphabetY, std::move(marg)), std::move(el)};
}

inline SplitPOVM split_povm(const JointPOVM& povm, const Matrix& rhoA, double theta, SplitAxis axis = SplitAxis::X) {
  auto [marg, el] = split_axis_view(povm, rhoA, axis);
  SplitPOVM sp;
  sp.pair = split(marg, theta);
  sp.alphabetSplit = marg.alphabet;
  sp.alphabetOther = axis == SplitAxis::X ? povm.alphabetY : povm.alphabetX;
  const std::size_t n = sp.alphabetSplit.size(), m = sp.alphabetOther.size();
  const auto d = static_cast<Eigen::Index>(povm.dim());
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t w = 0; w < m; ++w) {
        const std::size_t x = std::max(u, v);
        const double px = marg.probs[x];
        const double f = px > 0.0 ? sp.pair.pU.probs[u] * sp.pair.pV.probs[v] / px : 0.0;
        sp.elements.push_back(f > 0.0 ? Matrix(f * el[x * m + w]) : Matrix::Zero(d, d));
      }
  // zero-probability split symbols leave part of Lambda_{x,w} unassigned; put it on (x, x)
  for (std::size_t x = 0; x < n; ++x)
    if (marg.probs[x] <= 0.0)
      for (std::size_t w = 0; w < m; ++w) sp.elements[(x * n + x) * m + w] += el[x * m + w];
  return sp;
}

/// Control state over classical registers (U, V, other) and the kept quantum factors.
/// Blocks are the post-measurement blocks of Lambda_{max(u,v),w} scaled by pU(u) pV(v) / P(max).
inline CQState split_control_state(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout,
                                   double theta, const std::vector<std::string>& keep,
                                   SplitAxis axis = SplitAxis::X) {
  const Matrix rhoA = linalg::partial_trace(rho, layout, {"A"});
  const CQState base = post_measurement_cq(povm, rho, layout, keep);
  auto [marg, el] = split_axis_view(povm, rhoA, axis);
  const SplitPair sp = split(marg, theta);
  const bool sx = axis == SplitAxis::X;
  const std::string other = sx ? "Y" : "X";
  CQState out({"U", "V", other}, {marg.alphabet, marg.alphabet, sx ? povm.alphabetY : povm.alphabetX},
              base.quantum());
  for (const auto& e : base.entries()) {
    const std::size_t a = sx ? e.index[0] : e.index[1], w = sx ? e.index[1] : e.index[0];
    const double pa = marg.probs[a];
    if (pa <= 0.0) continue;
    for (std::size_t u = 0; u <= a; ++u)
      for (std::size_t v = 0; v <= a; ++v) {
        if (std::max(u, v) != a) continue;
        const double f = sp.pU.probs[u] * sp.pV.probs[v];
        if (f <= 0.0) continue;
        if (f == pa)
          out.add({u, v, w}, e.op);  // bit-exact at the endpoints
        else
          out.add({u, v, w}, (f / pa) * e.op);
      }
  }
  return out;
}

}  // namespace oneshot
