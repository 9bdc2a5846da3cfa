// Achievable rate regions over (R_X, R_Y, C_X, C_Y): the one-shot region per split
// parameter, its asymptotic (von Neumann) counterpart, and n-block helpers.
#pragma once

#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oneshot/compression.hpp"
#include "oneshot/entropy.hpp"
#include "oneshot/quantum.hpp"
#include "oneshot/split.hpp"

namespace oneshot {

/// coeffs . (R_X, R_Y, C_X, C_Y) > rhs
struct HalfSpace {
  std::array<double, 4> coeffs{};
  double rhs = 0.0;
  std::string provenance;
};

/// Smoothed quantities of one stream, in decoding order.
struct StreamQuantities {
  std::string name;
  char link = 'X';
  bool degenerate = false;  // point-mass marginal: no codebook, no constant
  double iMax = 0.0;        // I_max^eps(a : rest, earlier streams)
  double hMax = 0.0;        // H_max^eps(a)
  double iHyp = 0.0;        // I_H^eps(a : B), 0 without side information
  double logConst = 0.0;
  double rate_min() const { return degenerate ? 0.0 : iMax - iHyp + logConst; }
  double sum_min() const { return degenerate ? 0.0 : hMax - iHyp + logConst; }
  double rate_min_unassisted() const { return degenerate ? 0.0 : iMax + logConst; }
  double sum_min_unassisted() const { return degenerate ? 0.0 : hMax + logConst; }
};

struct RegionPiece {
  std::string axis;  // "X", "Y" or "none"
  double theta = 0.0;
  std::vector<StreamQuantities> streams;
  std::vector<HalfSpace> halfSpaces;
};

struct RateRegion {
  double eps = 0.0, logConst = 0.0;
  std::vector<RegionPiece> pieces;
  bool contains(const std::array<double, 4>& r) const {
    for (const auto& p : pieces) {
      bool ok = true;
      for (const auto& h : p.halfSpaces) {
        double v = 0.0;
        for (int i = 0; i < 4; ++i) v += h.coeffs[i] * r[i];
        ok = ok && v > h.rhs;
      }
      if (ok) return true;
    }
    return false;
  }
};

/// Quantities for registers `order` of `control` (quantum part: B and the rest).
/// Side information is the B factor when present with dimension above 1.
inline std::vector<StreamQuantities> stream_quantities(const CQState& control, const std::vector<std::string>& order,
                                                       const std::vector<char>& links, double eps, double logConst,
                                                       const SmoothingOptions& opt = {}) {
  check_eps(eps);
  const bool hasB = control.quantum().has("B") && control.quantum().dim_of("B") > 1;
  std::vector<StreamQuantities> out;
  std::vector<std::string> prev;
  for (std::size_t i = 0; i < order.size(); ++i) {
    StreamQuantities q;
    q.name = order[i];
    q.link = links[i];
    q.logConst = logConst;
    const Distribution p = control.distribution({order[i]});
    q.degenerate = is_point_mass(p);
    if (!q.degenerate) {
      q.hMax = h_max_smooth(p, eps).value;
      std::vector<std::string> regs = prev;
      regs.push_back(order[i]);
      q.iMax = i_max_smooth_cq(control.marginal(regs), {order[i]}, eps, opt).value;
      if (hasB) q.iHyp = i_hyp(control.marginal({order[i]}).trace_quantum({"B"}), {order[i]}, eps).value;
    }
    prev.push_back(order[i]);
    out.push_back(q);
  }
  return out;
}

namespace detail {

/// Constraint over (R_X, R_Y, C_X, C_Y, R_U, C_U).
struct FMRow {
  std::array<double, 6> c{};
  double rhs = 0.0;
  std::string prov;
  bool trivial = false;
};

inline std::vector<FMRow> fm_eliminate(const std::vector<FMRow>& rows, int j) {
  std::vector<FMRow> pos, neg, out;
  for (const auto& r : rows) {
    if (r.c[j] > 0)
      pos.push_back(r);
    else if (r.c[j] < 0)
      neg.push_back(r);
    else
      out.push_back(r);
  }
  for (const auto& p : pos)
    for (const auto& n : neg) {
      const double a = -n.c[j], b = p.c[j];
      FMRow r;
      for (int i = 0; i < 6; ++i) r.c[i] = a * p.c[i] + b * n.c[i];
      r.c[j] = 0.0;
      r.rhs = a * p.rhs + b * n.rhs;
      r.prov = "(" + p.prov + ") + (" + n.prov + ")";
      r.trivial = p.trivial && n.trivial;
      out.push_back(r);
    }
  return out;
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

/// Stream constraints -> half-spaces. Indices: 0 R_X, 1 R_Y, 2 C_X, 3 C_Y, 4 R_U, 5 C_U.
inline std::vector<HalfSpace> stream_half_spaces(const std::vector<StreamQuantities>& qs, bool assisted) {
  std::vector<FMRow> rows;
  bool split = false;
  for (const auto& q : qs) {
    int r = q.link == 'X' ? 0 : 1, c = q.link == 'X' ? 2 : 3;
    std::array<double, 6> rc{}, sc{};
    if (q.name == "U") {
      split = true;
      rc[4] = 1;
      sc[4] = sc[5] = 1;
    } else if (q.name == "V") {
      rc[r] = 1, rc[4] = -1;
      sc[r] = sc[c] = 1, sc[4] = sc[5] = -1;
    } else {
      rc[r] = 1;
      sc[r] = sc[c] = 1;
    }
    const double a = assisted ? q.rate_min() : q.rate_min_unassisted();
    const double b = assisted ? q.sum_min() : q.sum_min_unassisted();
    const std::string side = assisted ? " - I_H(" + q.name + ":B)" : "";
    const std::string k = " + c";
    rows.push_back({rc, a, q.degenerate ? q.name + " constant" : "I_max(" + q.name + ")" + side + k + " = " + fmt(a),
                    q.degenerate});
    rows.push_back({sc, b, q.degenerate ? q.name + " constant" : "H_max(" + q.name + ")" + side + k + " = " + fmt(b),
                    q.degenerate});
  }
  if (split) rows = fm_eliminate(fm_eliminate(rows, 5), 4);
  std::vector<HalfSpace> out;
  for (const auto& r : rows) {
    if (r.trivial) continue;
    HalfSpace h;
    for (int i = 0; i < 4; ++i) h.coeffs[i] = r.c[i] == 0.0 ? 0.0 : r.c[i];
    h.rhs = r.rhs;
    h.provenance = r.prov;
    out.push_back(h);
  }
  return out;
}

}  // namespace detail

/// Unsplit evaluation on the post-measurement control state, order X then Y (or Y then X).
inline RegionPiece unsplit_region(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout, double eps,
                                  bool xFirst, double logConst, const SmoothingOptions& opt = {}) {
  std::vector<std::string> keep;
  for (const auto& f : layout.factors())
    if (f.label != "A") keep.push_back(f.label);
  const CQState control = post_measurement_cq(povm, rho, layout, keep);
  RegionPiece p;
  p.axis = "none";
  p.theta = xFirst ? 0.0 : 1.0;
  p.streams = xFirst ? stream_quantities(control, {"X", "Y"}, {'X', 'Y'}, eps, logConst, opt)
                     : stream_quantities(control, {"Y", "X"}, {'Y', 'X'}, eps, logConst, opt);
  p.halfSpaces = detail::stream_half_spaces(p.streams, true);
  return p;
}

/// Split evaluation: streams U, other, V on the split control state; U and V share the split
/// register's link and R_U, C_U are eliminated.
inline RegionPiece split_region(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout, double eps,
                                double theta, SplitAxis axis, double logConst, const SmoothingOptions& opt = {}) {
  std::vector<std::string> keep;
  for (const auto& f : layout.factors())
    if (f.label != "A") keep.push_back(f.label);
  const CQState control = split_control_state(povm, rho, layout, theta, keep, axis);
  const bool sx = axis == SplitAxis::X;
  RegionPiece p;
  p.axis = sx ? "X" : "Y";
  p.theta = theta;
  p.streams = stream_quantities(control, {"U", sx ? "Y" : "X", "V"}, {sx ? 'X' : 'Y', sx ? 'Y' : 'X', sx ? 'X' : 'Y'},
                                eps, logConst, opt);
  p.halfSpaces = detail::stream_half_spaces(p.streams, true);
  return p;
}

/// Union over the theta grid of both split axes.
inline RateRegion one_shot_region(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout, double eps,
                                  const std::vector<double>& thetaGrid, std::optional<double> logConst = {},
                                  const SmoothingOptions& opt = {}) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("region: eps must lie in (0, 1)");
  RateRegion r;
  r.eps = eps;
  r.logConst = logConst.value_or(log_constant(eps));
  for (SplitAxis ax : {SplitAxis::X, SplitAxis::Y})
    for (double th : thetaGrid) r.pieces.push_back(split_region(povm, rho, layout, eps, th, ax, r.logConst, opt));
  return r;
}

// ---------------------------------------------------------------------------
// Asymptotic region

struct IidQuantities {
  double iXBR = 0, iXB = 0, iYBR = 0, iYB = 0, iXYBR = 0, iXY = 0, hX = 0, hY = 0;
};

inline IidQuantities iid_quantities(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout) {
  std::vector<std::string> keep, keepB;
  for (const auto& f : layout.factors())
    if (f.label != "A") keep.push_back(f.label);
  const CQState c = post_measurement_cq(povm, rho, layout, keep);
  const bool hasB = layout.has("B");
  if (hasB) keepB.push_back("B");
  IidQuantities q;
  q.iXBR = cq_mutual_information(c, {{"X"}, {}}, {{}, keep});
  q.iYBR = cq_mutual_information(c, {{"Y"}, {}}, {{}, keep});
  q.iXYBR = cq_mutual_information(c, {{"X", "Y"}, {}}, {{}, keep});
  q.iXB = hasB ? cq_mutual_information(c, {{"X"}, {}}, {{}, keepB}) : 0.0;
  q.iYB = hasB ? cq_mutual_information(c, {{"Y"}, {}}, {{}, keepB}) : 0.0;
  q.iXY = cq_mutual_information(c, {{"X"}, {}}, {{"Y"}, {}});
  q.hX = cq_entropy(c, {{"X"}, {}});
  q.hY = cq_entropy(c, {{"Y"}, {}});
  return q;
}

/// Five half-spaces from von Neumann quantities of the control state.
inline RateRegion iid_region(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout) {
  const IidQuantities q = iid_quantities(povm, rho, layout);
  RegionPiece p;
  p.axis = "none";
  p.halfSpaces = {
      {{1, 0, 0, 0}, q.iXBR - q.iXB, "I(X:BR) - I(X:B)"},
      {{0, 1, 0, 0}, q.iYBR - q.iYB, "I(Y:BR) - I(Y:B)"},
      {{1, 1, 0, 0}, q.iXYBR + q.iXY - q.iXB - q.iYB, "I(XY:BR) + I(X:Y) - I(X:B) - I(Y:B)"},
      {{1, 0, 1, 0}, q.hX - q.iXB, "H(X) - I(X:B)"},
      {{0, 1, 0, 1}, q.hY - q.iYB, "H(Y) - I(Y:B)"},
  };
  RateRegion r;
  r.pieces.push_back(std::move(p));
  return r;
}

// ---------------------------------------------------------------------------
// n-block quantities of a cq state X (x) B

/// n-fold tensor power of a single-register cq state; symbols are joined with '|'.
inline CQState cq_tensor_power(const CQState& cq, std::size_t n) {
  if (cq.axes().size() != 1) throw InvalidArgument("cq_tensor_power: expected one classical register");
  if (n == 0) throw InvalidArgument("cq_tensor_power: n must be positive");
  const auto& al = cq.alphabets()[0];
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= al.size();
  std::vector<linalg::SystemLayout::Factor> qf;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& f : cq.quantum().factors()) qf.push_back({f.label + std::to_string(i + 1), f.dim});
  if (cq.qdim() > 1 && std::pow(static_cast<double>(cq.qdim()), static_cast<double>(n)) > 64)
    throw InvalidArgument("cq_tensor_power: quantum dimension above 64");
  std::vector<std::string> sym;
  std::vector<std::vector<std::size_t>> idx;
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t rem = s;
    std::vector<std::size_t> digits(n);
    for (std::size_t i = n; i-- > 0;) {
      digits[i] = rem % al.size();
      rem /= al.size();
    }
    std::vector<std::string> parts;
    for (auto d : digits) parts.push_back(al[d]);
    sym.push_back(join_symbols(parts));
    idx.push_back(digits);
  }
  CQState out({cq.axes()[0]}, {sym}, linalg::SystemLayout(qf));
  for (std::size_t s = 0; s < total; ++s) {
    Matrix op = Matrix::Identity(1, 1);
    bool zero = false;
    for (auto d : idx[s]) {
      const auto* e = cq.find({d});
      if (!e) {
        zero = true;
        break;
      }
      op = linalg::tensor(op, e->op);
    }
    if (!zero) out.add({s}, op);
  }
  return out;
}

struct BlockQuantities {
  std::size_t n = 1;
  double hMax = 0.0, iHyp = 0.0;  // normalized by n
};

/// H_max^eps(X^n)/n and I_H^eps(X^n : B^n)/n for n = 1..maxN.
inline std::vector<BlockQuantities> n_block_quantities(const CQState& cq, std::size_t maxN, double eps) {
  std::vector<BlockQuantities> out;
  for (std::size_t n = 1; n <= maxN; ++n) {
    const CQState p = cq_tensor_power(cq, n);
    const std::string ax = p.axes()[0];
    BlockQuantities b;
    b.n = n;
    b.hMax = h_max_smooth(p.distribution({ax}), eps).value / static_cast<double>(n);
    b.iHyp = i_hyp(p, {ax}, eps).value / static_cast<double>(n);
    out.push_back(b);
  }
  return out;
}

}  // namespace oneshot
