// Distributions, POVMs, instruments and classical-quantum states.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "oneshot/error.hpp"
#include "oneshot/linalg.hpp"

namespace oneshot {

/// Separator for multi-register symbols ("x|y").
inline constexpr char kSymbolSep = '|';
/// Label of the completion outcome added to instruments with a deficit.
inline const std::string kBottom = "\xE2\x8A\xA5";  // ⊥

inline std::string join_symbols(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += kSymbolSep;
    out += parts[i];
  }
  return out;
}

inline std::vector<std::string> split_symbol(const std::string& s) {
  std::vector<std::string> out(1);
  for (char c : s) {
    if (c == kSymbolSep)
      out.emplace_back();
    else
      out.back() += c;
  }
  return out;
}

inline double safe_log2(double x) { return x > 0.0 ? std::log2(x) : -std::numeric_limits<double>::infinity(); }

// ---------------------------------------------------------------------------

struct Distribution {
  std::vector<std::string> alphabet;
  std::vector<double> probs;

  Distribution() = default;
  Distribution(std::vector<std::string> a, std::vector<double> p) : alphabet(std::move(a)), probs(std::move(p)) {
    if (alphabet.size() != probs.size()) throw InvalidArgument("Distribution: alphabet and probabilities differ in length");
  }

  /// Symbols "0", "1", ... for a bare probability vector.
  static Distribution from_probs(std::vector<double> p) {
    std::vector<std::string> a(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) a[i] = std::to_string(i);
    return Distribution(std::move(a), std::move(p));
  }

  std::size_t size() const { return probs.size(); }
  double total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }
  std::size_t support_size() const {
    return static_cast<std::size_t>(std::count_if(probs.begin(), probs.end(), [](double p) { return p > 0.0; }));
  }
  double prob(const std::string& sym) const {
    for (std::size_t i = 0; i < alphabet.size(); ++i)
      if (alphabet[i] == sym) return probs[i];
    return 0.0;
  }
  std::size_t index_of(const std::string& sym) const {
    for (std::size_t i = 0; i < alphabet.size(); ++i)
      if (alphabet[i] == sym) return i;
    throw InvalidArgument("Distribution: unknown symbol '" + sym + "'");
  }

  void validate(bool allow_subnormalized = false) const {
    for (double p : probs)
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("Distribution: negative or non-finite probability");
    const double t = total();
    if (allow_subnormalized ? t > 1.0 + 1e-10 : std::abs(t - 1.0) > 1e-10)
      throw InvalidArgument("Distribution: probabilities sum to " + std::to_string(t));
  }

  double entropy() const {
    double h = 0.0;
    for (double p : probs)
      if (p > 0.0) h -= p * std::log2(p);
    return h;
  }
};

// ---------------------------------------------------------------------------

struct JointPOVM {
  std::vector<std::string> alphabetX;
  std::vector<std::string> alphabetY;
  std::vector<Matrix> elements;  // row-major over (x, y)

  JointPOVM() = default;
  JointPOVM(std::vector<std::string> ax, std::vector<std::string> ay, std::vector<Matrix> el)
      : alphabetX(std::move(ax)), alphabetY(std::move(ay)), elements(std::move(el)) {
    if (elements.size() != alphabetX.size() * alphabetY.size())
      throw InvalidArgument("JointPOVM: element count does not match |X||Y|");
  }

  std::size_t nx() const { return alphabetX.size(); }
  std::size_t ny() const { return alphabetY.size(); }
  std::size_t dim() const { return elements.empty() ? 0 : static_cast<std::size_t>(elements.front().rows()); }
  const Matrix& element(std::size_t x, std::size_t y) const { return elements[x * ny() + y]; }
  Matrix& element(std::size_t x, std::size_t y) { return elements[x * ny() + y]; }

  Matrix marginal_x(std::size_t x) const {
    Matrix s = Matrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
    for (std::size_t y = 0; y < ny(); ++y) s += element(x, y);
    return s;
  }
  Matrix marginal_y(std::size_t y) const {
    Matrix s = Matrix::Zero(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim()));
    for (std::size_t x = 0; x < nx(); ++x) s += element(x, y);
    return s;
  }

  void validate(double tol = 1e-8) const {
    if (elements.empty()) throw InvalidArgument("JointPOVM: no elements");
    const auto d = static_cast<Eigen::Index>(dim());
    Matrix sum = Matrix::Zero(d, d);
    for (const auto& e : elements) {
      if (e.rows() != d || e.cols() != d) throw InvalidArgument("JointPOVM: element dimension mismatch");
      if (!linalg::all_finite(e)) throw InvalidArgument("JointPOVM: non-finite entry");
      if (!linalg::is_hermitian(e)) throw InvalidArgument("JointPOVM: element is not Hermitian");
      if (linalg::min_eigenvalue(e) < -kPsdTol) throw InvalidArgument("JointPOVM: element is not PSD");
      sum += e;
    }
    if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > tol)
      throw InvalidArgument("JointPOVM: elements do not sum to the identity");
  }
};

/// Kraus operators N_{x,y}; missing cells are zero.
struct Instrument {
  std::vector<std::string> alphabetX;
  std::vector<std::string> alphabetY;
  std::map<std::pair<std::size_t, std::size_t>, Matrix> kraus;
};

inline JointPOVM instrument_to_povm(const Instrument& inst, double tol = 1e-8) {
  if (inst.kraus.empty()) throw InvalidArgument("instrument_to_povm: no Kraus operators");
  const Eigen::Index d = inst.kraus.begin()->second.cols();
  Matrix sum = Matrix::Zero(d, d);
  for (const auto& [key, n] : inst.kraus) {
    if (n.cols() != d) throw InvalidArgument("instrument_to_povm: Kraus input dimension mismatch");
    if (key.first >= inst.alphabetX.size() || key.second >= inst.alphabetY.size())
      throw InvalidArgument("instrument_to_povm: Kraus label out of range");
    sum += n.adjoint() * n;
  }
  const Matrix deficit = linalg::hermitize(Matrix::Identity(d, d) - sum);
  const double lo = linalg::min_eigenvalue(deficit);
  if (lo < -tol) throw InvalidArgument("instrument_to_povm: sum of N^dagger N exceeds the identity");
  const bool complete = deficit.cwiseAbs().maxCoeff() <= tol;

  std::vector<std::string> ax = inst.alphabetX, ay = inst.alphabetY;
  if (!complete) {
    ax.push_back(kBottom);
    ay.push_back(kBottom);
  }
  std::vector<Matrix> el(ax.size() * ay.size(), Matrix::Zero(d, d));
  for (const auto& [key, n] : inst.kraus) el[key.first * ay.size() + key.second] = linalg::hermitize(n.adjoint() * n);
  if (!complete) el.back() = linalg::psd_part(deficit);
  return JointPOVM(std::move(ax), std::move(ay), std::move(el));
}

/// Outcome distribution over "x|y" in row-major (x, y) order.
inline Distribution induced_distribution(const JointPOVM& povm, const Matrix& rho_A) {
  if (static_cast<std::size_t>(rho_A.rows()) != povm.dim())
    throw InvalidArgument("induced_distribution: state and POVM dimensions differ");
  std::vector<std::string> sym;
  std::vector<double> p;
  for (std::size_t x = 0; x < povm.nx(); ++x)
    for (std::size_t y = 0; y < povm.ny(); ++y) {
      sym.push_back(povm.alphabetX[x] + kSymbolSep + povm.alphabetY[y]);
      p.push_back(std::max(0.0, (povm.element(x, y) * rho_A).trace().real()));
    }
  const double t = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v /= t;
  return Distribution(std::move(sym), std::move(p));
}

inline Distribution induced_distribution(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout) {
  return induced_distribution(povm, linalg::partial_trace(rho, layout, {"A"}));
}

// ---------------------------------------------------------------------------

/// State sum_s |s><s| (x) op_s with s ranging over tuples of classical symbols.
/// Each op_s is the weighted (subnormalized) block p(s) rho_s. Entries are kept
/// sorted by index tuple and zero blocks are dropped.
class CQState {
 public:
  struct Entry {
    std::vector<std::size_t> index;
    Matrix op;
    double weight() const { return op.trace().real(); }
  };

  CQState() = default;
  CQState(std::vector<std::string> axes, std::vector<std::vector<std::string>> alphabets, linalg::SystemLayout quantum)
      : axes_(std::move(axes)), alphabets_(std::move(alphabets)), quantum_(std::move(quantum)) {
    if (axes_.size() != alphabets_.size()) throw InvalidArgument("CQState: axes and alphabets differ in length");
  }

  const std::vector<std::string>& axes() const { return axes_; }
  const std::vector<std::vector<std::string>>& alphabets() const { return alphabets_; }
  const std::vector<std::string>& alphabet(const std::string& axis) const { return alphabets_[axis_index(axis)]; }
  const linalg::SystemLayout& quantum() const { return quantum_; }
  std::size_t qdim() const { return quantum_.size() ? quantum_.total_dim() : 1; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t axis_index(const std::string& axis) const {
    for (std::size_t i = 0; i < axes_.size(); ++i)
      if (axes_[i] == axis) return i;
    throw InvalidArgument("CQState: unknown classical register '" + axis + "'");
  }

  /// Adds op to the block at `index` (merging with an existing entry).
  void add(const std::vector<std::size_t>& index, const Matrix& op) {
    if (index.size() != axes_.size()) throw InvalidArgument("CQState: index arity mismatch");
    for (std::size_t i = 0; i < index.size(); ++i)
      if (index[i] >= alphabets_[i].size()) throw InvalidArgument("CQState: symbol index out of range");
    if (static_cast<std::size_t>(op.rows()) != qdim()) throw InvalidArgument("CQState: block dimension mismatch");
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const Entry& e, const std::vector<std::size_t>& k) { return e.index < k; });
    if (it != entries_.end() && it->index == index)
      it->op += op;
    else
      entries_.insert(it, Entry{index, op});
  }

  /// Drops blocks whose trace is at most `tol`.
  void prune(double tol = 0.0) {
    std::erase_if(entries_, [tol](const Entry& e) { return e.op.trace().real() <= tol; });
  }

  std::string symbol(const Entry& e) const {
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < e.index.size(); ++i) parts.push_back(alphabets_[i][e.index[i]]);
    return join_symbols(parts);
  }

  double total_trace() const {
    double t = 0.0;
    for (const auto& e : entries_) t += e.weight();
    return t;
  }

  Matrix quantum_state() const {
    const auto d = static_cast<Eigen::Index>(qdim());
    Matrix s = Matrix::Zero(d, d);
    for (const auto& e : entries_) s += e.op;
    return s;
  }

  /// Keeps the listed classical registers (in the given order), summing over the rest.
  CQState marginal(const std::vector<std::string>& keep) const {
    std::vector<std::size_t> pos;
    std::vector<std::vector<std::string>> alph;
    for (const auto& k : keep) {
      pos.push_back(axis_index(k));
      alph.push_back(alphabets_[pos.back()]);
    }
    CQState out(keep, std::move(alph), quantum_);
    for (const auto& e : entries_) {
      std::vector<std::size_t> idx;
      for (auto p : pos) idx.push_back(e.index[p]);
      out.add(idx, e.op);
    }
    return out;
  }

  /// Partial trace on the quantum part; an empty keep list leaves a 1-dimensional quantum part.
  CQState trace_quantum(const std::vector<std::string>& keep) const {
    linalg::SystemLayout kept = quantum_.restricted(keep);
    CQState out(axes_, alphabets_, kept);
    for (const auto& e : entries_) {
      Matrix r = quantum_.size() ? linalg::partial_trace(e.op, quantum_, keep) : e.op;
      if (kept.size() == 0) r = Matrix::Constant(1, 1, e.op.trace());
      out.entries_.push_back(Entry{e.index, r});
    }
    return out;
  }

  /// Distribution over the listed registers, symbols joined with '|', in index order.
  Distribution distribution(const std::vector<std::string>& keep) const {
    const CQState m = marginal(keep);
    // enumerate the full product alphabet so zero-probability symbols keep their place
    std::vector<std::string> sym;
    std::vector<double> p;
    std::vector<std::size_t> idx(keep.size(), 0);
    std::size_t total = 1;
    for (const auto& a : m.alphabets_) total *= a.size();
    for (std::size_t n = 0; n < total; ++n) {
      std::size_t rem = n;
      for (std::size_t i = keep.size(); i-- > 0;) {
        idx[i] = rem % m.alphabets_[i].size();
        rem /= m.alphabets_[i].size();
      }
      std::vector<std::string> parts;
      for (std::size_t i = 0; i < keep.size(); ++i) parts.push_back(m.alphabets_[i][idx[i]]);
      sym.push_back(join_symbols(parts));
      const Entry* e = m.find(idx);
      p.push_back(e ? std::max(0.0, e->weight()) : 0.0);
    }
    return Distribution(std::move(sym), std::move(p));
  }

  const Entry* find(const std::vector<std::size_t>& index) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const Entry& e, const std::vector<std::size_t>& k) { return e.index < k; });
    return (it != entries_.end() && it->index == index) ? &*it : nullptr;
  }

  /// Dense operator on (classical registers) (x) (quantum part), classical part most significant.
  Matrix dense() const {
    std::size_t nc = 1;
    for (const auto& a : alphabets_) nc *= a.size();
    const std::size_t d = qdim();
    if (nc * d > 4096) throw InvalidArgument("CQState::dense: dimension too large");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(nc * d), static_cast<Eigen::Index>(nc * d));
    for (const auto& e : entries_) {
      std::size_t flat = 0;
      for (std::size_t i = 0; i < e.index.size(); ++i) flat = flat * alphabets_[i].size() + e.index[i];
      out.block(static_cast<Eigen::Index>(flat * d), static_cast<Eigen::Index>(flat * d), static_cast<Eigen::Index>(d),
                static_cast<Eigen::Index>(d)) = e.op;
    }
    return out;
  }

  void validate(double tol = 1e-8) const {
    for (const auto& e : entries_) {
      if (!linalg::is_hermitian(e.op)) throw InvalidArgument("CQState: block is not Hermitian");
      if (linalg::min_eigenvalue(e.op) < -kPsdTol) throw InvalidArgument("CQState: block is not PSD");
    }
    if (std::abs(total_trace() - 1.0) > tol) throw InvalidArgument("CQState: total trace is not 1");
  }

 private:
  std::vector<std::string> axes_;
  std::vector<std::vector<std::string>> alphabets_;
  linalg::SystemLayout quantum_;
  std::vector<Entry> entries_;
};

/// Post-measurement state sum |x,y><x,y| (x) block_{x,y}.
/// If A is kept the block is (sqrt(L) (x) I) rho (sqrt(L) (x) I); otherwise it is
/// Tr_A[(L (x) I) rho], which coincides with the former traced over A.
inline CQState post_measurement_cq(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout,
                                   const std::vector<std::string>& keep) {
  if (!layout.has("A")) throw InvalidArgument("post_measurement_cq: layout has no A factor");
  if (layout.dim_of("A") != povm.dim()) throw InvalidArgument("post_measurement_cq: POVM does not act on A");
  if (static_cast<std::size_t>(rho.rows()) != layout.total_dim())
    throw InvalidArgument("post_measurement_cq: state does not match layout");
  const bool keepA = std::find(keep.begin(), keep.end(), "A") != keep.end();
  const linalg::SystemLayout kept = layout.restricted(keep);

  // embed an operator on A into the full layout
  const std::size_t ia = layout.index_of("A");
  auto embed = [&](const Matrix& opA) {
    Matrix out = Matrix::Identity(1, 1);
    for (std::size_t i = 0; i < layout.size(); ++i)
      out = linalg::tensor(out, i == ia ? opA : linalg::identity(layout.factors()[i].dim));
    return out;
  };

  CQState out({"X", "Y"}, {povm.alphabetX, povm.alphabetY}, kept);
  for (std::size_t x = 0; x < povm.nx(); ++x)
    for (std::size_t y = 0; y < povm.ny(); ++y) {
      const Matrix& el = povm.element(x, y);
      if (el.cwiseAbs().maxCoeff() == 0.0) continue;
      Matrix block;
      if (keepA) {
        const Matrix s = embed(linalg::matrix_sqrt(el));
        block = linalg::partial_trace(linalg::hermitize(s * rho * s), layout, keep);
      } else {
        block = linalg::partial_trace(linalg::hermitize(embed(el) * rho), layout, keep);
        block = linalg::hermitize(block);
      }
      if (block.trace().real() <= 1e-15) continue;
      out.add({x, y}, block);
    }
  return out;
}

}  // namespace oneshot
