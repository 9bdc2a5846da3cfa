// Measurement compression: random codebooks per outcome stream, nice blocks, GOOD-set
// based compressed POVMs, and the unassisted simulation.
//
// A "stream" is one classical register the encoder communicates: X and Y for the plain
// protocol, or U, V (both sent over the split register's link) plus the other register
// when rate splitting. Tuples of stream symbols index the POVM elements.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oneshot/covering.hpp"
#include "oneshot/entropy.hpp"
#include "oneshot/error.hpp"
#include "oneshot/quantum.hpp"
#include "oneshot/rng.hpp"
#include "oneshot/split.hpp"

namespace oneshot {

/// Rates in bits: R_* message, C_* public coin, per link.
struct OneShotBudget {
  double eps = 0.01;
  double Rx = 0, Ry = 0, Cx = 0, Cy = 0;
  double theta = 0.0;
  SplitAxis splitAxis = SplitAxis::X;
  std::optional<double> logConst;  // overrides c(eps)
};

/// Additive constant c(eps) = 2 log2(2/sqrt(eps)) + log2(48/eps).
inline double log_constant(double eps) { return 2.0 * std::log2(2.0 / std::sqrt(eps)) + std::log2(48.0 / eps); }

struct AdversaryScenario {
  bool xLinkOn = true, yLinkOn = true;
  std::string name() const { return xLinkOn && yLinkOn ? "both" : (xLinkOn ? "x-only" : "y-only"); }
};

inline std::vector<AdversaryScenario> all_scenarios() { return {{true, true}, {true, false}, {false, true}}; }

// ---------------------------------------------------------------------------
// Protocol model

struct StreamSpec {
  std::string name;  // X, Y, U or V
  char link = 'X';
  std::vector<std::string> alphabet;
  std::vector<double> marginal;
};

struct ProtocolModel {
  std::vector<StreamSpec> streams;
  std::vector<std::vector<std::size_t>> tuples;  // stream symbols per tuple
  std::vector<Matrix> element;                   // POVM element on A
  std::vector<double> prob, t;                   // P(g) and P(g) / prod_a P_a(g_a)
  std::vector<Matrix> rhoG;                      // sqrt(rho) E_g sqrt(rho) / P(g)
  std::vector<std::pair<std::size_t, std::size_t>> output;  // (x, y) reported for the tuple
  std::vector<std::string> alphabetX, alphabetY;
  bool singleLink = false;                       // only the X register exists
  double theta = 0.0;
  SplitAxis splitAxis = SplitAxis::X;
  bool split = false;

  Matrix rhoA, rhoInvSqrt, rhoSupport;
  Matrix rhoArest;  // full state reordered to (A, B, others)
  linalg::SystemLayout rest;
  std::size_t dA = 1, dRest = 1, dB = 1;
  bool hasB = false;

  /// Tr_A[(op (x) I) rho] on the rest (B first).
  Matrix on_rest(const Matrix& opA) const {
    const auto dr = static_cast<Eigen::Index>(dRest), da = static_cast<Eigen::Index>(dA);
    Matrix out = Matrix::Zero(dr, dr);
    // (op (x) I) rho, then trace over A
    for (Eigen::Index a = 0; a < da; ++a)
      for (Eigen::Index b = 0; b < da; ++b) {
        const cplx c = opA(a, b);
        if (c == cplx(0.0)) continue;
        out += c * rhoArest.block(b * dr, a * dr, dr, dr);
      }
    return linalg::hermitize(out);
  }

  Matrix rest_state() const { return on_rest(linalg::identity(dA)); }

  std::vector<std::string> registers(const AdversaryScenario& s) const {
    std::vector<std::string> out;
    if (s.xLinkOn) out.push_back("X");
    if (s.yLinkOn && !singleLink) out.push_back("Y");
    return out;
  }

  /// Output alphabet for a register: the POVM alphabet plus the abort symbol.
  std::vector<std::string> output_alphabet(const std::string& reg) const {
    auto a = reg == "X" ? alphabetX : alphabetY;
    a.push_back(kBottom);
    return a;
  }

  CQState empty_output(const AdversaryScenario& s) const {
    const auto regs = registers(s);
    std::vector<std::vector<std::string>> al;
    for (const auto& r : regs) al.push_back(output_alphabet(r));
    return CQState(regs, al, rest);
  }

  /// sum |x,y><x,y| (x) Tr_A[(Lambda_{x,y} (x) I) rho], restricted to the scenario's registers.
  CQState ideal(const AdversaryScenario& s) const {
    CQState full = empty_output({true, !singleLink});
    for (std::size_t g = 0; g < tuples.size(); ++g) {
      if (prob[g] <= 0.0) continue;
      if (singleLink)
        full.add({output[g].first}, on_rest(element[g]));
      else
        full.add({output[g].first, output[g].second}, on_rest(element[g]));
    }
    return full.marginal(registers(s));
  }

  std::size_t abort_index(const std::string& reg) const { return reg == "X" ? alphabetX.size() : alphabetY.size(); }
};

/// Stream layout for (theta, axis): the split register's U part, the other register, the V
/// part; point-mass parts (theta in {0, 1}) are dropped, giving the plain orders.
/// With `singleLink` the Y register is summed out and only X is compressed.
inline ProtocolModel make_model(const JointPOVM& povm, const Matrix& rho, const linalg::SystemLayout& layout,
                                double theta = 0.0, SplitAxis axis = SplitAxis::X, bool singleLink = false) {
  povm.validate();
  if (!layout.has("A")) throw InvalidInstance("protocol: layout has no A factor");
  if (layout.dim_of("A") != povm.dim()) throw InvalidInstance("protocol: POVM does not act on A");
  if (static_cast<std::size_t>(rho.rows()) != layout.total_dim()) throw InvalidInstance("protocol: state/layout mismatch");
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("protocol: theta must lie in [0, 1]");

  ProtocolModel m;
  m.alphabetX = povm.alphabetX;
  m.alphabetY = singleLink ? std::vector<std::string>{"-"} : povm.alphabetY;
  m.singleLink = singleLink;
  m.theta = theta;
  m.splitAxis = axis;
  m.dA = povm.dim();

  // reorder to (A, B, others)
  std::vector<std::size_t> perm{layout.index_of("A")};
  std::vector<linalg::SystemLayout::Factor> restF;
  if (layout.has("B")) {
    perm.push_back(layout.index_of("B"));
    restF.push_back({"B", layout.dim_of("B")});
    m.hasB = layout.dim_of("B") > 1;
    m.dB = layout.dim_of("B");
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& f = layout.factors()[i];
    if (f.label == "A" || f.label == "B") continue;
    perm.push_back(i);
    restF.push_back(f);
  }
  m.rest = linalg::SystemLayout(restF);
  m.dRest = m.rest.size() ? m.rest.total_dim() : 1;
  m.rhoArest = linalg::permute_subsystems(rho, layout.dims(), perm);
  m.rhoA = linalg::partial_trace(rho, layout, {"A"});
  m.rhoInvSqrt = linalg::pseudo_inverse_sqrt(m.rhoA);
  m.rhoSupport = linalg::support_projector(m.rhoA);
  const Matrix sq = linalg::matrix_sqrt(m.rhoA);

  const auto addTuple = [&](std::vector<std::size_t> tup, const Matrix& el, std::pair<std::size_t, std::size_t> out) {
    if (el.cwiseAbs().maxCoeff() == 0.0) return;
    m.tuples.push_back(std::move(tup));
    m.element.push_back(el);
    m.output.push_back(out);
  };

  const std::size_t nx = povm.nx(), ny = povm.ny();
  if (singleLink) {
    m.streams.push_back({"X", 'X', povm.alphabetX, {}});
    for (std::size_t x = 0; x < nx; ++x) addTuple({x}, povm.marginal_x(x), {x, 0});
  } else if (theta > 0.0 && theta < 1.0) {
    m.split = true;
    const SplitPOVM sp = split_povm(povm, m.rhoA, theta, axis);
    const bool sx = axis == SplitAxis::X;
    const char splitLink = sx ? 'X' : 'Y', otherLink = sx ? 'Y' : 'X';
    const std::size_t n = sp.alphabetSplit.size(), w = sp.alphabetOther.size();
    m.streams.push_back({"U", splitLink, sp.alphabetSplit, {}});
    m.streams.push_back({std::string(1, otherLink), otherLink, sp.alphabetOther, {}});
    m.streams.push_back({"V", splitLink, sp.alphabetSplit, {}});
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t o = 0; o < w; ++o)
        for (std::size_t v = 0; v < n; ++v) {
          const std::size_t mx = std::max(u, v);
          addTuple({u, o, v}, sp.element(u, v, o), sx ? std::pair{mx, o} : std::pair{o, mx});
        }
  } else {
    // theta = 0 keeps the split register first, theta = 1 puts it last
    const bool xFirst = (axis == SplitAxis::X) == (theta == 0.0);
    if (xFirst) {
      m.streams.push_back({"X", 'X', povm.alphabetX, {}});
      m.streams.push_back({"Y", 'Y', povm.alphabetY, {}});
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) addTuple({x, y}, povm.element(x, y), {x, y});
    } else {
      m.streams.push_back({"Y", 'Y', povm.alphabetY, {}});
      m.streams.push_back({"X", 'X', povm.alphabetX, {}});
      for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x) addTuple({y, x}, povm.element(x, y), {x, y});
    }
  }

  for (auto& s : m.streams) s.marginal.assign(s.alphabet.size(), 0.0);
  for (std::size_t g = 0; g < m.tuples.size(); ++g) {
    const double p = std::max(0.0, (m.element[g] * m.rhoA).trace().real());
    m.prob.push_back(p);
    for (std::size_t a = 0; a < m.streams.size(); ++a) m.streams[a].marginal[m.tuples[g][a]] += p;
  }
  for (std::size_t g = 0; g < m.tuples.size(); ++g) {
    const double p = m.prob[g];
    double prod = 1.0;
    for (std::size_t a = 0; a < m.streams.size(); ++a) prod *= m.streams[a].marginal[m.tuples[g][a]];
    m.t.push_back(p > 0.0 ? p / prod : 0.0);
    m.rhoG.push_back(p > 0.0 ? Matrix(linalg::hermitize(sq * m.element[g] * sq) / p)
                             : Matrix::Zero(m.rhoA.rows(), m.rhoA.cols()));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Codebooks

/// Codebook of one stream: K blocks of L samples. Symbol counts per block are always
/// present; the sample list is kept only when a hash needs individual indices.
struct StreamCodebook {
  std::size_t K = 1, L = 1;
  std::vector<std::vector<std::size_t>> counts;  // [k][symbol]
  std::vector<std::uint16_t> samples;            // k * L + l, when explicit
  bool explicit_samples() const { return !samples.empty(); }
  std::size_t at(std::size_t k, std::size_t l) const { return samples[k * L + l]; }
};

struct StreamPlan {
  int logK = 0, logL = 0;
  int hashBits = -1;  // < 0: the index is sent as is (no side information)
};

namespace detail {

/// Multinomial counts via successive binomials (deterministic for a given engine).
inline std::vector<std::size_t> multinomial(rng::Engine& eng, std::size_t n, const std::vector<double>& p) {
  std::vector<std::size_t> c(p.size(), 0);
  double mass = 0.0;
  for (double v : p) mass += v;
  std::size_t left = n;
  for (std::size_t i = 0; i < p.size() && left > 0; ++i) {
    if (p[i] <= 0.0) continue;
    const double q = std::min(1.0, p[i] / mass);
    std::size_t ci = left;
    if (q < 1.0) {
      std::binomial_distribution<long long> bin(static_cast<long long>(left), q);
      ci = static_cast<std::size_t>(bin(eng));
    }
    c[i] = ci;
    left -= ci;
    mass -= p[i];
    if (mass <= 0.0) break;
  }
  if (left > 0) {  // rounding leftovers go to the last supported symbol
    for (std::size_t i = p.size(); i-- > 0;)
      if (p[i] > 0.0) {
        c[i] += left;
        break;
      }
  }
  return c;
}

inline constexpr std::size_t kMaxExplicitSamples = std::size_t{1} << 22;
inline constexpr std::size_t kMaxBlocks = 4096;

}  // namespace detail

inline StreamCodebook draw_stream_codebook(const StreamSpec& s, std::size_t K, std::size_t L, bool explicitSamples,
                                           std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  StreamCodebook cb;
  cb.K = K;
  cb.L = L;
  if (explicitSamples) {
    if (K * L > detail::kMaxExplicitSamples) throw RateInfeasible("codebook: K*L above 2^22 explicit samples");
    const Codebook c = draw_codebook(s.name, Distribution(s.alphabet, s.marginal), K, L, seed, trial, stream);
    cb.samples = c.samples;
    for (std::size_t k = 0; k < K; ++k) cb.counts.push_back(c.block_counts(k));
  } else {
    auto eng = rng::stream(seed, trial, stream);
    for (std::size_t k = 0; k < K; ++k) cb.counts.push_back(detail::multinomial(eng, L, s.marginal));
  }
  return cb;
}

// ---------------------------------------------------------------------------
// Compressed POVMs

/// One GOOD group: all index tuples whose codewords form the stream tuple `tuple`.
/// Every member index carries the same element `gamma`.
struct GroupElement {
  std::size_t tuple = 0;
  double multiplicity = 0.0;  // number of index tuples in the group
  double t = 0.0;             // likelihood ratio of the group
  Matrix gamma;
};

struct CompressedPOVM {
  std::vector<std::size_t> block;  // coin per stream
  double deviation = 0.0;
  std::vector<GroupElement> elements;
  Matrix zeroElement;
  double factor = 1.0;       // normalization actually used
  double proofFactor = 1.0;  // S (1 + (2 eps_m)^{1/4}) from the certificate
  double gamma0Mass = 0.0;   // Tr[gamma_0 rho]
  double probGood = 0.0, opSlack = 0.0, maxCloseness = 0.0, closeBound = 0.0;
};

struct NiceBlockReport {
  std::vector<std::vector<std::size_t>> blocks;
  std::vector<bool> nice;
  std::vector<double> deviation;
  double fractionNice = 0.0;
  std::size_t attempts = 0;
};

struct CompressionRun {
  std::vector<StreamPlan> plan;
  std::vector<StreamCodebook> codebooks;
  NiceBlockReport report;
  std::vector<std::optional<CompressedPOVM>> povms;  // per block, nice blocks only
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::size_t attempt = 0;  // trial index that satisfied event E

  std::size_t num_blocks() const { return report.blocks.size(); }
};

struct CompressionOptions {
  std::size_t retryBudget = 8;
  bool explicitCodebooks = false;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> enumerate_blocks(const std::vector<std::size_t>& K) {
  std::vector<std::vector<std::size_t>> out;
  std::size_t total = 1;
  for (auto k : K) total *= k;
  if (total > kMaxBlocks) throw RateInfeasible("compression: more than 4096 coin blocks");
  std::vector<std::size_t> cur(K.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t rem = n;
    for (std::size_t i = K.size(); i-- > 0;) {
      cur[i] = rem % K[i];
      rem /= K[i];
    }
    out.push_back(cur);
  }
  return out;
}

/// Groups present in a block: tuples with positive probability whose symbols all occur.
inline std::vector<std::size_t> block_groups(const ProtocolModel& m, const std::vector<StreamCodebook>& cbs,
                                             const std::vector<std::size_t>& block, std::vector<double>& mult) {
  std::vector<std::size_t> out;
  mult.clear();
  for (std::size_t g = 0; g < m.tuples.size(); ++g) {
    if (m.prob[g] <= 0.0) continue;
    double n = 1.0;
    for (std::size_t a = 0; a < m.streams.size(); ++a) n *= static_cast<double>(cbs[a].counts[block[a]][m.tuples[g][a]]);
    if (n <= 0.0) continue;
    out.push_back(g);
    mult.push_back(n);
  }
  return out;
}

inline CompressedPOVM compress_block(const ProtocolModel& m, const std::vector<StreamCodebook>& cbs,
                                     const std::vector<std::size_t>& block, const std::vector<std::size_t>& groups,
                                     const std::vector<double>& mult, double deviation) {
  double Ltot = 1.0;
  for (const auto& cb : cbs) Ltot *= static_cast<double>(cb.L);
  std::vector<Matrix> parts;
  std::vector<double> w;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    parts.push_back(m.t[groups[i]] * m.rhoG[groups[i]]);
    w.push_back(mult[i] / Ltot);
  }
  const GoodSetCertificate cert = extract_good_set_transformed(parts, w, m.rhoA, std::max(deviation, 1e-12));

  CompressedPOVM c;
  c.block = block;
  c.deviation = deviation;
  c.proofFactor = cert.factor;
  c.probGood = cert.probGood;
  c.maxCloseness = cert.maxCloseness;
  c.closeBound = cert.closeBound;
  c.opSlack = cert.opSlack;

  // tightest normalization keeping gamma_0 >= 0
  Matrix sum = Matrix::Zero(m.rhoA.rows(), m.rhoA.cols());
  std::vector<Matrix> shaped(groups.size());
  for (auto i : cert.good) {
    shaped[i] = linalg::hermitize(m.rhoInvSqrt * cert.primed[i] * m.rhoInvSqrt);
    sum += cert.scale[i] * shaped[i];
  }
  c.factor = cert.good.empty() ? 1.0 : std::max(linalg::max_eigenvalue(linalg::hermitize(sum)), 1e-300);
  if (c.factor > c.proofFactor * (1.0 + 1e-9) + 1e-12)
    throw NumericalError("compressed POVM: normalization exceeds the operator-inequality bound");

  Matrix total = Matrix::Zero(m.rhoA.rows(), m.rhoA.cols());
  for (auto i : cert.good) {
    GroupElement e;
    e.tuple = groups[i];
    e.multiplicity = mult[i];
    e.t = m.t[groups[i]];
    e.gamma = (e.t / Ltot / c.factor) * shaped[i];
    total += e.multiplicity * e.gamma;
    c.elements.push_back(std::move(e));
  }
  c.zeroElement = linalg::hermitize(m.rhoSupport - total);
  c.gamma0Mass = std::max(0.0, (c.zeroElement * m.rhoA).trace().real());
  return c;
}

}  // namespace detail

/// Draws the codebooks (one stream per register), flags nice blocks and builds the compressed
/// POVM of every nice block. Event E (fraction of nice blocks >= 1 - eps^{1/4}) failing
/// triggers a redraw with the next trial index; after `retryBudget` draws the run fails.
inline CompressionRun build_compressed_povm(const ProtocolModel& m, const std::vector<StreamPlan>& plan, double eps,
                                            std::uint64_t seed, const CompressionOptions& opt = {}) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("compression: eps must lie in (0, 1)");
  if (plan.size() != m.streams.size()) throw InvalidArgument("compression: one plan entry per stream expected");
  std::vector<std::size_t> K;
  for (const auto& p : plan) {
    if (p.logK < 0 || p.logL < 0 || p.logK > 12 || p.logL > 40) throw RateInfeasible("compression: codebook size out of range");
    K.push_back(std::size_t{1} << p.logK);
  }
  const auto blocks = detail::enumerate_blocks(K);
  const double niceCut = std::sqrt(eps), needed = 1.0 - std::pow(eps, 0.25);

  for (std::size_t attempt = 0; attempt < std::max<std::size_t>(1, opt.retryBudget); ++attempt) {
    CompressionRun run;
    run.plan = plan;
    run.eps = eps;
    run.seed = seed;
    run.attempt = attempt;
    for (std::size_t a = 0; a < m.streams.size(); ++a) {
      const bool expl = opt.explicitCodebooks || plan[a].hashBits >= 0;
      run.codebooks.push_back(draw_stream_codebook(m.streams[a], K[a], std::size_t{1} << plan[a].logL, expl, seed,
                                                   attempt, 16 + a));
    }
    double Ltot = 1.0;
    for (const auto& cb : run.codebooks) Ltot *= static_cast<double>(cb.L);

    run.report.blocks = blocks;
    run.report.attempts = attempt + 1;
    std::size_t niceCount = 0;
    std::vector<std::vector<std::size_t>> groups(blocks.size());
    std::vector<std::vector<double>> mults(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      groups[b] = detail::block_groups(m, run.codebooks, blocks[b], mults[b]);
      Matrix avg = Matrix::Zero(m.rhoA.rows(), m.rhoA.cols());
      for (std::size_t i = 0; i < groups[b].size(); ++i)
        avg += (mults[b][i] / Ltot * m.t[groups[b][i]]) * m.rhoG[groups[b][i]];
      const double dev = linalg::trace_norm_distance(avg, m.rhoA);
      const bool nice = dev <= niceCut && !groups[b].empty();
      run.report.deviation.push_back(dev);
      run.report.nice.push_back(nice);
      niceCount += nice;
    }
    run.report.fractionNice = static_cast<double>(niceCount) / static_cast<double>(blocks.size());
    if (run.report.fractionNice < needed) continue;
    run.povms.resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (run.report.nice[b])
        run.povms[b] = detail::compress_block(m, run.codebooks, blocks[b], groups[b], mults[b], run.report.deviation[b]);
    return run;
  }
  throw RetryBudgetExhausted("compression: fewer than (1 - eps^{1/4}) nice blocks after " +
                             std::to_string(opt.retryBudget) + " codebook draws");
}

// ---------------------------------------------------------------------------
// Output states and distances

/// sum over classical symbols of the trace distance between blocks (missing blocks count as 0).
inline double cq_distance(const CQState& a, const CQState& b) {
  if (a.axes() != b.axes()) throw InvalidArgument("cq_distance: register mismatch");
  double d = 0.0;
  for (const auto& e : a.entries()) {
    const auto* f = b.find(e.index);
    d += f ? linalg::trace_norm_distance(e.op, f->op) : linalg::trace_norm(e.op);
  }
  for (const auto& f : b.entries())
    if (!a.find(f.index)) d += linalg::trace_norm(f.op);
  return d;
}

/// Output index of a tuple (or the abort symbol) in the scenario's registers.
inline std::vector<std::size_t> output_index(const ProtocolModel& m, const AdversaryScenario& s,
                                             std::optional<std::size_t> tuple) {
  std::vector<std::size_t> idx;
  for (const auto& r : m.registers(s)) {
    if (!tuple)
      idx.push_back(m.abort_index(r));
    else
      idx.push_back(r == "X" ? m.output[*tuple].first : m.output[*tuple].second);
  }
  return idx;
}

struct SimulationResult {
  CQState outputState;
  CQState idealState;
  double deviation = 0.0;
};

/// Exact output of the compressed measurement with public coins averaged: the codeword
/// maps send each index tuple to its stream symbols; gamma_0 and non-nice blocks abort.
inline SimulationResult simulate_unassisted(const ProtocolModel& m, const CompressionRun& run,
                                            const AdversaryScenario& s = {}) {
  if (!s.xLinkOn && !s.yLinkOn) throw InvalidArgument("scenario: at least one link must be on");
  SimulationResult r;
  r.outputState = m.empty_output(s);
  const double wb = 1.0 / static_cast<double>(run.num_blocks());
  const Matrix restState = m.rest_state();
  for (std::size_t b = 0; b < run.num_blocks(); ++b) {
    if (!run.povms[b]) {
      r.outputState.add(output_index(m, s, std::nullopt), wb * restState);
      continue;
    }
    const auto& c = *run.povms[b];
    for (const auto& e : c.elements)
      r.outputState.add(output_index(m, s, e.tuple), m.on_rest((wb * e.multiplicity) * e.gamma));
    r.outputState.add(output_index(m, s, std::nullopt), m.on_rest(wb * c.zeroElement));
  }
  r.outputState.prune(0.0);
  r.idealState = m.ideal(s);
  r.deviation = cq_distance(r.outputState, r.idealState);
  return r;
}

}  // namespace oneshot
