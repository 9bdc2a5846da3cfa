// Measurement compression with quantum side information over two links: each stream's
// codebook index is hashed, and Bob recovers it by sequential hypothesis tests using
// (coin copy, B). Every scenario decodes the same encoder transcript.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "oneshot/cdcqsi.hpp"
#include "oneshot/compression.hpp"
#include "oneshot/entropy.hpp"
#include "oneshot/hash.hpp"
#include "oneshot/region.hpp"

namespace oneshot {

/// Control state over the model's streams: sum |g><g| (x) Tr_A[(E_g (x) I) rho].
inline CQState model_control_state(const ProtocolModel& m) {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> al;
  for (const auto& s : m.streams) {
    names.push_back(s.name);
    al.push_back(s.alphabet);
  }
  CQState c(names, al, m.rest);
  for (std::size_t g = 0; g < m.tuples.size(); ++g)
    if (m.prob[g] > 0.0) c.add(m.tuples[g], m.on_rest(m.element[g]));
  return c;
}

inline std::vector<StreamQuantities> model_quantities(const ProtocolModel& m, double eps, double logConst,
                                                      const SmoothingOptions& opt = {}) {
  std::vector<std::string> names;
  std::vector<char> links;
  for (const auto& s : m.streams) {
    names.push_back(s.name);
    links.push_back(s.link);
  }
  return stream_quantities(model_control_state(m), names, links, eps, logConst, opt);
}

// ---------------------------------------------------------------------------
// Budget -> codebook sizes

struct StreamAllocation {
  std::string name;
  int rate = 0, coin = 0;  // R_a, C_a in bits
  double rateMin = 0.0, sumMin = 0.0;
};

struct ProtocolPlan {
  std::vector<StreamAllocation> allocation;
  std::vector<StreamPlan> streams;
};

/// Integer rates per stream. A link carrying U and V gives U the least integer rate (and
/// coin) meeting its thresholds and V the remainder. Side information (assisted) enlarges
/// the codebook by floor(I_H(a:B)) - 1 - ceil(log2 1/eps) bits and hashes it down to R_a.
inline ProtocolPlan plan_streams(const ProtocolModel& m, const std::vector<StreamQuantities>& q,
                                 const OneShotBudget& budget, bool assisted) {
  if (q.size() != m.streams.size()) throw InvalidArgument("plan: quantities do not match the streams");
  ProtocolPlan plan;
  const auto linkR = [&](char l) { return static_cast<int>(std::floor((l == 'X' ? budget.Rx : budget.Ry) + 1e-9)); };
  const auto linkC = [&](char l) { return static_cast<int>(std::floor((l == 'X' ? budget.Cx : budget.Cy) + 1e-9)); };
  const bool sideInfo = assisted && m.hasB;
  for (std::size_t a = 0; a < q.size(); ++a) {
    StreamAllocation al;
    al.name = q[a].name;
    al.rateMin = sideInfo ? q[a].rate_min() : q[a].rate_min_unassisted();
    al.sumMin = sideInfo ? q[a].sum_min() : q[a].sum_min_unassisted();
    const char l = m.streams[a].link;
    if (q[a].degenerate) {
      // constant register: nothing to send
    } else if (q[a].name == "U") {
      al.rate = static_cast<int>(std::floor(al.rateMin)) + 1;
      al.coin = std::max(0, static_cast<int>(std::floor(al.sumMin - al.rate)) + 1);
    } else if (q[a].name == "V") {
      int usedR = 0, usedC = 0;
      for (const auto& p : plan.allocation)
        if (p.name == "U") usedR = p.rate, usedC = p.coin;
      al.rate = linkR(l) - usedR;
      al.coin = linkC(l) - usedC;
    } else {
      al.rate = linkR(l);
      al.coin = linkC(l);
    }
    if (!q[a].degenerate) {
      if (al.rate < 0 || al.coin < 0 || !(al.rate > al.rateMin) || !(al.rate + al.coin > al.sumMin)) {
        std::ostringstream s;
        s << "stream " << al.name << ": rate " << al.rate << ", coin " << al.coin << " do not exceed thresholds "
          << al.rateMin << " (rate) and " << al.sumMin << " (rate + coin)";
        throw RateInfeasible(s.str());
      }
    }
    StreamPlan sp;
    sp.logK = al.coin;
    if (sideInfo && !q[a].degenerate) {
      const int delta = static_cast<int>(std::floor(q[a].iHyp)) - 1 - static_cast<int>(std::ceil(std::log2(1.0 / budget.eps)));
      sp.logL = std::max(0, al.rate + delta);
      sp.hashBits = al.rate;
    } else {
      sp.logL = al.rate;
    }
    plan.allocation.push_back(al);
    plan.streams.push_back(sp);
  }
  // U and V must not overdraw their link
  for (char l : {'X', 'Y'}) {
    int r = 0, c = 0;
    for (std::size_t a = 0; a < q.size(); ++a)
      if (m.streams[a].link == l) r += plan.allocation[a].rate, c += plan.allocation[a].coin;
    if (r > std::max(0, linkR(l)) || c > std::max(0, linkC(l)))
      throw RateInfeasible(std::string("link ") + l + ": stream rates exceed the budget");
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Decoding

struct StreamDecodingReport {
  std::string name;
  bool hashed = false;
  int hashBits = 0;
  int cdcRate = 0;        // ceil(H_max(KL) - I_H(KL:K'B) + log2 1/eps)
  double hmaxKL = 0.0, ihypKL = 0.0;
  std::size_t maxBucket = 0;
};

struct ScenarioOutcome {
  AdversaryScenario scenario;
  double deviation = 0.0;
  std::string transcript;
  std::uint64_t transcriptHash = 0;
  CQState output;
};

struct CentralisedResult {
  std::uint64_t seed = 0;
  std::vector<StreamDecodingReport> streams;
  std::vector<ScenarioOutcome> scenarios;
  NiceBlockReport nice;
  double worstGamma0 = 0.0;
  bool transcriptsEqual = true;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

/// Messages of one block sharing candidate list and input counts.
struct Pattern {
  std::vector<std::size_t> candidates;  // bucket symbols in ascending index order
  std::vector<double> counts;           // indices per symbol hashing to the message
  double multiplicity = 1.0;
  SequentialDecoder decoder;
};

/// Per-stream side-information state sigma^{KLK'B}, in per-index blocks beta[k][s] on B.
struct StreamSigma {
  std::vector<std::vector<Matrix>> beta;
  double total = 0.0;
};

inline StreamSigma stream_sigma(const ProtocolModel& m, const CompressionRun& run, std::size_t a,
                                const std::vector<std::vector<Matrix>>& omegaB) {
  const auto& cb = run.codebooks[a];
  const std::size_t ns = m.streams[a].alphabet.size();
  const auto dB = static_cast<Eigen::Index>(m.dB);
  StreamSigma s;
  s.beta.assign(cb.K, std::vector<Matrix>(ns, Matrix::Zero(dB, dB)));
  const double wb = 1.0 / static_cast<double>(run.num_blocks());
  for (std::size_t b = 0; b < run.num_blocks(); ++b) {
    if (!run.povms[b]) continue;
    const auto& c = *run.povms[b];
    const std::size_t k = c.block[a];
    for (std::size_t i = 0; i < c.elements.size(); ++i) {
      const auto& e = c.elements[i];
      const std::size_t sym = m.tuples[e.tuple][a];
      const double others = e.multiplicity / static_cast<double>(cb.counts[k][sym]);
      s.beta[k][sym] += (wb * others) * omegaB[b][i];
    }
  }
  for (std::size_t k = 0; k < cb.K; ++k)
    for (std::size_t x = 0; x < ns; ++x) s.total += static_cast<double>(cb.counts[k][x]) * s.beta[k][x].trace().real();
  return s;
}

/// rho and sigma blocks of the test between sigma^{KLK'B} and sigma^{KL} (x) sigma^{K'B},
/// one block per (k, symbol); `where` records the coordinates.
inline void sigma_test_blocks(const StreamCodebook& cb, const StreamSigma& s, std::vector<Matrix>& rho,
                              std::vector<Matrix>& sigma, std::vector<std::pair<std::size_t, std::size_t>>& where) {
  for (std::size_t k = 0; k < cb.K; ++k) {
    Matrix Bk = Matrix::Zero(s.beta[k][0].rows(), s.beta[k][0].cols());
    for (std::size_t x = 0; x < s.beta[k].size(); ++x) Bk += static_cast<double>(cb.counts[k][x]) * s.beta[k][x];
    Bk /= s.total;
    for (std::size_t x = 0; x < s.beta[k].size(); ++x) {
      const double n = static_cast<double>(cb.counts[k][x]);
      const double tr = s.beta[k][x].trace().real();
      if (n <= 0.0 || tr <= 0.0) continue;
      rho.push_back((n / s.total) * s.beta[k][x]);
      sigma.push_back((n * tr / s.total) * Bk);
      where.emplace_back(k, x);
    }
  }
}

}  // namespace detail

/// One encoder run per seed, exact output states for each scenario.
inline CentralisedResult centralised_protocol(const ProtocolModel& m, const ProtocolPlan& plan, double eps,
                                              std::uint64_t seed,
                                              const std::vector<AdversaryScenario>& scenarios = all_scenarios(),
                                              const CompressionOptions& copt = {}) {
  const std::size_t S = m.streams.size();
  const CompressionRun run = build_compressed_povm(m, plan.streams, eps, seed, copt);
  CentralisedResult res;
  res.seed = seed;
  res.nice = run.report;
  const std::size_t B = run.num_blocks();
  const double wb = 1.0 / static_cast<double>(B);

  // per-index output blocks of every GOOD group, on the rest and on B
  std::vector<std::vector<Matrix>> omega(B), omegaB(B);
  std::vector<Matrix> omega0(B);
  for (std::size_t b = 0; b < B; ++b) {
    if (!run.povms[b]) continue;
    const auto& c = *run.povms[b];
    res.worstGamma0 = std::max(res.worstGamma0, c.gamma0Mass);
    for (const auto& e : c.elements) {
      omega[b].push_back(m.on_rest(e.gamma));
      omegaB[b].push_back(m.rest.size() > 1 ? linalg::partial_trace(omega[b].back(), m.rest, {"B"}) : omega[b].back());
    }
    omega0[b] = m.on_rest(c.zeroElement);
  }

  // patterns per stream and coin
  std::vector<std::vector<std::vector<detail::Pattern>>> patterns(S);
  std::vector<HashScheme> hashes(S);
  std::vector<std::vector<bool>> support(S);
  for (std::size_t a = 0; a < S; ++a) {
    const auto& cb = run.codebooks[a];
    const std::size_t ns = m.streams[a].alphabet.size();
    StreamDecodingReport rep;
    rep.name = m.streams[a].name;
    patterns[a].resize(cb.K);
    if (plan.streams[a].hashBits < 0 || !m.hasB) {
      for (std::size_t k = 0; k < cb.K; ++k)
        for (std::size_t x = 0; x < ns; ++x) {
          if (!cb.counts[k][x]) continue;
          detail::Pattern p;
          p.candidates = {x};
          p.counts.assign(ns, 0.0);
          p.counts[x] = static_cast<double>(cb.counts[k][x]);
          p.decoder = sequential_decoder({Matrix::Zero(1, 1)}, m.dB);
          patterns[a][k].push_back(std::move(p));
        }
      res.streams.push_back(rep);
      continue;
    }
    rep.hashed = true;
    rep.hashBits = plan.streams[a].hashBits;
    const detail::StreamSigma sig = detail::stream_sigma(m, run, a, omegaB);
    if (sig.total <= 0.0) throw NumericalError("centralised: no GOOD mass in any block");

    // smoothing support of P' over (k, l)
    std::vector<double> pkl(cb.K * cb.L);
    for (std::size_t k = 0; k < cb.K; ++k)
      for (std::size_t l = 0; l < cb.L; ++l) pkl[k * cb.L + l] = sig.beta[k][cb.at(k, l)].trace().real() / sig.total;
    const std::vector<double> lambda = h_max_lambda(pkl, eps);
    double lsum = 0.0;
    support[a].assign(pkl.size(), false);
    for (std::size_t i = 0; i < pkl.size(); ++i) {
      lsum += lambda[i];
      support[a][i] = lambda[i] > 0.0 && pkl[i] > 0.0;
    }
    rep.hmaxKL = std::log2(lsum);

    std::vector<Matrix> rb, sb;
    std::vector<std::pair<std::size_t, std::size_t>> where;
    detail::sigma_test_blocks(cb, sig, rb, sb, where);
    const HypothesisResult ih = d_hyp_blocks(rb, sb, eps);
    rep.ihypKL = ih.value;
    rep.cdcRate = cdcqsi_rate(rep.hmaxKL, std::isfinite(ih.value) ? ih.value : 64.0, eps);
    std::map<std::pair<std::size_t, std::size_t>, Matrix> test;
    for (std::size_t i = 0; i < where.size(); ++i) test.emplace(where[i], ih.test.blocks[i]);

    auto eng = rng::stream(seed, run.attempt, rng::kStreamHash + 16 * (a + 1));
    hashes[a] = draw_hash(bits_for(cb.L), static_cast<unsigned>(plan.streams[a].hashBits), eng);
    for (std::size_t k = 0; k < cb.K; ++k) {
      std::unordered_map<std::uint64_t, std::size_t> slot;
      std::vector<std::pair<std::vector<std::size_t>, std::vector<double>>> msgs;
      for (std::size_t l = 0; l < cb.L; ++l) {
        const std::uint64_t h = hashes[a](l);
        auto [it, fresh] = slot.try_emplace(h, msgs.size());
        if (fresh) msgs.push_back({{}, std::vector<double>(ns, 0.0)});
        auto& mm = msgs[it->second];
        const std::size_t x = cb.at(k, l);
        mm.second[x] += 1.0;
        if (support[a][k * cb.L + l]) mm.first.push_back(x);
      }
      std::map<std::pair<std::vector<std::size_t>, std::vector<double>>, double> grouped;
      for (auto& mm : msgs) {
        rep.maxBucket = std::max(rep.maxBucket, mm.first.size());
        grouped[mm] += 1.0;
      }
      for (const auto& [key, mult] : grouped) {
        detail::Pattern p;
        p.candidates = key.first;
        p.counts = key.second;
        p.multiplicity = mult;
        std::vector<Matrix> tests;
        for (auto x : p.candidates) {
          auto it = test.find({k, x});
          tests.push_back(it == test.end() ? Matrix::Zero(static_cast<Eigen::Index>(m.dB), static_cast<Eigen::Index>(m.dB))
                                           : it->second);
        }
        p.decoder = sequential_decoder(tests, m.dB);
        patterns[a][k].push_back(std::move(p));
      }
    }
    res.streams.push_back(rep);
  }

  // ---- encoder transcript (one sampled run, shared by every scenario)
  std::string transcript;
  {
    auto eng = rng::stream(seed, run.attempt, rng::kStreamCoin);
    const std::size_t b = rng::uniform_index(eng, B);
    std::ostringstream t;
    t << "k=";
    for (std::size_t a = 0; a < S; ++a) t << (a ? "," : "") << run.report.blocks[b][a];
    if (!run.povms[b]) {
      t << ";abort";
    } else {
      const auto& c = *run.povms[b];
      std::vector<double> pr;
      for (const auto& e : c.elements) pr.push_back(std::max(0.0, (e.multiplicity * e.gamma * m.rhoA).trace().real()));
      pr.push_back(c.gamma0Mass);
      const std::size_t o = rng::sample(eng, pr);
      if (o == c.elements.size()) {
        t << ";abort";
      } else {
        const auto& tup = m.tuples[c.elements[o].tuple];
        for (std::size_t a = 0; a < S; ++a) {
          const auto& cb = run.codebooks[a];
          const std::size_t k = c.block[a], x = tup[a];
          const std::size_t r = rng::uniform_index(eng, cb.counts[k][x]);
          t << ";" << m.streams[a].name << "=";
          if (cb.explicit_samples()) {
            std::size_t seen = 0, l = 0;
            for (; l < cb.L; ++l)
              if (cb.at(k, l) == x && seen++ == r) break;
            if (plan.streams[a].hashBits >= 0 && m.hasB)
              t << hashes[a](l);
            else
              t << l;
          } else {
            t << m.streams[a].alphabet[x] << "#" << r;
          }
        }
      }
    }
    transcript = t.str();
  }

  // ---- exact decoding per scenario
  const Matrix restState = m.rest_state();
  for (const auto& sc : scenarios) {
    if (!sc.xLinkOn && !sc.yLinkOn) throw InvalidArgument("scenario: at least one link must be on");
    ScenarioOutcome out;
    out.scenario = sc;
    out.transcript = transcript;  // the bytes handed to this scenario's decoder
    out.transcriptHash = fnv1a(out.transcript);
    out.output = m.empty_output(sc);
    std::vector<bool> on(S);
    for (std::size_t a = 0; a < S; ++a) on[a] = m.streams[a].link == 'X' ? sc.xLinkOn : sc.yLinkOn;
    const auto regs = m.registers(sc);

    // decoded stream symbols (npos = abort) -> output index
    const auto outIndex = [&](const std::vector<std::size_t>& sym) {
      std::vector<std::size_t> idx;
      for (const auto& r : regs) {
        const char link = r[0];
        std::optional<std::size_t> v;
        bool abort = false;
        for (std::size_t a = 0; a < S; ++a) {
          if (m.streams[a].link != link) continue;
          if (sym[a] == SIZE_MAX) abort = true;
          else v = v ? std::max(*v, sym[a]) : sym[a];
        }
        idx.push_back(abort || !v ? m.abort_index(r) : *v);
      }
      return idx;
    };
    const std::vector<std::size_t> abortIdx = output_index(m, sc, std::nullopt);

    for (std::size_t b = 0; b < B; ++b) {
      if (!run.povms[b]) {
        out.output.add(abortIdx, wb * restState);
        continue;
      }
      const auto& c = *run.povms[b];
      out.output.add(abortIdx, wb * omega0[b]);
      // choose one pattern per on-stream; off streams contribute all their indices
      std::vector<std::size_t> choice(S, 0);
      std::vector<std::size_t> limit(S, 1);
      for (std::size_t a = 0; a < S; ++a)
        if (on[a]) limit[a] = patterns[a][c.block[a]].size();
      for (;;) {
        double w = wb;
        Matrix W = Matrix::Zero(restState.rows(), restState.cols());
        for (std::size_t a = 0; a < S; ++a)
          if (on[a]) w *= patterns[a][c.block[a]][choice[a]].multiplicity;
        for (std::size_t i = 0; i < c.elements.size(); ++i) {
          const auto& tup = m.tuples[c.elements[i].tuple];
          double n = 1.0;
          for (std::size_t a = 0; a < S && n > 0.0; ++a) {
            const std::size_t k = c.block[a];
            n *= on[a] ? patterns[a][k][choice[a]].counts[tup[a]] : static_cast<double>(run.codebooks[a].counts[k][tup[a]]);
          }
          if (n > 0.0) W += n * omega[b][i];
        }
        if (W.cwiseAbs().maxCoeff() > 0.0) {
          // sequential decoding over the on-streams in stream order
          std::vector<std::size_t> sym(S, SIZE_MAX);
          const std::size_t restR = m.dRest / m.dB;
          const auto rec = [&](auto&& self, std::size_t a, const Matrix& state) -> void {
            if (a == S) {
              out.output.add(outIndex(sym), w * state);
              return;
            }
            if (!on[a]) {
              self(self, a + 1, state);
              return;
            }
            const auto& p = patterns[a][c.block[a]][choice[a]];
            for (std::size_t j = 0; j < p.candidates.size(); ++j) {
              sym[a] = p.candidates[j];
              self(self, a + 1, linalg::hermitize(apply_local(p.decoder.accept[j], state, restR)));
            }
            if (p.decoder.abort.cwiseAbs().maxCoeff() > 0.0) {
              sym[a] = SIZE_MAX;
              self(self, a + 1, linalg::hermitize(apply_local(p.decoder.abort, state, restR)));
            }
            sym[a] = SIZE_MAX;
          };
          rec(rec, 0, W);
        }
        std::size_t a = 0;
        for (; a < S; ++a) {
          if (++choice[a] < limit[a]) break;
          choice[a] = 0;
        }
        if (a == S) break;
      }
    }
    out.output.prune(0.0);
    out.deviation = cq_distance(out.output, m.ideal(sc));
    res.scenarios.push_back(std::move(out));
  }
  for (const auto& s : res.scenarios)
    res.transcriptsEqual = res.transcriptsEqual && s.transcript == res.scenarios.front().transcript &&
                           s.transcriptHash == res.scenarios.front().transcriptHash;
  return res;
}

// ---------------------------------------------------------------------------
// Composition with side information (single link)

struct CompositionResult {
  double eps0 = 0.0;
  int logK = 0, logL = 0, hashBits = 0;
  double netRateX = 0.0;        // log L - I_H^{eps0/2}(X:B) + 1
  double deviation = 0.0;
  double ihypKL = 0.0;          // I_H^{eps0}(KL : K'B) on the compressed output
  double ihypXB = 0.0;          // I_H^{eps0/2}(X:B) on the control state
  double compositionCheck = 0.0;
  CentralisedResult run;
};

/// Point-to-point protocol (Y summed out): compress, then hash with (K', B) as side information.
inline CompositionResult compose_with_side_information(const ProtocolModel& m, const ProtocolPlan& plan, double eps,
                                                       std::uint64_t seed, const CompressionOptions& copt = {}) {
  if (!m.singleLink) throw InvalidArgument("compose: expected a single-link model");
  CompositionResult r;
  r.eps0 = std::pow(eps, 0.1);
  r.logK = plan.streams[0].logK;
  r.logL = plan.streams[0].logL;
  r.hashBits = plan.streams[0].hashBits;
  r.run = centralised_protocol(m, plan, eps, seed, {{true, false}}, copt);
  r.deviation = r.run.scenarios[0].deviation;

  const CQState control = model_control_state(m);
  r.ihypXB = m.hasB ? i_hyp(control.trace_quantum({"B"}), {"X"}, r.eps0 / 2.0).value : 0.0;
  r.netRateX = static_cast<double>(r.logL) - r.ihypXB + 1.0;

  // I_H^{eps0}(KL : K'B) of the compressed output, same grouped blocks as the decoder
  const CompressionRun run = build_compressed_povm(m, plan.streams, eps, seed, copt);
  std::vector<std::vector<Matrix>> omegaB(run.num_blocks());
  for (std::size_t b = 0; b < run.num_blocks(); ++b)
    if (run.povms[b])
      for (const auto& e : run.povms[b]->elements) {
        const Matrix o = m.on_rest(e.gamma);
        omegaB[b].push_back(m.rest.size() > 1 ? linalg::partial_trace(o, m.rest, {"B"}) : o);
      }
  const detail::StreamSigma sig = detail::stream_sigma(m, run, 0, omegaB);
  std::vector<Matrix> rb, sb;
  std::vector<std::pair<std::size_t, std::size_t>> where;
  detail::sigma_test_blocks(run.codebooks[0], sig, rb, sb, where);
  r.ihypKL = d_hyp_blocks(rb, sb, r.eps0).value;
  r.compositionCheck = r.ihypKL - static_cast<double>(r.logK) - r.ihypXB;
  return r;
}

}  // namespace oneshot
