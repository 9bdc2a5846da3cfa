// Classical data compression with quantum side information: hash the message,
// decode sequentially inside the bucket with the hypothesis-test operators.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "oneshot/entropy.hpp"
#include "oneshot/error.hpp"
#include "oneshot/hash.hpp"
#include "oneshot/parallel.hpp"
#include "oneshot/quantum.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

struct CdcqsiOptions {
  std::size_t hashDraws = 100;
  std::size_t maxRedraws = 64;   // per draw, for oversized buckets
  double bucketSlackBits = 5.0;  // buckets above 2^{I_H + slack} are redrawn
  int rateOverride = -1;         // use this many hash bits instead of the formula
};

struct CdcqsiResult {
  int rate = 0;
  double hmax = 0.0, ihyp = 0.0;
  double avgError = 0.0;                 // mean over hash draws
  std::vector<double> errorPerDraw;
  double outputDistance = 0.0;           // mean over draws of ||rho^{X Xhat B} - ideal||_1
  double averagedOutputDistance = 0.0;   // distance of the draw-averaged output
  double errorBound = 0.0;               // sqrt(2 eps) + eps
  double distanceBound = 0.0;            // 2 eps', eps' = 2 sqrt(sqrt(2 eps) + eps) + 2 eps
  std::size_t redraws = 0;
  std::size_t maxBucket = 0;
  CQState outputState;                   // averaged over hash draws, registers (X, Xhat)
};

inline int cdcqsi_rate(double hmax, double ihyp, double eps) {
  const double r = std::ceil(hmax - ihyp + std::log2(1.0 / eps) - 1e-12);
  return static_cast<int>(std::max(0.0, r));
}

/// `cq` has one classical register (the message) and a quantum part held by the decoder.
inline CdcqsiResult cdc_qsi(const CQState& cq, double eps, std::uint64_t seed, const CdcqsiOptions& opt = {}) {
  check_eps(eps);
  if (eps == 0.0) throw InvalidArgument("cdc_qsi: eps must be positive");
  if (cq.axes().size() != 1) throw InvalidArgument("cdc_qsi: expected a single classical register");
  const std::string ax = cq.axes()[0];
  const auto& alphabet = cq.alphabets()[0];
  const std::size_t n = alphabet.size();
  if (n > 64) throw InvalidArgument("cdc_qsi: alphabet larger than 64");
  const std::size_t d = cq.qdim();

  const Distribution P = cq.distribution({ax});
  const HmaxSolution hs = h_max_smooth(P, eps);
  const HypothesisResult ih = i_hyp(cq, {ax}, eps);

  CdcqsiResult res;
  res.hmax = hs.value;
  res.ihyp = ih.value;
  res.rate = opt.rateOverride >= 0 ? opt.rateOverride : cdcqsi_rate(hs.value, std::isfinite(ih.value) ? ih.value : 64.0, eps);
  if (res.rate > 64) throw RateInfeasible("cdc_qsi: rate above 64 bits");
  res.errorBound = std::sqrt(2.0 * eps) + eps;
  res.distanceBound = 2.0 * (2.0 * std::sqrt(res.errorBound) + 2.0 * eps);

  // per-symbol normalized states and tests (entries are sorted by symbol index)
  std::vector<Matrix> state(n, Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
  std::vector<Matrix> test(n, Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
  for (std::size_t i = 0; i < cq.entries().size(); ++i) {
    const auto& e = cq.entries()[i];
    state[e.index[0]] = e.op / e.weight();
    test[e.index[0]] = ih.test.blocks[i];
  }
  std::vector<bool> inSupport(n, false);
  for (std::size_t x = 0; x < n; ++x) inSupport[x] = hs.subdistribution.probs[x] > 0.0;

  const unsigned inBits = bits_for(n);
  const double bucketCap = std::isfinite(ih.value) ? std::exp2(ih.value + opt.bucketSlackBits) : 1e300;

  struct Draw {
    double error = 0.0, distance = 0.0;
    std::size_t redraws = 0, maxBucket = 0;
    std::vector<std::pair<std::pair<std::size_t, std::size_t>, Matrix>> blocks;  // ((x, xhat), op)
  };
  const auto draws = parallel_map(opt.hashDraws, [&](std::size_t t) {
    Draw dr;
    auto eng = rng::stream(seed, t, rng::kStreamHash);
    std::map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (;;) {
      const HashScheme h = draw_hash(inBits, static_cast<unsigned>(res.rate), eng);
      buckets.clear();
      std::vector<std::uint64_t> image(n);
      for (std::size_t x = 0; x < n; ++x) image[x] = h(x);
      for (std::size_t x = 0; x < n; ++x)
        if (inSupport[x]) buckets[image[x]].push_back(x);
      std::size_t big = 0;
      for (const auto& [k, v] : buckets) big = std::max(big, v.size());
      if (static_cast<double>(big) > bucketCap && dr.redraws < opt.maxRedraws) {
        ++dr.redraws;
        continue;
      }
      dr.maxBucket = big;
      // decode every message exactly
      std::map<std::uint64_t, SequentialDecoder> decoders;
      for (const auto& [k, cands] : buckets) {
        std::vector<Matrix> tests;
        for (auto c : cands) tests.push_back(test[c]);
        decoders.emplace(k, sequential_decoder(tests, d));
      }
      for (std::size_t x = 0; x < n; ++x) {
        const double px = P.probs[x];
        if (px <= 0.0) continue;
        auto it = buckets.find(image[x]);
        double correct = 0.0;
        std::vector<std::pair<std::size_t, Matrix>> outs;  // (xhat, block); n means abort
        if (it == buckets.end()) {
          outs.emplace_back(n, px * state[x]);
        } else {
          const auto& dec = decoders.at(image[x]);
          for (std::size_t j = 0; j < it->second.size(); ++j) {
            const Matrix o = linalg::hermitize(dec.accept[j] * state[x] * dec.accept[j].adjoint());
            if (it->second[j] == x) correct = o.trace().real();
            outs.emplace_back(it->second[j], px * o);
          }
          outs.emplace_back(n, px * linalg::hermitize(dec.abort * state[x] * dec.abort.adjoint()));
        }
        dr.error += px * (1.0 - correct);
        for (auto& [xh, op] : outs) {
          const Matrix ideal = xh == x ? Matrix(px * state[x]) : Matrix::Zero(op.rows(), op.cols());
          dr.distance += linalg::trace_norm_distance(op, ideal);
          dr.blocks.push_back({{x, xh}, std::move(op)});
        }
        bool hit = false;
        for (const auto& [xh, op] : outs) hit |= xh == x;
        if (!hit) dr.distance += px;  // the ideal diagonal block received nothing
      }
      break;
    }
    return dr;
  });

  std::vector<std::string> hatAlphabet = alphabet;
  hatAlphabet.push_back(kBottom);
  res.outputState = CQState({ax, ax + "hat"}, {alphabet, hatAlphabet}, cq.quantum());
  const double w = 1.0 / static_cast<double>(opt.hashDraws);
  for (const auto& dr : draws) {
    res.errorPerDraw.push_back(dr.error);
    res.avgError += w * dr.error;
    res.outputDistance += w * dr.distance;
    res.redraws += dr.redraws;
    res.maxBucket = std::max(res.maxBucket, dr.maxBucket);
    for (const auto& [key, op] : dr.blocks) res.outputState.add({key.first, key.second}, w * op);
  }
  // distance of the averaged output to the ideal copy state
  for (const auto& e : res.outputState.entries()) {
    const std::size_t x = e.index[0], xh = e.index[1];
    const Matrix ideal = xh == x ? Matrix(P.probs[x] * state[x]) : Matrix::Zero(e.op.rows(), e.op.cols());
    res.averagedOutputDistance += linalg::trace_norm_distance(e.op, ideal);
  }
  for (std::size_t x = 0; x < n; ++x)
    if (P.probs[x] > 0.0 && !res.outputState.find({x, x})) res.averagedOutputDistance += P.probs[x];
  return res;
}

}  // namespace oneshot
