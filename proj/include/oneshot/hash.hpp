// GF(2) affine hashing and the sequential (successive-cancellation) decoder.
#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "oneshot/error.hpp"
#include "oneshot/linalg.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

/// f(x) = M x + offset over GF(2); rows[r] holds the r-th row as a bit mask.
struct HashScheme {
  unsigned inputBits = 0, outputBits = 0;
  std::vector<std::uint64_t> rows;
  std::uint64_t offset = 0;

  std::uint64_t operator()(std::uint64_t x) const {
    std::uint64_t out = 0;
    for (unsigned r = 0; r < outputBits; ++r) out |= static_cast<std::uint64_t>(std::popcount(rows[r] & x) & 1) << r;
    return out ^ offset;
  }
};

inline unsigned bits_for(std::size_t n) {
  unsigned b = 0;
  while ((std::size_t{1} << b) < n) ++b;
  return b;
}

inline HashScheme draw_hash(unsigned inputBits, unsigned outputBits, rng::Engine& eng) {
  if (inputBits > 64 || outputBits > 64) throw InvalidArgument("draw_hash: at most 64 bits");
  HashScheme h;
  h.inputBits = inputBits;
  h.outputBits = outputBits;
  const std::uint64_t inMask = inputBits == 64 ? ~0ULL : ((1ULL << inputBits) - 1);
  const std::uint64_t outMask = outputBits == 64 ? ~0ULL : ((1ULL << outputBits) - 1);
  for (unsigned r = 0; r < outputBits; ++r) h.rows.push_back(rng::bits(eng) & inMask);
  h.offset = rng::bits(eng) & outMask;
  return h;
}

// ---------------------------------------------------------------------------

/// Decoder for one bucket a_1..a_m with tests Pi_1..Pi_m. accept[j] is the operator
/// applied to the state when a_j is declared (the polar part |M_j| of
/// M_j = sqrt(Pi_j) sqrt(I - Pi_{j-1}) ... sqrt(I - Pi_1), i.e. after the correction
/// unitary); abort is the operator for "no test accepted". A single candidate is
/// declared without measuring.
struct SequentialDecoder {
  std::vector<Matrix> accept;
  Matrix abort;
  bool measured = false;
};

inline SequentialDecoder sequential_decoder(const std::vector<Matrix>& tests, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  SequentialDecoder dec;
  if (tests.empty()) {
    dec.abort = Matrix::Identity(d, d);
    return dec;
  }
  if (tests.size() == 1) {
    dec.accept.push_back(Matrix::Identity(d, d));
    dec.abort = Matrix::Zero(d, d);
    return dec;
  }
  dec.measured = true;
  Matrix reject = Matrix::Identity(d, d);  // running product of sqrt(I - Pi)
  for (const auto& t : tests) {
    const Matrix pi = linalg::hermitize(t);
    const Matrix m = linalg::matrix_sqrt(linalg::psd_part(pi)) * reject;
    dec.accept.push_back(linalg::matrix_sqrt(linalg::hermitize(m.adjoint() * m)));
    reject = linalg::matrix_sqrt(linalg::psd_part(Matrix::Identity(d, d) - pi)) * reject;
  }
  dec.abort = reject;
  return dec;
}

/// Applies `op` (x) I_rest to an operator on (side, rest).
inline Matrix apply_local(const Matrix& op, const Matrix& state, std::size_t restDim) {
  if (restDim == 1) return op * state * op.adjoint();
  const Matrix full = linalg::tensor(op, linalg::identity(restDim));
  return full * state * full.adjoint();
}

}  // namespace oneshot
