// Instance files: {"dims": {"A","B","R"}, "state": [[re,im],...] row-major,
// "povm": {"alphabetX", "alphabetY", "elements": {"x|y": matrix}}} or, instead of
// "povm", an "instrument" with "kraus": {"x|y": matrix} (rows = output dimension).
// Optional "name" and "description" strings are carried through.
#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oneshot/error.hpp"
#include "oneshot/quantum.hpp"

namespace oneshot {

struct Instance {
  std::string name, description;
  std::size_t dA = 1, dB = 1, dR = 1;
  Matrix state;
  JointPOVM povm;
  std::optional<Instrument> instrument;

  linalg::SystemLayout layout() const { return {{"A", dA}, {"B", dB}, {"R", dR}}; }

  void validate() const {
    const std::size_t d = dA * dB * dR;
    if (static_cast<std::size_t>(state.rows()) != d || static_cast<std::size_t>(state.cols()) != d)
      throw InvalidInstance("state dimension does not match dims");
    if (!linalg::all_finite(state)) throw InvalidInstance("state has non-finite entries");
    if (!linalg::is_hermitian(state, 1e-9)) throw InvalidInstance("state is not Hermitian");
    if (linalg::min_eigenvalue(state) < -1e-9) throw InvalidInstance("state is not PSD");
    if (std::abs(state.trace().real() - 1.0) > 1e-8) throw InvalidInstance("state does not have unit trace");
    if (povm.dim() != dA) throw InvalidInstance("POVM does not act on A");
    try {
      povm.validate();
    } catch (const Error& e) {
      throw InvalidInstance(e.what());
    }
  }
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back({m(i, j).real(), m(i, j).imag()});
  return a;
}

/// Flat list of d*d pairs (rows x cols given), or nested rows of pairs.
inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array()) throw InvalidInstance(what + ": expected an array");
  std::vector<cplx> flat;
  const auto pushPair = [&](const nlohmann::json& p) {
    if (p.is_number()) {
      flat.emplace_back(p.get<double>(), 0.0);
    } else if (p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number()) {
      flat.emplace_back(p[0].get<double>(), p[1].get<double>());
    } else {
      throw InvalidInstance(what + ": entries must be [re, im] pairs");
    }
  };
  const bool nested = !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array();
  if (nested) {
    for (const auto& row : j)
      for (const auto& p : row) pushPair(p);
  } else {
    for (const auto& p : j) pushPair(p);
  }
  if (flat.size() != rows * cols) throw InvalidInstance(what + ": wrong number of entries");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = flat[i * cols + k];
  return m;
}

inline std::vector<std::string> string_list(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw InvalidInstance(what + ": expected a non-empty list of symbols");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string()) throw InvalidInstance(what + ": symbols must be strings");
    const std::string v = s.get<std::string>();
    if (v.find(kSymbolSep) != std::string::npos) throw InvalidInstance(what + ": symbols may not contain '|'");
    out.push_back(v);
  }
  return out;
}

inline std::pair<std::size_t, std::size_t> cell(const std::string& key, const std::vector<std::string>& ax,
                                                const std::vector<std::string>& ay) {
  const auto parts = split_symbol(key);
  if (parts.size() != 2) throw InvalidInstance("element key '" + key + "' is not of the form x|y");
  const auto ix = std::find(ax.begin(), ax.end(), parts[0]);
  const auto iy = std::find(ay.begin(), ay.end(), parts[1]);
  if (ix == ax.end() || iy == ay.end()) throw InvalidInstance("element key '" + key + "' uses unknown symbols");
  return {static_cast<std::size_t>(ix - ax.begin()), static_cast<std::size_t>(iy - ay.begin())};
}

}  // namespace detail

inline Instance instance_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInstance("instance must be a JSON object");
  Instance in;
  if (j.contains("name")) in.name = j.at("name").get<std::string>();
  if (j.contains("description")) in.description = j.at("description").get<std::string>();
  if (!j.contains("dims") || !j.at("dims").is_object()) throw InvalidInstance("missing dims");
  const auto& d = j.at("dims");
  const auto dim = [&](const char* k, bool required) -> std::size_t {
    if (!d.contains(k)) {
      if (required) throw InvalidInstance(std::string("dims.") + k + " is required");
      return 1;
    }
    if (!d.at(k).is_number_integer() || d.at(k).get<long long>() < 1 || d.at(k).get<long long>() > 8)
      throw InvalidInstance(std::string("dims.") + k + " must be an integer in [1, 8]");
    return d.at(k).get<std::size_t>();
  };
  in.dA = dim("A", true);
  in.dB = dim("B", false);
  in.dR = dim("R", false);
  const std::size_t D = in.dA * in.dB * in.dR;
  if (!j.contains("state")) throw InvalidInstance("missing state");
  in.state = detail::matrix_from_json(j.at("state"), D, D, "state");

  const bool hasPovm = j.contains("povm"), hasInst = j.contains("instrument");
  if (hasPovm == hasInst) throw InvalidInstance("exactly one of povm and instrument is required");
  const auto& p = hasPovm ? j.at("povm") : j.at("instrument");
  const auto ax = detail::string_list(p.at("alphabetX"), "alphabetX");
  const auto ay = detail::string_list(p.at("alphabetY"), "alphabetY");
  if (hasPovm) {
    if (!p.contains("elements") || !p.at("elements").is_object()) throw InvalidInstance("povm.elements must be an object");
    std::vector<Matrix> el(ax.size() * ay.size(), Matrix::Zero(static_cast<Eigen::Index>(in.dA), static_cast<Eigen::Index>(in.dA)));
    for (const auto& [key, val] : p.at("elements").items()) {
      const auto [x, y] = detail::cell(key, ax, ay);
      el[x * ay.size() + y] = detail::matrix_from_json(val, in.dA, in.dA, "element " + key);
    }
    in.povm = JointPOVM(ax, ay, std::move(el));
  } else {
    if (!p.contains("kraus") || !p.at("kraus").is_object()) throw InvalidInstance("instrument.kraus must be an object");
    Instrument inst;
    inst.alphabetX = ax;
    inst.alphabetY = ay;
    for (const auto& [key, val] : p.at("kraus").items()) {
      const bool nested = val.is_array() && !val.empty() && val[0].is_array() && !val[0].empty() && val[0][0].is_array();
      const std::size_t rows = nested ? val.size() : val.size() / in.dA;
      inst.kraus.emplace(detail::cell(key, ax, ay), detail::matrix_from_json(val, rows, in.dA, "kraus " + key));
    }
    try {
      in.povm = instrument_to_povm(inst);
    } catch (const Error& e) {
      throw InvalidInstance(e.what());
    }
    in.instrument = std::move(inst);
  }
  in.validate();
  return in;
}

inline nlohmann::json instance_to_json(const Instance& in) {
  nlohmann::json j;
  if (!in.name.empty()) j["name"] = in.name;
  if (!in.description.empty()) j["description"] = in.description;
  j["dims"] = {{"A", in.dA}, {"B", in.dB}, {"R", in.dR}};
  j["state"] = detail::matrix_to_json(in.state);
  if (in.instrument) {
    nlohmann::json k = nlohmann::json::object();
    for (const auto& [key, m] : in.instrument->kraus)
      k[join_symbols({in.instrument->alphabetX[key.first], in.instrument->alphabetY[key.second]})] = detail::matrix_to_json(m);
    j["instrument"] = {{"alphabetX", in.instrument->alphabetX}, {"alphabetY", in.instrument->alphabetY}, {"kraus", k}};
  } else {
    nlohmann::json e = nlohmann::json::object();
    for (std::size_t x = 0; x < in.povm.nx(); ++x)
      for (std::size_t y = 0; y < in.povm.ny(); ++y) {
        const Matrix& m = in.povm.element(x, y);
        if (m.cwiseAbs().maxCoeff() == 0.0) continue;
        e[join_symbols({in.povm.alphabetX[x], in.povm.alphabetY[y]})] = detail::matrix_to_json(m);
      }
    j["povm"] = {{"alphabetX", in.povm.alphabetX}, {"alphabetY", in.povm.alphabetY}, {"elements", e}};
  }
  return j;
}

/// Canonical text: two-space indentation, sorted keys, trailing newline.
inline std::string dump_canonical(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInstance("cannot open '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

inline Instance load_instance(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInstance("'" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return instance_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInstance("'" + path + "': " + e.what());
  }
}

}  // namespace oneshot
