// Command runner behind the oneshot_cli binary: one function per command, each
// returning a JSON result plus an optional CSV table.
#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oneshot/cdcqsi.hpp"
#include "oneshot/centralised.hpp"
#include "oneshot/compression.hpp"
#include "oneshot/covering.hpp"
#include "oneshot/entropy.hpp"
#include "oneshot/instance.hpp"
#include "oneshot/region.hpp"
#include "oneshot/split.hpp"

namespace oneshot::cli {

inline constexpr const char* kToolName = "oneshot_cli";
inline constexpr const char* kToolVersion = "0.1.0";

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"entropy", "split", "cover", "convexsplit", "povm",
                                          "cdcqsi",  "simulate", "region", "iidregion"};
  return c;
}

struct RunConfig {
  std::string command;
  std::string instancePath;
  double epsilon = 0.01;
  double theta = 0.0;
  std::vector<double> thetaGrid{0.0, 0.5, 1.0};
  std::string splitAxis = "X";
  std::optional<std::array<double, 4>> rates;  // R_X, R_Y, C_X, C_Y
  std::uint64_t seed = 1;
  std::size_t trials = 0;  // 0: command default
  std::string outputPath;
  std::string format = "json";
  std::optional<double> logConstOverride;

  void validate() const {
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
      throw InvalidArgument("unknown command '" + command + "'");
    if (instancePath.empty()) throw InvalidArgument("--instance is required");
    const bool zeroOk = command == "entropy" || command == "iidregion" || command == "split" || command == "convexsplit";
    if (!(epsilon >= 0.0 && epsilon < 1.0) || (!zeroOk && epsilon == 0.0))
      throw InvalidArgument("--eps must lie in (0, 1)");
    if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("--theta must lie in [0, 1]");
    for (double t : thetaGrid)
      if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("--theta-grid values must lie in [0, 1]");
    if (thetaGrid.empty()) throw InvalidArgument("--theta-grid is empty");
    if (splitAxis != "X" && splitAxis != "Y") throw InvalidArgument("--split-axis must be X or Y");
    if (format != "json" && format != "csv") throw InvalidArgument("--format must be json or csv");
    if (rates)
      for (double r : *rates)
        if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument("--rates entries must be nonnegative");
  }

  nlohmann::json echo() const {
    nlohmann::json j{{"command", command},     {"instance", instancePath}, {"eps", epsilon},
                     {"theta", theta},         {"thetaGrid", thetaGrid},   {"splitAxis", splitAxis},
                     {"seed", seed},           {"trials", trials},         {"format", format}};
    j["rates"] = rates ? nlohmann::json(*rates) : nlohmann::json(nullptr);
    j["logConstOverride"] = logConstOverride ? nlohmann::json(*logConstOverride) : nlohmann::json(nullptr);
    return j;
  }
};

inline std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  return out;
}

struct Output {
  nlohmann::json result;
  std::string csv;  // empty: the command has no table; a key,value dump is used
};

namespace detail {

inline SplitAxis axis_of(const RunConfig& c) { return c.splitAxis == "X" ? SplitAxis::X : SplitAxis::Y; }

inline std::string num(double v) {
  nlohmann::json j = v;
  return j.dump();
}

inline nlohmann::json halfspaces_json(const std::vector<HalfSpace>& hs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& h : hs) a.push_back({{"coeffs", h.coeffs}, {"rhs", h.rhs}, {"provenance", h.provenance}});
  return a;
}

inline nlohmann::json quantities_json(const std::vector<StreamQuantities>& qs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& q : qs)
    a.push_back({{"stream", q.name},
                 {"link", std::string(1, q.link)},
                 {"degenerate", q.degenerate},
                 {"I_max", q.iMax},
                 {"H_max", q.hMax},
                 {"I_H_B", q.iHyp},
                 {"logConst", q.logConst}});
  return a;
}

inline double log_const(const RunConfig& c) { return c.logConstOverride.value_or(log_constant(c.epsilon)); }

/// Explicit budget, or 2 bits above every stream's thresholds.
inline OneShotBudget budget_for(const RunConfig& c, const ProtocolModel& m, const std::vector<StreamQuantities>& q,
                                bool assisted) {
  OneShotBudget b;
  b.eps = c.epsilon;
  b.theta = c.theta;
  b.splitAxis = axis_of(c);
  b.logConst = c.logConstOverride;
  if (c.rates) {
    b.Rx = (*c.rates)[0];
    b.Ry = (*c.rates)[1];
    b.Cx = (*c.rates)[2];
    b.Cy = (*c.rates)[3];
    return b;
  }
  const bool side = assisted && m.hasB;
  for (char l : {'X', 'Y'}) {
    double r = 0.0, s = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
      if (m.streams[a].link != l || q[a].degenerate) continue;
      const double rm = side ? q[a].rate_min() : q[a].rate_min_unassisted();
      const double sm = side ? q[a].sum_min() : q[a].sum_min_unassisted();
      const double ra = std::floor(rm) + 1.0 + 2.0;
      r += ra;
      s += std::max(0.0, std::floor(sm - ra) + 1.0 + 2.0);
    }
    (l == 'X' ? b.Rx : b.Ry) = r;
    (l == 'X' ? b.Cx : b.Cy) = s;
  }
  return b;
}

inline nlohmann::json budget_json(const OneShotBudget& b) {
  return {{"Rx", b.Rx}, {"Ry", b.Ry}, {"Cx", b.Cx}, {"Cy", b.Cy}, {"theta", b.theta}};
}

inline nlohmann::json plan_json(const ProtocolPlan& p) {
  nlohmann::json a = nlohmann::json::array();
  for (std::size_t i = 0; i < p.streams.size(); ++i)
    a.push_back({{"stream", p.allocation[i].name},
                 {"rate", p.allocation[i].rate},
                 {"coin", p.allocation[i].coin},
                 {"rateMin", p.allocation[i].rateMin},
                 {"sumMin", p.allocation[i].sumMin},
                 {"logK", p.streams[i].logK},
                 {"logL", p.streams[i].logL},
                 {"hashBits", p.streams[i].hashBits}});
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline Output cmd_entropy(const RunConfig& c, const Instance& in) {
  const auto lay = in.layout();
  const double eps = c.epsilon;
  const CQState ctl = post_measurement_cq(in.povm, in.state, lay, {"B", "R"});
  nlohmann::json q;
  q["H_max(X)"] = h_max_smooth(ctl.distribution({"X"}), eps).value;
  q["H_max(Y)"] = h_max_smooth(ctl.distribution({"Y"}), eps).value;
  q["H_max(XY)"] = h_max_smooth(ctl.distribution({"X", "Y"}), eps).value;
  const bool hasB = in.dB > 1;
  q["I_H(X:B)"] = hasB ? i_hyp(ctl.marginal({"X"}).trace_quantum({"B"}), {"X"}, eps).value : 0.0;
  q["I_H(Y:B)"] = hasB ? i_hyp(ctl.marginal({"Y"}).trace_quantum({"B"}), {"Y"}, eps).value : 0.0;
  const auto imax = [&](const CQState& s, const std::vector<std::string>& first) {
    if (eps == 0.0) {
      const auto g = oneshot::detail::cq_grid(s, first);
      return d_max_blocks(g.rho, g.sigma);
    }
    return i_max_smooth_cq(s, first, eps).value;
  };
  q["I_max(X:BR)"] = imax(ctl.marginal({"X"}), {"X"});
  q["I_max(Y:BRX)"] = imax(ctl.marginal({"X", "Y"}), {"Y"});
  const IidQuantities iq = iid_quantities(in.povm, in.state, lay);
  q["H(X)"] = iq.hX;
  q["H(Y)"] = iq.hY;
  q["I(X:B)"] = iq.iXB;
  q["I(Y:B)"] = iq.iYB;
  q["I(X:BR)"] = iq.iXBR;
  q["I(X:Y)"] = iq.iXY;
  Output o;
  o.result = {{"quantities", q}, {"distribution", nullptr}};
  const Distribution p = induced_distribution(in.povm, in.state, lay);
  nlohmann::json d = nlohmann::json::object();
  for (std::size_t i = 0; i < p.size(); ++i) d[p.alphabet[i]] = p.probs[i];
  o.result["distribution"] = d;
  std::ostringstream csv;
  csv << "quantity,value\n";
  for (const auto& [k, v] : q.items()) csv << k << "," << v.dump() << "\n";
  o.csv = csv.str();
  return o;
}

inline Output cmd_split(const RunConfig& c, const Instance& in) {
  const Matrix rhoA = linalg::partial_trace(in.state, in.layout(), {"A"});
  auto [marg, el] = split_axis_view(in.povm, rhoA, detail::axis_of(c));
  const SplitPair sp = split(marg, c.theta);
  const auto law = max_law(sp);
  Output o;
  o.result = {{"axis", c.splitAxis},
              {"theta", c.theta},
              {"alphabet", marg.alphabet},
              {"p", marg.probs},
              {"pU", sp.pU.probs},
              {"pV", sp.pV.probs},
              {"maxLaw", law},
              {"H(U)", sp.pU.entropy()},
              {"H(V)", sp.pV.entropy()}};
  std::ostringstream csv;
  csv << "symbol,p,pU,pV,maxLaw\n";
  for (std::size_t i = 0; i < marg.size(); ++i)
    csv << marg.alphabet[i] << "," << detail::num(marg.probs[i]) << "," << detail::num(sp.pU.probs[i]) << ","
        << detail::num(sp.pV.probs[i]) << "," << detail::num(law[i]) << "\n";
  o.csv = csv.str();
  return o;
}

/// Sweep of the measure-transformed covering error on the control state (X, Y) (x) BR,
/// over logK in [0, ceil(I_max(X:BR)) + 2] and logL in [0, ceil(I_max(Y:BRX)) + 2].
inline Output cmd_cover(const RunConfig& c, const Instance& in) {
  const CQState ctl = post_measurement_cq(in.povm, in.state, in.layout(), {"B", "R"});
  const double ix = i_max_smooth_cq(ctl.marginal({"X"}), {"X"}, c.epsilon).value;
  const double iy = i_max_smooth_cq(ctl, {"Y"}, c.epsilon).value;
  const int a = static_cast<int>(std::ceil(ix - 1e-9)), b = static_cast<int>(std::ceil(iy - 1e-9));
  const std::size_t trials = c.trials ? c.trials : 400;
  const auto rows = covering_sweep(ctl, a + 2, b + 2, trials, c.seed);
  Output o;
  nlohmann::json r = nlohmann::json::array();
  std::ostringstream csv;
  csv << "logK,logL,meanError,stderr,trials,seed\n";
  for (const auto& row : rows) {
    r.push_back({{"logK", row.logK}, {"logL", row.logL}, {"meanError", row.est.mean}, {"stderr", row.est.stderr_},
                 {"trials", row.est.trials}, {"seed", c.seed}});
    csv << row.logK << "," << row.logL << "," << detail::num(row.est.mean) << "," << detail::num(row.est.stderr_) << ","
        << row.est.trials << "," << c.seed << "\n";
  }
  o.result = {{"thresholds", {{"logK", a}, {"logL", b}, {"I_max(X:BR)", ix}, {"I_max(Y:BRX)", iy}}},
              {"envelope", 6.0 * std::sqrt(c.epsilon)},
              {"rows", r}};
  o.csv = csv.str();
  return o;
}

inline Output cmd_convexsplit(const RunConfig&, const Instance& in) {
  const auto lay = in.layout();
  Output o;
  nlohmann::json r = nlohmann::json::array();
  std::ostringstream csv;
  csv << "K,L,distance\n";
  for (std::size_t K : {1, 2})
    for (std::size_t L : {1, 2}) {
      const double d = convex_split_distance(in.state, lay, K, L);
      r.push_back({{"K", K}, {"L", L}, {"distance", d}});
      csv << K << "," << L << "," << detail::num(d) << "\n";
    }
  o.result = {{"rows", r}};
  o.csv = csv.str();
  return o;
}

inline Output cmd_povm(const RunConfig& c, const Instance& in) {
  const ProtocolModel m = make_model(in.povm, in.state, in.layout(), c.theta, detail::axis_of(c));
  const auto q = model_quantities(m, c.epsilon, detail::log_const(c));
  const OneShotBudget b = detail::budget_for(c, m, q, false);
  const ProtocolPlan plan = plan_streams(m, q, b, false);
  const CompressionRun run = build_compressed_povm(m, plan.streams, c.epsilon, c.seed);
  Output o;
  nlohmann::json blocks = nlohmann::json::array();
  std::ostringstream csv;
  csv << "block,nice,deviation,elements,factor,proofFactor,gamma0Mass,probGood,completenessError,minEigenvalue\n";
  for (std::size_t i = 0; i < run.num_blocks(); ++i) {
    nlohmann::json j{{"block", run.report.blocks[i]}, {"nice", static_cast<bool>(run.report.nice[i])},
                     {"deviation", run.report.deviation[i]}};
    std::string tail = ",,,,,,";
    if (run.povms[i]) {
      const auto& p = *run.povms[i];
      Matrix sum = p.zeroElement;
      double minEig = linalg::min_eigenvalue(p.zeroElement);
      for (const auto& e : p.elements) {
        sum += e.multiplicity * e.gamma;
        minEig = std::min(minEig, linalg::min_eigenvalue(e.gamma));
      }
      const double compl_ = (sum - m.rhoSupport).cwiseAbs().maxCoeff();
      j["elements"] = p.elements.size();
      j["factor"] = p.factor;
      j["proofFactor"] = p.proofFactor;
      j["gamma0Mass"] = p.gamma0Mass;
      j["probGood"] = p.probGood;
      j["opSlack"] = p.opSlack;
      j["completenessError"] = compl_;
      j["minEigenvalue"] = minEig;
      tail = "," + std::to_string(p.elements.size()) + "," + detail::num(p.factor) + "," + detail::num(p.proofFactor) +
             "," + detail::num(p.gamma0Mass) + "," + detail::num(p.probGood) + "," + detail::num(compl_) + "," +
             detail::num(minEig);
    }
    std::string key;
    for (std::size_t a = 0; a < run.report.blocks[i].size(); ++a)
      key += (a ? "-" : "") + std::to_string(run.report.blocks[i][a]);
    csv << key << "," << (run.report.nice[i] ? 1 : 0) << "," << detail::num(run.report.deviation[i]) << tail << "\n";
    blocks.push_back(j);
  }
  const SimulationResult sim = simulate_unassisted(m, run);
  o.result = {{"budget", detail::budget_json(b)},
              {"quantities", detail::quantities_json(q)},
              {"plan", detail::plan_json(plan)},
              {"attempts", run.report.attempts},
              {"fractionNice", run.report.fractionNice},
              {"blocks", blocks},
              {"unassistedDeviation", sim.deviation}};
  o.csv = csv.str();
  return o;
}

inline Output cmd_cdcqsi(const RunConfig& c, const Instance& in) {
  if (in.dB <= 1) throw InvalidInstance("cdcqsi needs a B register");
  const CQState ctl = post_measurement_cq(in.povm, in.state, in.layout(), {"B"});
  CdcqsiOptions opt;
  if (c.trials) opt.hashDraws = c.trials;
  const CdcqsiResult r = cdc_qsi(ctl.marginal({"X"}), c.epsilon, c.seed, opt);
  Output o;
  o.result = {{"rate", r.rate},
              {"H_max", r.hmax},
              {"I_H", r.ihyp},
              {"avgError", r.avgError},
              {"errorBound", r.errorBound},
              {"outputDistance", r.outputDistance},
              {"averagedOutputDistance", r.averagedOutputDistance},
              {"distanceBound", r.distanceBound},
              {"hashDraws", r.errorPerDraw.size()},
              {"redraws", r.redraws},
              {"maxBucket", r.maxBucket},
              {"errorPerDraw", r.errorPerDraw}};
  std::ostringstream csv;
  csv << "draw,error\n";
  for (std::size_t i = 0; i < r.errorPerDraw.size(); ++i) csv << i << "," << detail::num(r.errorPerDraw[i]) << "\n";
  o.csv = csv.str();
  return o;
}

inline Output cmd_simulate(const RunConfig& c, const Instance& in) {
  const ProtocolModel m = make_model(in.povm, in.state, in.layout(), c.theta, detail::axis_of(c));
  const auto q = model_quantities(m, c.epsilon, detail::log_const(c));
  const OneShotBudget b = detail::budget_for(c, m, q, true);
  const ProtocolPlan plan = plan_streams(m, q, b, true);
  const std::size_t runs = c.trials ? c.trials : 1;
  const auto results = parallel_map(runs, [&](std::size_t i) { return centralised_protocol(m, plan, c.epsilon, c.seed + i); });
  Output o;
  nlohmann::json rj = nlohmann::json::array();
  std::ostringstream csv;
  csv << "seed,scenario,deviation,transcriptHash,fractionNice,worstGamma0\n";
  std::map<std::string, double> mean;
  for (const auto& r : results) {
    nlohmann::json sc = nlohmann::json::array();
    for (const auto& s : r.scenarios) {
      sc.push_back({{"scenario", s.scenario.name()},
                    {"deviation", s.deviation},
                    {"transcript", s.transcript},
                    {"transcriptHash", s.transcriptHash}});
      mean[s.scenario.name()] += s.deviation / static_cast<double>(runs);
      csv << r.seed << "," << s.scenario.name() << "," << detail::num(s.deviation) << "," << s.transcriptHash << ","
          << detail::num(r.nice.fractionNice) << "," << detail::num(r.worstGamma0) << "\n";
    }
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : r.streams)
      st.push_back({{"stream", s.name}, {"hashed", s.hashed}, {"hashBits", s.hashBits}, {"cdcRate", s.cdcRate},
                    {"H_max(KL)", s.hmaxKL}, {"I_H(KL:K'B)", s.ihypKL}, {"maxBucket", s.maxBucket}});
    rj.push_back({{"seed", r.seed},
                  {"scenarios", sc},
                  {"streams", st},
                  {"fractionNice", r.nice.fractionNice},
                  {"attempts", r.nice.attempts},
                  {"worstGamma0", r.worstGamma0},
                  {"transcriptsEqual", r.transcriptsEqual}});
  }
  o.result = {{"budget", detail::budget_json(b)},
              {"quantities", detail::quantities_json(q)},
              {"plan", detail::plan_json(plan)},
              {"meanDeviation", mean},
              {"runs", rj}};
  o.csv = csv.str();
  return o;
}

inline Output cmd_region(const RunConfig& c, const Instance& in) {
  const RateRegion r = one_shot_region(in.povm, in.state, in.layout(), c.epsilon, c.thetaGrid, c.logConstOverride);
  Output o;
  nlohmann::json pieces = nlohmann::json::array();
  std::ostringstream csv;
  csv << "axis,theta,cRx,cRy,cCx,cCy,rhs,provenance\n";
  for (const auto& p : r.pieces) {
    pieces.push_back({{"axis", p.axis},
                      {"theta", p.theta},
                      {"streams", detail::quantities_json(p.streams)},
                      {"halfSpaces", detail::halfspaces_json(p.halfSpaces)}});
    for (const auto& h : p.halfSpaces)
      csv << p.axis << "," << detail::num(p.theta) << "," << h.coeffs[0] << "," << h.coeffs[1] << "," << h.coeffs[2] << ","
          << h.coeffs[3] << "," << detail::num(h.rhs) << ",\"" << h.provenance << "\"\n";
  }
  o.result = {{"eps", r.eps}, {"logConst", r.logConst}, {"pieces", pieces}};
  o.csv = csv.str();
  return o;
}

inline Output cmd_iidregion(const RunConfig&, const Instance& in) {
  const RateRegion r = iid_region(in.povm, in.state, in.layout());
  Output o;
  std::ostringstream csv;
  csv << "cRx,cRy,cCx,cCy,rhs,provenance\n";
  for (const auto& h : r.pieces[0].halfSpaces)
    csv << h.coeffs[0] << "," << h.coeffs[1] << "," << h.coeffs[2] << "," << h.coeffs[3] << "," << detail::num(h.rhs)
        << ",\"" << h.provenance << "\"\n";
  o.result = {{"halfSpaces", detail::halfspaces_json(r.pieces[0].halfSpaces)}};
  o.csv = csv.str();
  return o;
}

inline Output run(const RunConfig& c) {
  c.validate();
  const Instance in = load_instance(c.instancePath);
  if (c.command == "entropy") return cmd_entropy(c, in);
  if (c.command == "split") return cmd_split(c, in);
  if (c.command == "cover") return cmd_cover(c, in);
  if (c.command == "convexsplit") return cmd_convexsplit(c, in);
  if (c.command == "povm") return cmd_povm(c, in);
  if (c.command == "cdcqsi") return cmd_cdcqsi(c, in);
  if (c.command == "simulate") return cmd_simulate(c, in);
  if (c.command == "region") return cmd_region(c, in);
  return cmd_iidregion(c, in);
}

/// Final document: manifest plus result (JSON), or a manifest comment line plus the table (CSV).
inline std::string render(const RunConfig& c, const Output& o) {
  const nlohmann::json manifest{{"tool", kToolName}, {"version", kToolVersion}, {"config", c.echo()}};
  if (c.format == "json") return nlohmann::json{{"manifest", manifest}, {"result", o.result}}.dump(2) + "\n";
  return "# " + manifest.dump() + "\n" + o.csv;
}

inline std::string error_json(const std::string& kind, const std::string& message, int code) {
  return nlohmann::json{{"error", {{"kind", kind}, {"message", message}, {"exitCode", code}}}}.dump() + "\n";
}

}  // namespace oneshot::cli
