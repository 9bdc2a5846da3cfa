// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero on any failure.
#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "oneshot/oneshot.hpp"
#include "support/certificate.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace oneshot;

namespace {

std::string gInstances, gCli;

std::string inst(const std::string& name) { return gInstances + "/" + name + ".json"; }

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome c1_lp_agreement() {
  fixtures::Rng g(101);
  double errH = 0.0, errD = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto p = fixtures::random_probs(g, 1 + g() % 12);
    for (double eps : {0.0, 0.05, 0.1})
      errH = std::max(errH, std::abs(h_max_smooth(Distribution::from_probs(p), eps).value - oracle::hmax_lp(p, eps)));
  }
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + g() % 10;
    const auto r = fixtures::random_probs(g, d), s = fixtures::random_probs(g, d, 0.01);
    for (double eps : {0.01, 0.05, 0.1, 0.3})
      errD = std::max(errD, std::abs(d_hyp(fixtures::diag(r), fixtures::diag(s), eps).value - oracle::dhyp_lp(r, s, eps)));
  }
  return {errH <= 1e-9 && errD <= 1e-8, "max |H_max - LP| = " + fmt(errH) + " (tol 1e-9), max |D_H - LP| = " + fmt(errD) +
                                            " (tol 1e-8)"};
}

Outcome c2_smoothing() {
  fixtures::Rng g(202);
  double errD = 0.0, errI = 0.0;
  for (int t = 0; t < 8; ++t) {
    const std::size_t d = 2 + t % 5;
    const auto p = fixtures::random_probs(g, d), q = fixtures::random_probs(g, d, 0.05);
    const double eps = t % 2 ? 0.05 : 0.1;
    errD = std::max(errD, std::abs(d_max_smooth(fixtures::diag(p), fixtures::diag(q), eps) -
                                   oracle::dmax_smooth_classical(p, q, eps)));
  }
  for (int t = 0; t < 6; ++t) {
    const std::size_t db = 2 + t % 2;
    const auto pj = fixtures::random_probs(g, 2 * db);
    std::vector<double> pa(2, 0.0), pb(db, 0.0), prod;
    for (std::size_t i = 0; i < 2 * db; ++i) pa[i / db] += pj[i], pb[i % db] += pj[i];
    for (std::size_t i = 0; i < 2 * db; ++i) prod.push_back(pa[i / db] * pb[i % db]);
    const double eps = t % 2 ? 0.05 : 0.1;
    const linalg::SystemLayout lay{{"A", 2}, {"B", db}};
    errI = std::max(errI, std::abs(i_max_smooth(fixtures::diag(pj), lay, {"A"}, eps) -
                                   oracle::dmax_smooth_classical(pj, prod, eps)));
  }
  // I~^eps <= I_max^{eps - gamma} + log2(3 / gamma^2)
  const double eps = 0.1, gamma = 0.05;
  int violations = 0;
  double worst = -1e300;
  for (int t = 0; t < 50; ++t) {
    const CQState cq = fixtures::random_cq(g, 2 + t % 2, 2);
    const double lhs = i_max_tilde_cq(cq, {"X"}, eps).value;
    const double rhs = i_max_smooth_cq(cq, {"X"}, eps - gamma).value + std::log2(3.0 / (gamma * gamma));
    worst = std::max(worst, lhs - rhs);
    if (lhs > rhs) ++violations;
  }
  return {errD <= 1e-3 && errI <= 1e-3 && violations == 0,
          "max |D_max^eps - LP| = " + fmt(errD) + ", max |I_max^eps - LP| = " + fmt(errI) +
              " (tol 1e-3); tilde-vs-smooth violations " + std::to_string(violations) + "/50, worst margin " + fmt(worst)};
}

Outcome c3_covering() {
  const double eps = 0.04;
  bool mono = true, below = true;
  std::ostringstream d;
  for (int k = 0; k < 5; ++k) {
    fixtures::Rng g(300 + k);
    CQState cq({"X", "Y"}, {{"0", "1"}, {"0", "1"}}, linalg::SystemLayout{{"E", 2}});
    // correlated (X, Y): P(y = x) = 0.8, states depend on both symbols
    const auto px = fixtures::random_probs(g, 2, 0.2);
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t y = 0; y < 2; ++y) cq.add({x, y}, px[x] * (x == y ? 0.8 : 0.2) * fixtures::random_state(g, 2, 1 + (x + y) % 2));
    const int a = static_cast<int>(std::ceil(i_max_smooth_cq(cq.marginal({"X"}), {"X"}, eps).value - 1e-9));
    const int b = static_cast<int>(std::ceil(i_max_smooth_cq(cq, {"Y"}, eps).value - 1e-9));
    const auto rows = covering_sweep(cq, a + 2, b + 2, 400, 1000 + k);
    const int nl = b + 3;
    auto at = [&](int i, int j) { return rows[static_cast<std::size_t>(i * nl + j)].est.mean; };
    for (int i = 0; i <= a + 2; ++i)
      for (int j = 0; j <= b + 2; ++j) {
        if (i > 0 && at(i, j) > at(i - 1, j)) mono = false;
        if (j > 0 && at(i, j) > at(i, j - 1)) mono = false;
      }
    const double last = at(a + 2, b + 2);
    if (!(last < 6.0 * std::sqrt(eps))) below = false;
    d << (k ? ", " : "") << "(" << a << "," << b << ")->" << fmt(last, 3);
  }
  return {mono && below, "monotone " + std::string(mono ? "yes" : "no") + "; error at thresholds+2 [" + d.str() +
                             "] vs 6 sqrt(eps) = " + fmt(6.0 * std::sqrt(eps))};
}

Outcome c4_convex_split() {
  fixtures::Rng g(404);
  const linalg::SystemLayout lay{{"A", 2}, {"B", 2}, {"R", 2}};
  int ok = 0;
  for (int t = 0; t < 20; ++t) {
    const Matrix rho = fixtures::random_state(g, 8);
    if (convex_split_distance(rho, lay, 2, 2) < convex_split_distance(rho, lay, 1, 1)) ++ok;
  }
  double prodMax = 0.0;
  for (int t = 0; t < 5; ++t) {
    const Matrix rho = linalg::tensor(linalg::tensor(fixtures::random_state(g, 2), fixtures::random_state(g, 2)),
                                      fixtures::random_state(g, 2));
    for (std::size_t K : {1, 2})
      for (std::size_t L : {1, 2}) prodMax = std::max(prodMax, convex_split_distance(rho, lay, K, L));
  }
  return {ok == 20 && prodMax == 0.0,
          "(2,2) < (1,1) on " + std::to_string(ok) + "/20; max distance on product inputs " + fmt(prodMax)};
}

Outcome c5_good_set() {
  fixtures::Rng g(505);
  const double eps = 0.05;
  int pass = 0;
  double minGood = 1.0;
  std::string firstFail;
  for (int t = 0; t < 100; ++t) {
    const bool transformed = t % 2 == 1;
    const std::size_t n = 2 + g() % 5, d = 2 + g() % 2;
    const auto P = fixtures::random_probs(g, n, 0.05);
    std::uniform_real_distribution<double> u(0.4, 1.0), w(0.0, 1.0);
    std::vector<Matrix> parts;
    Matrix avg = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
      parts.push_back(fixtures::random_state(g, d) * (transformed ? u(g) : 1.0));
      avg += P[i] * parts.back();
    }
    // target: a state within eps of the (weighted) average
    const double tr = avg.trace().real();
    Matrix target = avg / tr;
    const double delta = 0.5 * eps * w(g);
    target = (1.0 - delta) * target + delta * fixtures::random_state(g, d);
    if (linalg::trace_norm_distance(avg, target) > eps) target = avg / tr;
    if (linalg::trace_norm_distance(avg, target) > eps) {  // mass loss alone exceeds eps: rescale parts
      for (auto& p : parts) p /= tr;
      avg /= tr;
    }
    certcheck::Verdict v;
    if (transformed) {
      const auto c = extract_good_set_transformed(parts, P, target, eps);
      v = certcheck::check_transformed(parts, P, target, eps, c.good, c.primed);
    } else {
      const auto c = extract_good_set(parts, P, target, eps);
      v = certcheck::check_plain(parts, P, target, eps, c.good, c.primed);
    }
    minGood = std::min(minGood, v.probGood);
    if (v.ok)
      ++pass;
    else if (firstFail.empty())
      firstFail = " first failure: " + v.why;
  }
  return {pass == 100, std::to_string(pass) + "/100 certificates verified; min probGood " + fmt(minGood) +
                           " (need >= " + fmt(1.0 - 10.0 * std::pow(eps, 0.25)) + ")" + firstFail};
}

Outcome c6_cdcqsi() {
  CQState cq({"X"}, {{"a", "b", "c", "d"}}, linalg::SystemLayout{{"B", 4}});
  for (std::size_t x = 0; x < 4; ++x) {
    Matrix m = Matrix::Zero(4, 4);
    m(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) = 0.25;
    cq.add({x}, m);
  }
  const double eps = 0.1;
  const auto r = cdc_qsi(cq, eps, 606);
  const double eb = std::sqrt(2 * eps) + eps;
  const double db = 2.0 * (2.0 * std::sqrt(eb) + 2.0 * eps);
  return {r.avgError <= eb && r.outputDistance <= db, "avg error " + fmt(r.avgError) + " <= " + fmt(eb) + ", distance " +
                                                          fmt(r.outputDistance) + " <= " + fmt(db) + " (rate " +
                                                          std::to_string(r.rate) + " bits)"};
}

Outcome c7_centralised() {
  const double eps = 0.01;
  const Instance in = load_instance(inst("entangled"));
  const ProtocolModel m = make_model(in.povm, in.state, in.layout());
  const auto q = model_quantities(m, eps, log_constant(eps));
  OneShotBudget b;
  b.eps = eps;
  for (std::size_t a = 0; a < q.size(); ++a) {
    const double r = std::ceil(q[a].rate_min()) + 2.0;
    (m.streams[a].link == 'X' ? b.Rx : b.Ry) += r;
    (m.streams[a].link == 'X' ? b.Cx : b.Cy) += std::max(0.0, std::ceil(q[a].sum_min()) + 2.0 - r);
  }
  const ProtocolPlan plan = plan_streams(m, q, b, true);
  const auto runs = parallel_map(50, [&](std::size_t s) { return centralised_protocol(m, plan, eps, s); });
  std::array<double, 3> mean{};
  bool same = true;
  for (const auto& r : runs) {
    same = same && r.transcriptsEqual;
    for (std::size_t i = 0; i < 3; ++i) mean[i] += r.scenarios[i].deviation / 50.0;
  }
  const bool ok = same && mean[0] <= 0.3 && mean[1] <= 0.3 && mean[2] <= 0.3;
  return {ok, "rates (" + fmt(b.Rx) + "," + fmt(b.Ry) + "," + fmt(b.Cx) + "," + fmt(b.Cy) + "); mean deviation both " +
                  fmt(mean[0]) + ", x-only " + fmt(mean[1]) + ", y-only " + fmt(mean[2]) + " (limit 0.3); transcripts " +
                  (same ? "identical" : "DIFFER")};
}

bool same_half_spaces(const std::vector<HalfSpace>& a, const std::vector<HalfSpace>& b, double tol, double& worst) {
  if (a.size() != b.size()) return false;
  for (const auto& h : a) {
    double best = 1e300;
    for (const auto& k : b)
      if (k.coeffs == h.coeffs) best = std::min(best, std::abs(k.rhs - h.rhs));
    worst = std::max(worst, best);
    if (best > tol) return false;
  }
  return true;
}

Outcome c8_regions() {
  const double eps = 0.1;
  bool endpoints = true;
  double worst = 0.0;
  for (const char* name : {"qubit_cq", "entangled"}) {
    const Instance in = load_instance(inst(name));
    const auto lay = in.layout();
    const double c = log_constant(eps);
    const auto xy = unsplit_region(in.povm, in.state, lay, eps, true, c);
    const auto yx = unsplit_region(in.povm, in.state, lay, eps, false, c);
    endpoints &= same_half_spaces(split_region(in.povm, in.state, lay, eps, 0.0, SplitAxis::X, c).halfSpaces, xy.halfSpaces, 1e-6, worst);
    endpoints &= same_half_spaces(split_region(in.povm, in.state, lay, eps, 1.0, SplitAxis::X, c).halfSpaces, yx.halfSpaces, 1e-6, worst);
    endpoints &= same_half_spaces(split_region(in.povm, in.state, lay, eps, 0.0, SplitAxis::Y, c).halfSpaces, yx.halfSpaces, 1e-6, worst);
    endpoints &= same_half_spaces(split_region(in.povm, in.state, lay, eps, 1.0, SplitAxis::Y, c).halfSpaces, xy.halfSpaces, 1e-6, worst);
  }

  // classical fixture by hand: P(a, b, r) and P(x, y | a)
  const std::vector<double> pabr{.22, .08, .05, .15, .04, .11, .2, .15};
  const std::vector<std::vector<double>> pxy{{.5, .2, .2, .1}, {.1, .15, .25, .5}};
  std::vector<std::vector<double>> xbr(2, std::vector<double>(4)), ybr(2, std::vector<double>(4)),
      xybr(4, std::vector<double>(4)), xb(2, std::vector<double>(2)), yb(2, std::vector<double>(2)),
      xy(2, std::vector<double>(2));
  std::vector<double> px(2), py(2);
  for (int i = 0; i < 8; ++i)
    for (int o = 0; o < 4; ++o) {
      const double w = pabr[i] * pxy[i / 4][o];
      const int x = o / 2, y = o % 2, br = i % 4, bb = br / 2;
      xbr[x][br] += w, ybr[y][br] += w, xybr[o][br] += w, xb[x][bb] += w, yb[y][bb] += w, xy[x][y] += w;
      px[x] += w, py[y] += w;
    }
  using oracle::mutual_info;
  const std::array<double, 5> want{
      mutual_info(xbr) - mutual_info(xb), mutual_info(ybr) - mutual_info(yb),
      mutual_info(xybr) + mutual_info(xy) - mutual_info(xb) - mutual_info(yb),
      oracle::shannon(px) - mutual_info(xb), oracle::shannon(py) - mutual_info(yb)};
  const Instance cl = load_instance(inst("classical"));
  const auto iid = iid_region(cl.povm, cl.state, cl.layout()).pieces.at(0).halfSpaces;
  double iidErr = iid.size() == 5 ? 0.0 : 1e300;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, iid.size()); ++i) iidErr = std::max(iidErr, std::abs(iid[i].rhs - want[i]));

  // n-block quantities move toward the iid values
  bool trend = true;
  std::ostringstream tr;
  for (const char* name : {"classical", "qubit_cq", "entangled"}) {
    const Instance in = load_instance(inst(name));
    const auto lay = in.layout();
    const CQState xbq = post_measurement_cq(in.povm, in.state, lay, {"B", "R"}).marginal({"X"}).trace_quantum({"B"});
    const auto q = iid_quantities(in.povm, in.state, lay);
    const auto blocks = n_block_quantities(xbq, 4, eps);
    for (std::size_t n = 1; n < blocks.size(); ++n) {
      trend &= std::abs(blocks[n].hMax - q.hX) <= std::abs(blocks[n - 1].hMax - q.hX) + 1e-12;
      trend &= std::abs(blocks[n].iHyp - q.iXB) <= std::abs(blocks[n - 1].iHyp - q.iXB) + 1e-12;
    }
    tr << " " << name << ": H_max/n " << fmt(blocks.front().hMax, 3) << "->" << fmt(blocks.back().hMax, 3) << " (H "
       << fmt(q.hX, 3) << "), I_H/n " << fmt(blocks.front().iHyp, 3) << "->" << fmt(blocks.back().iHyp, 3) << " (I "
       << fmt(q.iXB, 3) << ");";
  }
  return {endpoints && iidErr <= 1e-9 && trend,
          std::string("theta endpoints ") + (endpoints ? "match" : "DIFFER") + " (worst " + fmt(worst) + "), iid error " +
              fmt(iidErr) + ", n-block trend " + (trend ? "monotone" : "NOT monotone") + ";" + tr.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome c9_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "oneshot_acceptance";
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> runs{
      {"entropy", "--command entropy --instance " + inst("trivial") + " --eps 0.05"},
      {"split", "--command split --instance " + inst("ratesplit") + " --theta 0.3"},
      {"cover", "--command cover --instance " + inst("qubit_cq") + " --eps 0.04 --trials 100 --seed 5 --format csv"},
      {"convexsplit", "--command convexsplit --instance " + inst("entangled")},
      {"povm", "--command povm --instance " + inst("qubit_cq") + " --eps 0.05 --seed 2"},
      {"cdcqsi", "--command cdcqsi --instance " + inst("qubit_cq") + " --eps 0.1 --seed 4 --trials 20"},
      {"simulate", "--command simulate --instance " + inst("qubit_cq") + " --eps 0.05 --seed 6 --trials 6"},
      {"region", "--command region --instance " + inst("trivial") + " --eps 0.05 --theta-grid 0,0.5,1"},
      {"iidregion", "--command iidregion --instance " + inst("classical")},
  };
  int identical = 0;
  std::string bad;
  for (const auto& [name, args] : runs) {
    std::string ref;
    bool ok = true;
    for (int threads : {1, 2, 8}) {
      const auto out = dir / (name + "_" + std::to_string(threads) + ".out");
      const std::string cmd = "ONESHOT_THREADS=" + std::to_string(threads) + " " + gCli + " " + args + " --out " +
                              out.string() + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) {
        ok = false;
        break;
      }
      const std::string text = slurp(out);
      if (threads == 1)
        ref = text;
      else
        ok = ok && text == ref && !text.empty();
    }
    if (ok)
      ++identical;
    else
      bad += " " + name;
  }
  return {identical == static_cast<int>(runs.size()),
          std::to_string(identical) + "/" + std::to_string(runs.size()) + " commands byte-identical under 1, 2, 8 threads" +
              (bad.empty() ? "" : "; differing:" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  gInstances = fixtures::instances_dir();
  app.add_option("--instances", gInstances, "instance directory");
  app.add_option("--cli", gCli, "path to oneshot_cli")->required();
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    double budgetSeconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "smooth max entropy and hypothesis testing vs LP", 60, c1_lp_agreement},
      {2, "smoothed max divergences vs classical LP; tilde bound", 600, c2_smoothing},
      {3, "measure-transformed covering error", 600, c3_covering},
      {4, "convex split", 0, c4_convex_split},
      {5, "GOOD-set extraction certificates", 0, c5_good_set},
      {6, "CDC-QSI on the orthogonal fixture", 120, c6_cdcqsi},
      {7, "centralised protocol on the entangled fixture", 900, c7_centralised},
      {8, "rate regions: endpoints, iid values, n-block trend", 0, c8_regions},
      {9, "CLI determinism across thread counts", 0, c9_determinism},
  };
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budgetSeconds > 0 && secs >= c.budgetSeconds) {
      o.pass = false;
      o.detail += "; runtime over budget of " + fmt(c.budgetSeconds) + " s";
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << "  " << c.name << ": " << o.detail << " ["
              << fmt(secs, 3) << " s]" << std::endl;
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
