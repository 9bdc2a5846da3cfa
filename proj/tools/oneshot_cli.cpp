// oneshot_cli: command line front end. Results go to --out (or stdout); wall time goes
// to <out>.timing.json so the result files stay byte-identical across runs.
#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "oneshot/cli.hpp"

int main(int argc, char** argv) {
  using namespace oneshot;
  cli::RunConfig cfg;
  std::string rates, thetaGrid;
  CLI::App app{"One-shot measurement compression toolkit"};
  app.add_option("--command", cfg.command, "entropy|split|cover|convexsplit|povm|cdcqsi|simulate|region|iidregion")
      ->required()
      ->check(CLI::IsMember(cli::commands()));
  app.add_option("--instance", cfg.instancePath, "instance JSON file")->required();
  app.add_option("--eps", cfg.epsilon, "smoothing / error parameter");
  app.add_option("--theta", cfg.theta, "rate-splitting parameter in [0,1]");
  app.add_option("--theta-grid", thetaGrid, "comma separated theta values for region");
  app.add_option("--split-axis", cfg.splitAxis, "register that is split (X or Y)");
  app.add_option("--seed", cfg.seed, "master seed");
  app.add_option("--trials", cfg.trials, "trials / hash draws / protocol runs (command dependent)");
  app.add_option("--out", cfg.outputPath, "output file (default stdout)");
  app.add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--rates", rates, "Rx,Ry,Cx,Cy in bits (default: 2 bits above the thresholds)");
  app.add_option("--log-const-override", cfg.logConstOverride, "replace the additive log constant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << cli::error_json("invalid_argument", e.what(), 1);
    return 1;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (!thetaGrid.empty()) cfg.thetaGrid = cli::parse_list(thetaGrid, "--theta-grid");
    if (!rates.empty()) {
      const auto r = cli::parse_list(rates, "--rates");
      if (r.size() != 4) throw InvalidArgument("--rates expects four values Rx,Ry,Cx,Cy");
      cfg.rates = std::array<double, 4>{r[0], r[1], r[2], r[3]};
    }
    const cli::Output out = cli::run(cfg);
    const std::string text = cli::render(cfg, out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cfg.outputPath.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(cfg.outputPath, std::ios::binary);
      if (!f) throw InvalidArgument("cannot write '" + cfg.outputPath + "'");
      f << text;
      std::ofstream t(cfg.outputPath + ".timing.json", std::ios::binary);
      t << nlohmann::json{{"command", cfg.command}, {"wallSeconds", seconds}, {"threads", thread_count()}}.dump(2) << "\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << cli::error_json(e.kind(), e.what(), e.exit_code());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << cli::error_json("internal", e.what(), 3);
    return 3;
  }
}
