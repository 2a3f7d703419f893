#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "lanesim/errors.hpp"
#include "lanesim/experiment.hpp"

namespace {

// Flags that map one-to-one onto experiment settings.
const char* const kValueFlags[] = {
    "nodes",     "gpus-per-node", "ppg",       "algorithms", "counts",    "fill",
    "seed",      "cost-config",   "out",       "trace-out",  "repetitions", "lane-inner",
    "ppg-inner", "max-count",     "max-world",
};

void print_summary(const lanesim::ExperimentReport& report) {
  int ok = 0, unsupported = 0, failed = 0;
  for (const auto& cell : report.cells) {
    const std::string key = lanesim::cell_key(cell.algorithm, cell.spec, cell.count);
    switch (cell.status) {
      case lanesim::CellStatus::Ok:
        ++ok;
        break;
      case lanesim::CellStatus::Unsupported:
        ++unsupported;
        std::cerr << "skip " << key << ": " << cell.detail << '\n';
        break;
      case lanesim::CellStatus::Failed:
        ++failed;
        std::cerr << "FAIL " << key << ": " << cell.detail << '\n';
        break;
    }
  }
  std::cout << report.cells.size() << " cells: " << ok << " ok, " << unsupported
            << " unsupported, " << failed << " failed\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for GPU-aware allreduce algorithms with a locality-aware cost model"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment matrix and write CSV/JSON reports");
  std::string config_path;
  run->add_option("--config", config_path, "key=value file; flags given on the command line win")
      ->check(CLI::ExistingFile);
  std::vector<std::string> storage(std::size(kValueFlags));
  for (std::size_t i = 0; i < std::size(kValueFlags); ++i) {
    run->add_option(std::string("--") + kValueFlags[i], storage[i]);
  }
  bool verify_flag = false;
  run->add_flag("--verify", verify_flag, "Check every cell against the oracle");

  auto* verify = app.add_subcommand("verify", "Run the oracle and message-count matrix");
  std::string filter, verify_fill = "seeded-random-int";
  std::uint64_t verify_seed = 42;
  verify->add_option("--filter", filter, "Only cells whose key contains this substring");
  verify->add_option("--fill", verify_fill);
  verify->add_option("--seed", verify_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*verify) {
      lanesim::VerifyOptions options;
      options.filter = filter;
      options.fill = lanesim::parse_fill(verify_fill, verify_seed);
      const auto summary = lanesim::verify_suite(options, &std::cout);
      std::cout << (summary.passed() ? "verify: PASS" : "verify: FAIL") << '\n';
      return summary.passed() ? 0 : 1;
    }

    lanesim::ExperimentConfig config;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      lanesim::apply_config_file(config, in);
    }
    for (std::size_t i = 0; i < std::size(kValueFlags); ++i) {
      if (run->count(std::string("--") + kValueFlags[i]) > 0) {
        lanesim::apply_setting(config, kValueFlags[i], storage[i]);
      }
    }
    if (verify_flag) config.verify = true;

    const auto report = lanesim::run_experiment(config);
    print_summary(report);
    return report.passed() ? 0 : 1;
  } catch (const lanesim::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const lanesim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
