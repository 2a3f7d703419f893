#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lanesim/buffers.hpp"
#include "lanesim/costmodel.hpp"
#include "lanesim/harness.hpp"

namespace lanesim {

inline constexpr std::size_t kDefaultMaxCount = std::size_t{1} << 20;
inline constexpr int kDefaultMaxWorld = 512;

struct ExperimentConfig {
  std::vector<int> nodes{1};
  std::vector<int> gpus_per_node{1};
  std::vector<int> ppg{1};
  std::vector<Algorithm> algorithms{Algorithm::Ring};
  std::vector<std::size_t> counts{4};
  Fill fill{FillKind::Ones, 42};
  AlgorithmOptions algorithm_options;
  CostParams cost;
  std::string out_path;    // CSV; JSON goes next to it with a .json extension
  std::string trace_out;   // JSON-lines traces of every cell
  bool verify = false;
  int repetitions = 1;
  std::size_t max_count = kDefaultMaxCount;
  int max_world = kDefaultMaxWorld;

  // Throws UsageError naming the first invalid field.
  void validate() const;
};

// Applies one setting. Keys match the CLI flags without leading dashes
// (nodes, gpus-per-node, ppg, algorithms, counts, fill, seed, cost-config,
// out, trace-out, verify, repetitions, lane-inner, ppg-inner, max-count,
// max-world); underscores are accepted in place of dashes. Cost parameter
// names (alpha_inter_node, ...) override single cost fields.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

// key=value lines, '#' comments.
void apply_config_file(ExperimentConfig& config, std::istream& is);

// Comma-separated counts; each entry is an integer or 2^k.
std::vector<std::size_t> parse_counts(std::string_view text);

enum class CellStatus { Ok, Unsupported, Failed };

const char* to_string(CellStatus status);

struct CellReport {
  Algorithm algorithm;
  TopologySpec spec;
  std::size_t count = 0;
  CellStatus status = CellStatus::Ok;
  bool verified = false;
  std::string detail;  // failure or unsupported reason
  ModeledTime time;
  std::vector<std::string> digests;  // one per repetition
};

struct ExperimentReport {
  std::vector<CellReport> cells;
  bool passed() const;
};

// "ring/n2/g4/p1/c1024"
std::string cell_key(Algorithm algorithm, const TopologySpec& spec, std::size_t count);

// Runs every cell of the cross product (algorithm-major, then nodes, gpus,
// ppg, count), verifying against the oracle when config.verify is set, and
// writes the CSV/JSON/trace outputs requested by the config.
ExperimentReport run_experiment(const ExperimentConfig& config);

// CSV columns: algorithm,nodes,gpus_per_node,ppg,count,total_seconds,
// inter_node_elements,intra_node_elements,messages_total,kernels_total.
// Unsupported cells keep their key columns and leave the metrics empty.
void write_csv(std::ostream& os, const ExperimentReport& report);
void write_json(std::ostream& os, const ExperimentReport& report);

// Sends each participating rank must issue, from the closed forms:
//   ring, rabenseifner, ppg-standard(ring)  2(n - 1)
//   rd, ppg-standard(rd)                    log2(n)
//   lane, ppg-lane                          2(g - 1) + inner count over nodes
// Ranks that sit out (non-leaders in single-process algorithms) map to 0.
std::vector<int> closed_form_sends(Algorithm algorithm, const TopologySpec& spec,
                                   const AlgorithmOptions& options = {});

struct VerifyOptions {
  std::vector<int> nodes{1, 2, 4, 8};
  std::vector<int> gpus_per_node{1, 2, 4};
  std::vector<int> ppg{1, 2, 4};
  std::vector<std::size_t> counts{1, 7, 64, 4096, 65536};
  std::vector<Algorithm> algorithms{std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
  AlgorithmOptions algorithm_options;
  Fill fill{FillKind::SeededRandomInt, 42};
  std::string filter;  // substring of cell_key; empty matches all
  RunOptions run_template;  // mutate hook for mutation testing
};

struct AlgorithmTally {
  int passed = 0;
  int failed = 0;
  int skipped = 0;
};

struct VerifySummary {
  std::map<std::string, AlgorithmTally> by_algorithm;
  std::vector<std::string> failures;
  int cells = 0;
  bool passed() const { return failures.empty(); }
};

// Oracle equivalence plus closed-form send counts over the matrix.
// Progress and the per-algorithm tally go to `log` when non-null.
VerifySummary verify_suite(const VerifyOptions& options, std::ostream* log = nullptr);

}  // namespace lanesim
