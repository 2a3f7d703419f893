#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lanesim/buffers.hpp"
#include "lanesim/collectives.hpp"
#include "lanesim/simcore.hpp"
#include "lanesim/topology.hpp"

namespace lanesim {

// Top-level algorithms selectable from the CLI. The first four use one
// process per GPU (the leaders); the ppg variants use every process.
enum class Algorithm { Ring, RecursiveDoubling, Rabenseifner, Lane, PpgStandard, PpgLane };

inline constexpr Algorithm kAllAlgorithms[] = {
    Algorithm::Ring,  Algorithm::RecursiveDoubling, Algorithm::Rabenseifner,
    Algorithm::Lane,  Algorithm::PpgStandard,       Algorithm::PpgLane,
};

// "ring", "rd", "rabenseifner", "lane", "ppg-standard", "ppg-lane"
Algorithm parse_algorithm(std::string_view name);
const char* to_string(Algorithm algorithm);

InnerAlgorithm parse_inner(std::string_view name);

struct AlgorithmOptions {
  InnerAlgorithm lane_inner = InnerAlgorithm::Ring;  // stage 2 of lane / ppg-lane
  InnerAlgorithm ppg_inner = InnerAlgorithm::Ring;   // per-new_comm algorithm of ppg-standard
};

// Empty when the algorithm can run on the topology, otherwise the reason.
std::optional<std::string> unsupported_reason(Algorithm algorithm, const TopologySpec& spec,
                                              const AlgorithmOptions& options = {});

struct Mismatch {
  int gpu = 0;
  std::size_t index = 0;
  double expected = 0.0;
  double actual = 0.0;
};

struct RunOptions {
  Fill fill;
  // false: size-only buffers, no data movement and no verification.
  bool materialize = true;
  AlgorithmOptions algorithm;
  // Applied to the generated programs before execution (mutation testing).
  std::function<void(ProgramSet&)> mutate;
};

struct CellResult {
  EventTrace trace;
  bool verified = false;             // true when materialized and equal to the oracle
  std::optional<Mismatch> mismatch;  // first differing element, if any
  std::vector<std::vector<double>> gpu_results;  // receive buffer per GPU (materialized only)
};

// Allocates per-GPU send/recv/scratch buffers through the IPC registry,
// opens every participating rank's views, generates the algorithm's programs
// and executes them. When materialized, compares each GPU's receive buffer
// with the oracle sum of all GPUs' send buffers.
CellResult run_cell(Algorithm algorithm, const TopologySpec& spec, std::size_t count,
                    const RunOptions& options = {});

// Generates programs without executing them. by_rank receives the buffer
// ranges each rank was given (empty ranges for idle non-leaders).
ProgramSet generate_programs(Algorithm algorithm, const CommunicatorMap& cmap,
                             std::span<const MemberBuffers> by_rank,
                             const AlgorithmOptions& options = {});

}  // namespace lanesim
