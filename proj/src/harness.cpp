#include "lanesim/harness.hpp"

#include <bit>
#include <string>

#include "lanesim/errors.hpp"

namespace lanesim {

Algorithm parse_algorithm(std::string_view name) {
  for (Algorithm a : kAllAlgorithms) {
    if (name == to_string(a)) return a;
  }
  throw UsageError("algorithms: unknown algorithm '" + std::string(name) +
                   "' (expected ring|rd|rabenseifner|lane|ppg-standard|ppg-lane)");
}

const char* to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::Ring:
      return "ring";
    case Algorithm::RecursiveDoubling:
      return "rd";
    case Algorithm::Rabenseifner:
      return "rabenseifner";
    case Algorithm::Lane:
      return "lane";
    case Algorithm::PpgStandard:
      return "ppg-standard";
    case Algorithm::PpgLane:
      return "ppg-lane";
  }
  return "unknown";
}

InnerAlgorithm parse_inner(std::string_view name) {
  for (InnerAlgorithm i :
       {InnerAlgorithm::Ring, InnerAlgorithm::RecursiveDoubling, InnerAlgorithm::Rabenseifner}) {
    if (name == to_string(i)) return i;
  }
  throw UsageError("inner algorithm: unknown '" + std::string(name) +
                   "' (expected ring|rd|rabenseifner)");
}

std::optional<std::string> unsupported_reason(Algorithm algorithm, const TopologySpec& spec,
                                              const AlgorithmOptions& options) {
  auto needs_pow2 = [](int n, const char* what) -> std::optional<std::string> {
    if (std::has_single_bit(static_cast<unsigned>(n))) return std::nullopt;
    return std::string("recursive doubling over ") + what + " of " + std::to_string(n) +
           " members (not a power of two)";
  };
  switch (algorithm) {
    case Algorithm::RecursiveDoubling:
      return needs_pow2(spec.gpu_count(), "all GPUs");
    case Algorithm::Lane:
    case Algorithm::PpgLane:
      if (options.lane_inner == InnerAlgorithm::RecursiveDoubling) {
        return needs_pow2(spec.nodes(), "comm_lane");
      }
      return std::nullopt;
    case Algorithm::PpgStandard:
      if (options.ppg_inner == InnerAlgorithm::RecursiveDoubling) {
        return needs_pow2(spec.gpu_count(), "new_comm");
      }
      return std::nullopt;
    case Algorithm::Ring:
    case Algorithm::Rabenseifner:
      return std::nullopt;
  }
  return std::nullopt;
}

ProgramSet generate_programs(Algorithm algorithm, const CommunicatorMap& cmap,
                             std::span<const MemberBuffers> by_rank,
                             const AlgorithmOptions& options) {
  ProgramSet programs(static_cast<std::size_t>(cmap.spec().world_size()));
  auto leader_members = [&] {
    std::vector<MemberBuffers> members;
    for (Rank r : cmap.new_comm(0).ranks()) members.push_back(by_rank[static_cast<std::size_t>(r)]);
    return members;
  };
  switch (algorithm) {
    case Algorithm::Ring:
      ring_allreduce(cmap.new_comm(0), leader_members(), programs);
      break;
    case Algorithm::RecursiveDoubling:
      recursive_doubling_allreduce(cmap.new_comm(0), leader_members(), programs);
      break;
    case Algorithm::Rabenseifner:
      rabenseifner_allreduce(cmap.new_comm(0), leader_members(), programs);
      break;
    case Algorithm::Lane:
      lane_allreduce(cmap, 0, by_rank, options.lane_inner, programs);
      break;
    case Algorithm::PpgStandard:
      multi_ppg_standard(cmap, by_rank, options.ppg_inner, programs);
      break;
    case Algorithm::PpgLane:
      multi_ppg_lane(cmap, by_rank, options.lane_inner, programs);
      break;
  }
  return programs;
}

namespace {

bool uses_every_process(Algorithm algorithm) {
  return algorithm == Algorithm::PpgStandard || algorithm == Algorithm::PpgLane;
}

}  // namespace

CellResult run_cell(Algorithm algorithm, const TopologySpec& spec, std::size_t count,
                    const RunOptions& options) {
  if (auto reason = unsupported_reason(algorithm, spec, options.algorithm)) {
    throw UnsupportedSizeError(std::string(to_string(algorithm)) + ": " + *reason);
  }
  const CommunicatorMap cmap = build_communicators(spec);
  BufferPool pool(options.materialize);
  IpcRegistry registry;

  // Leaders allocate and publish; the other processes open views afterwards.
  for (int node = 0; node < spec.nodes(); ++node) {
    for (int gpu = 0; gpu < spec.gpus_per_node(); ++gpu) {
      const RankInfo leader = rank_info(spec, rank_of(spec, node, gpu, 0));
      pool.allocate(leader, count, options.fill, registry, BufferRole::Send);
      pool.allocate_zeroed(leader, count, registry, BufferRole::Recv);
      pool.allocate_zeroed(leader, count, registry, BufferRole::Scratch);
    }
  }

  const int partitions = uses_every_process(algorithm) ? spec.ppg() : 1;
  std::vector<MemberBuffers> by_rank(static_cast<std::size_t>(spec.world_size()));
  for (Rank r = 0; r < spec.world_size(); ++r) {
    const RankInfo info = rank_info(spec, r);
    if (info.local_rank >= partitions) continue;  // idle in single-process algorithms
    by_rank[static_cast<std::size_t>(r)] = {
        open_view(info, registry, partitions, BufferRole::Send).region(),
        open_view(info, registry, partitions, BufferRole::Recv).region(),
        open_view(info, registry, partitions, BufferRole::Scratch).region(),
    };
  }

  ProgramSet programs = generate_programs(algorithm, cmap, by_rank, options.algorithm);
  if (options.mutate) options.mutate(programs);

  CellResult result;
  result.trace = run(spec, pool, programs);
  if (!options.materialize) return result;

  std::vector<std::vector<double>> inputs;
  inputs.reserve(static_cast<std::size_t>(spec.gpu_count()));
  for (int node = 0; node < spec.nodes(); ++node) {
    for (int gpu = 0; gpu < spec.gpus_per_node(); ++gpu) {
      inputs.push_back(generate_fill(options.fill, fill_stream({node, gpu}), count));
    }
  }
  const std::vector<double> expected = oracle_allreduce(inputs);

  result.verified = true;
  for (int node = 0; node < spec.nodes(); ++node) {
    for (int gpu = 0; gpu < spec.gpus_per_node(); ++gpu) {
      const RankInfo leader = rank_info(spec, rank_of(spec, node, gpu, 0));
      const IpcHandle handle = registry.resolve(leader, BufferRole::Recv);
      const auto& actual = pool.get(handle.buffer_id).elements;
      const int g = gpu_index(spec, {node, gpu});
      for (std::size_t i = 0; i < count && result.verified; ++i) {
        if (actual[i] != expected[i]) {
          result.verified = false;
          result.mismatch = Mismatch{g, i, expected[i], actual[i]};
        }
      }
      result.gpu_results.push_back(actual);
    }
  }
  return result;
}

}  // namespace lanesim
