#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "lanesim/buffers.hpp"
#include "lanesim/collectives.hpp"
#include "lanesim/simcore.hpp"
#include "lanesim/topology.hpp"

namespace lanesim::test {

// Member i of a flat communicator lives on GPU i of a single node, so every
// member is a leader owning its own send/recv/scratch buffers.
struct FlatRun {
  EventTrace trace;
  std::vector<std::vector<double>> recv;  // per member
  std::vector<MemberBuffers> members;
};

using Generator =
    std::function<void(const Communicator&, std::span<const MemberBuffers>, ProgramSet&)>;

inline FlatRun run_flat(const std::vector<std::vector<double>>& inputs, const Generator& generate,
                        bool in_place = false) {
  const int n = static_cast<int>(inputs.size());
  const TopologySpec spec = build_topology(1, n, 1);
  BufferPool pool;
  IpcRegistry registry;
  FlatRun out;
  for (int i = 0; i < n; ++i) {
    const RankInfo info = rank_info(spec, i);
    const std::size_t count = inputs[static_cast<std::size_t>(i)].size();
    const auto& send = pool.allocate_zeroed(info, count, registry, BufferRole::Send);
    const auto& recv = pool.allocate_zeroed(info, count, registry, BufferRole::Recv);
    const auto& scratch = pool.allocate_zeroed(info, count, registry, BufferRole::Scratch);
    MemberBuffers m{{send.id, 0, count}, {recv.id, 0, count}, {scratch.id, 0, count}};
    if (in_place) m.send = m.recv;
    auto data = pool.data(m.send);
    std::copy(inputs[static_cast<std::size_t>(i)].begin(), inputs[static_cast<std::size_t>(i)].end(),
              data.begin());
    out.members.push_back(m);
  }
  const CommunicatorMap cmap = build_communicators(spec);
  ProgramSet programs(static_cast<std::size_t>(n));
  generate(cmap.world(), out.members, programs);
  out.trace = run(spec, pool, programs);
  for (const auto& m : out.members) {
    auto data = pool.data(m.recv);
    out.recv.emplace_back(data.begin(), data.end());
  }
  return out;
}

// Brute-force reference, written independently of the library oracle.
inline std::vector<double> column_sums(const std::vector<std::vector<double>>& inputs) {
  std::vector<double> sums(inputs.empty() ? 0 : inputs[0].size(), 0.0);
  for (std::size_t i = 0; i < sums.size(); ++i) {
    for (const auto& row : inputs) sums[i] += row[i];
  }
  return sums;
}

inline std::vector<int> count_events(const EventTrace& trace, EventKind kind, int world) {
  std::vector<int> counts(static_cast<std::size_t>(world), 0);
  for (const auto& e : trace.events) {
    if (e.kind == kind) ++counts[static_cast<std::size_t>(e.rank)];
  }
  return counts;
}

inline std::size_t volume(const EventTrace& trace, std::optional<Locality> locality = {}) {
  std::size_t total = 0;
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::Recv && (!locality || e.locality == locality)) total += e.count;
  }
  return total;
}

}  // namespace lanesim::test
