#include "lanesim/collectives.hpp"

#include <bit>
#include <string>

#include "lanesim/errors.hpp"

namespace lanesim {

const char* to_string(InnerAlgorithm inner) {
  switch (inner) {
    case InnerAlgorithm::Ring:
      return "ring";
    case InnerAlgorithm::RecursiveDoubling:
      return "rd";
    case InnerAlgorithm::Rabenseifner:
      return "rabenseifner";
  }
  return "unknown";
}

ChunkPlan compute_chunk_plan(std::size_t count, std::size_t n) {
  if (n == 0) throw ConfigError("chunk plan needs at least one member");
  ChunkPlan plan;
  plan.total = count;
  plan.base_chunk = count / n;
  plan.counts.resize(n);
  plan.displacements.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plan.counts[i] = even_split(count, n, i).second;
    plan.displacements[i] = i == 0 ? 0 : plan.displacements[i - 1] + plan.counts[i - 1];
  }
  return plan;
}

namespace {

std::size_t wrap(long value, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((value % m) + m) % m);
}

void check_members(const Communicator& comm, std::span<const MemberBuffers> members) {
  if (static_cast<int>(members.size()) != comm.size()) {
    throw ProtocolError("communicator of " + std::to_string(comm.size()) + " members given " +
                        std::to_string(members.size()) + " buffer sets");
  }
  if (members.empty()) return;
  const std::size_t length = members.front().send.length;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& m = members[i];
    if (m.send.length != length || m.recv.length != length || m.scratch.length != length) {
      throw ProtocolError("member " + std::to_string(comm[static_cast<int>(i)]) +
                          " buffer lengths differ from member " + std::to_string(comm[0]) + " (" +
                          std::to_string(length) + " elements)");
    }
  }
}

void check_plan(const ChunkPlan& plan, const Communicator& comm, std::size_t length) {
  if (static_cast<int>(plan.size()) != comm.size() || plan.total != length) {
    throw ProtocolError("chunk plan for " + std::to_string(plan.total) + " elements over " +
                        std::to_string(plan.size()) + " members does not match a " +
                        std::to_string(length) + "-element view over " +
                        std::to_string(comm.size()) + " members");
  }
}

RankProgram& program_of(ProgramSet& programs, Rank rank) {
  if (rank < 0 || static_cast<std::size_t>(rank) >= programs.size()) {
    throw ProtocolError("no program slot for rank " + std::to_string(rank));
  }
  return programs[static_cast<std::size_t>(rank)];
}

Region chunk(const Region& base, const ChunkPlan& plan, std::size_t index) {
  return base.sub(plan.displacements[index], plan.counts[index]);
}

// Ring reduce phase. Member i ends owning chunk (i + shift) mod n in recv.
// Steps are tagged step_base .. step_base + n - 2.
void emit_ring_reduce(const Communicator& comm, std::span<const MemberBuffers> members,
                      const ChunkPlan& plan, long shift, CollectiveScope scope, Stage stage,
                      std::uint32_t step_base, ProgramSet& programs) {
  const std::size_t n = static_cast<std::size_t>(comm.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = members[i];
    RankProgram& program = program_of(programs, comm[static_cast<int>(i)]);
    if (n == 1) {
      if (!m.in_place()) program.copy(m.recv, m.send, stage);
      continue;
    }
    const Rank next = comm[static_cast<int>((i + 1) % n)];
    const Rank prev = comm[static_cast<int>((i + n - 1) % n)];
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const long step = static_cast<long>(k);
      const std::size_t send_chunk = wrap(static_cast<long>(i) + shift - 1 - step, n);
      const std::size_t recv_chunk = wrap(static_cast<long>(i) + shift - 2 - step, n);
      const std::uint32_t tag = make_tag(scope.space, stage, step_base + static_cast<std::uint32_t>(k));
      const Region& source = k == 0 ? m.send : m.recv;
      const Region target = chunk(m.recv, plan, recv_chunk);
      const Region landing = m.in_place() ? chunk(m.scratch, plan, recv_chunk) : target;
      const Region operand = m.in_place() ? landing : chunk(m.send, plan, recv_chunk);
      program.exchange(SendOp{next, tag, chunk(source, plan, send_chunk)},
                       RecvOp{prev, tag, landing}, stage);
      program.reduce(target, operand, stage);
    }
  }
}

// Ring gather phase; member i starts owning chunk (i + shift) mod n of view.
void emit_ring_gather(const Communicator& comm, std::span<const Region> views,
                      const ChunkPlan& plan, long shift, CollectiveScope scope, Stage stage,
                      std::uint32_t step_base, ProgramSet& programs) {
  const std::size_t n = static_cast<std::size_t>(comm.size());
  if (n == 1) return;
  for (std::size_t i = 0; i < n; ++i) {
    RankProgram& program = program_of(programs, comm[static_cast<int>(i)]);
    const Rank next = comm[static_cast<int>((i + 1) % n)];
    const Rank prev = comm[static_cast<int>((i + n - 1) % n)];
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const long step = static_cast<long>(k);
      const std::size_t send_chunk = wrap(static_cast<long>(i) + shift - step, n);
      const std::size_t recv_chunk = wrap(static_cast<long>(i) + shift - 1 - step, n);
      const std::uint32_t tag = make_tag(scope.space, stage, step_base + static_cast<std::uint32_t>(k));
      program.exchange(SendOp{next, tag, chunk(views[i], plan, send_chunk)},
                       RecvOp{prev, tag, chunk(views[i], plan, recv_chunk)}, stage);
    }
  }
}

std::vector<Region> recv_regions(std::span<const MemberBuffers> members) {
  std::vector<Region> views;
  views.reserve(members.size());
  for (const auto& m : members) views.push_back(m.recv);
  return views;
}

std::size_t member_length(std::span<const MemberBuffers> members) {
  return members.empty() ? 0 : members.front().send.length;
}

}  // namespace

void ring_allreduce(const Communicator& comm, std::span<const MemberBuffers> members,
                    ProgramSet& programs, CollectiveScope scope) {
  check_members(comm, members);
  if (members.empty()) return;
  const std::size_t n = static_cast<std::size_t>(comm.size());
  const ChunkPlan plan = compute_chunk_plan(member_length(members), n);
  const Stage reduce_stage = scope.stage.value_or(Stage::ReduceScatter);
  const Stage gather_stage = scope.stage.value_or(Stage::Allgather);
  emit_ring_reduce(comm, members, plan, 1, scope, reduce_stage, 0, programs);
  const auto views = recv_regions(members);
  emit_ring_gather(comm, views, plan, 1, scope, gather_stage, static_cast<std::uint32_t>(n - 1),
                   programs);
}

void recursive_doubling_allreduce(const Communicator& comm, std::span<const MemberBuffers> members,
                                  ProgramSet& programs, CollectiveScope scope) {
  check_members(comm, members);
  const std::size_t n = static_cast<std::size_t>(comm.size());
  if (!std::has_single_bit(n)) {
    throw UnsupportedSizeError("recursive doubling needs a power-of-two communicator, got " +
                               std::to_string(n) + " members");
  }
  const Stage stage = scope.stage.value_or(Stage::Exchange);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = members[i];
    RankProgram& program = program_of(programs, comm[static_cast<int>(i)]);
    if (!m.in_place()) program.copy(m.recv, m.send, scope.stage.value_or(Stage::Local));
    std::uint32_t round = 0;
    for (std::size_t stride = 1; stride < n; stride <<= 1, ++round) {
      const Rank partner = comm[static_cast<int>(i ^ stride)];
      const std::uint32_t tag = make_tag(scope.space, stage, round);
      program.exchange(SendOp{partner, tag, m.recv}, RecvOp{partner, tag, m.scratch}, stage);
      program.reduce(m.recv, m.scratch, stage);
    }
  }
}

void rabenseifner_allreduce(const Communicator& comm, std::span<const MemberBuffers> members,
                            ProgramSet& programs, CollectiveScope scope) {
  check_members(comm, members);
  if (members.empty()) return;
  const ChunkPlan plan =
      compute_chunk_plan(member_length(members), static_cast<std::size_t>(comm.size()));
  const Stage reduce_stage = scope.stage.value_or(Stage::ReduceScatter);
  const Stage gather_stage = scope.stage.value_or(Stage::Allgather);
  emit_ring_reduce(comm, members, plan, 0, scope, reduce_stage, 0, programs);
  const auto views = recv_regions(members);
  emit_ring_gather(comm, views, plan, 0, scope, gather_stage,
                   static_cast<std::uint32_t>(comm.size() - 1), programs);
}

void reduce_scatter_ring(const Communicator& comm, std::span<const MemberBuffers> members,
                         const ChunkPlan& plan, ProgramSet& programs, CollectiveScope scope) {
  check_members(comm, members);
  if (members.empty()) return;
  check_plan(plan, comm, member_length(members));
  emit_ring_reduce(comm, members, plan, 0, scope, scope.stage.value_or(Stage::ReduceScatter), 0,
                   programs);
}

void allgatherv_ring(const Communicator& comm, std::span<const Region> views, const ChunkPlan& plan,
                     ProgramSet& programs, CollectiveScope scope) {
  if (static_cast<int>(views.size()) != comm.size()) {
    throw ProtocolError("communicator of " + std::to_string(comm.size()) + " members given " +
                        std::to_string(views.size()) + " views");
  }
  for (const Region& v : views) check_plan(plan, comm, v.length);
  emit_ring_gather(comm, views, plan, 0, scope, scope.stage.value_or(Stage::Allgather), 0,
                   programs);
}

void flat_allreduce(InnerAlgorithm inner, const Communicator& comm,
                    std::span<const MemberBuffers> members, ProgramSet& programs,
                    std::optional<CollectiveScope> scope) {
  switch (inner) {
    case InnerAlgorithm::Ring:
      ring_allreduce(comm, members, programs, scope.value_or(CollectiveScope{TagSpace::Ring, {}}));
      return;
    case InnerAlgorithm::RecursiveDoubling:
      recursive_doubling_allreduce(
          comm, members, programs,
          scope.value_or(CollectiveScope{TagSpace::RecursiveDoubling, {}}));
      return;
    case InnerAlgorithm::Rabenseifner:
      rabenseifner_allreduce(comm, members, programs,
                             scope.value_or(CollectiveScope{TagSpace::Rabenseifner, {}}));
      return;
  }
}

void lane_allreduce(const CommunicatorMap& cmap, int local_rank,
                    std::span<const MemberBuffers> by_rank, InnerAlgorithm inner,
                    ProgramSet& programs) {
  const TopologySpec& spec = cmap.spec();
  if (static_cast<int>(by_rank.size()) != spec.world_size()) {
    throw ProtocolError("lane allreduce needs buffers for all " +
                        std::to_string(spec.world_size()) + " ranks");
  }
  auto gather = [&](const Communicator& comm) {
    std::vector<MemberBuffers> out;
    for (Rank r : comm.ranks()) out.push_back(by_rank[static_cast<std::size_t>(r)]);
    return out;
  };

  // Every group has gpus_per_node members and the same view length, so one
  // plan serves all groups.
  const Communicator& first_group = cmap.comm_group(rank_of(spec, 0, 0, local_rank));
  const std::size_t length = by_rank[static_cast<std::size_t>(first_group[0])].send.length;
  const ChunkPlan plan = compute_chunk_plan(length, static_cast<std::size_t>(first_group.size()));

  std::vector<Communicator> groups;
  for (int node = 0; node < spec.nodes(); ++node) {
    groups.push_back(cmap.comm_group(rank_of(spec, node, 0, local_rank)));
  }

  for (const Communicator& group : groups) {
    const auto members = gather(group);
    reduce_scatter_ring(group, members, plan, programs,
                        {TagSpace::Lane, Stage::IntraReduceScatter});
  }

  for (int gpu = 0; gpu < spec.gpus_per_node(); ++gpu) {
    const Communicator& lane = cmap.comm_lane(rank_of(spec, 0, gpu, local_rank));
    const auto slot = static_cast<std::size_t>(gpu);  // index within comm_group
    std::vector<MemberBuffers> members;
    for (Rank r : lane.ranks()) {
      const MemberBuffers& full = by_rank[static_cast<std::size_t>(r)];
      const Region owned = chunk(full.recv, plan, slot);
      members.push_back({owned, owned, chunk(full.scratch, plan, slot)});
    }
    flat_allreduce(inner, lane, members, programs,
                   CollectiveScope{TagSpace::Lane, Stage::InterAllreduce});
  }

  for (const Communicator& group : groups) {
    const auto views = recv_regions(gather(group));
    allgatherv_ring(group, views, plan, programs, {TagSpace::Lane, Stage::IntraAllgather});
  }
}

void multi_ppg_standard(const CommunicatorMap& cmap, std::span<const MemberBuffers> by_rank,
                        InnerAlgorithm inner, ProgramSet& programs) {
  for (int l = 0; l < cmap.spec().ppg(); ++l) {
    const Communicator& comm = cmap.new_comm(l);
    std::vector<MemberBuffers> members;
    for (Rank r : comm.ranks()) members.push_back(by_rank[static_cast<std::size_t>(r)]);
    flat_allreduce(inner, comm, members, programs);
  }
}

void multi_ppg_lane(const CommunicatorMap& cmap, std::span<const MemberBuffers> by_rank,
                    InnerAlgorithm inner, ProgramSet& programs) {
  for (int l = 0; l < cmap.spec().ppg(); ++l) lane_allreduce(cmap, l, by_rank, inner, programs);
}

std::vector<double> oracle_allreduce(std::span<const std::vector<double>> buffers) {
  if (buffers.empty()) return {};
  std::vector<double> sum(buffers.front().size(), 0.0);
  for (std::size_t b = 0; b < buffers.size(); ++b) {
    if (buffers[b].size() != sum.size()) {
      throw ProtocolError("oracle input " + std::to_string(b) + " has " +
                          std::to_string(buffers[b].size()) + " elements, expected " +
                          std::to_string(sum.size()));
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += buffers[b][i];
  }
  return sum;
}

}  // namespace lanesim
