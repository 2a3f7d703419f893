#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lanesim/buffers.hpp"
#include "lanesim/simcore.hpp"
#include "lanesim/topology.hpp"

namespace lanesim {

// Division of a buffer into one contiguous chunk per communicator member.
// Counts differ by at most one; the first `count % n` members take the extra
// element. displacements[i] = displacements[i - 1] + counts[i - 1].
struct ChunkPlan {
  std::vector<std::size_t> counts;
  std::vector<std::size_t> displacements;
  std::size_t base_chunk = 0;
  std::size_t total = 0;

  std::size_t size() const { return counts.size(); }
};

// Throws ConfigError for n == 0. A zero count gives an all-zero plan.
ChunkPlan compute_chunk_plan(std::size_t count, std::size_t n);

// The three equally sized ranges a member works on. send == recv marks an
// in-place call; scratch receives incoming data before it is reduced.
struct MemberBuffers {
  Region send;
  Region recv;
  Region scratch;

  bool in_place() const { return send == recv; }
};

// Tag space and stage label applied to the actions a generator emits. When
// `stage` is unset the generator uses its own phase labels.
struct CollectiveScope {
  TagSpace space;
  std::optional<Stage> stage;
};

enum class InnerAlgorithm { Ring, RecursiveDoubling, Rabenseifner };

const char* to_string(InnerAlgorithm inner);

// Each generator appends actions to programs[comm[i]] using members[i].
// Lengths must agree across members or ProtocolError is thrown.

// Ring reduce-scatter followed by ring allgather. Member i sends chunk i
// first and ends the reduce phase owning chunk i + 1. 2(n-1) sends per
// member, n-1 reduction kernels.
void ring_allreduce(const Communicator& comm, std::span<const MemberBuffers> members,
                    ProgramSet& programs, CollectiveScope scope = {TagSpace::Ring, std::nullopt});

// log2(n) full-buffer exchanges. Throws UnsupportedSizeError unless n is a
// power of two.
void recursive_doubling_allreduce(const Communicator& comm, std::span<const MemberBuffers> members,
                                  ProgramSet& programs,
                                  CollectiveScope scope = {TagSpace::RecursiveDoubling,
                                                           std::nullopt});

// reduce_scatter_ring + allgatherv_ring over an even chunk plan.
void rabenseifner_allreduce(const Communicator& comm, std::span<const MemberBuffers> members,
                            ProgramSet& programs,
                            CollectiveScope scope = {TagSpace::Rabenseifner, std::nullopt});

// Leaves the fully reduced chunk i in members[i].recv at plan.displacements[i].
void reduce_scatter_ring(const Communicator& comm, std::span<const MemberBuffers> members,
                         const ChunkPlan& plan, ProgramSet& programs,
                         CollectiveScope scope = {TagSpace::ReduceScatter, std::nullopt});

// Member i contributes chunk i of views[i]; afterwards every view holds all
// chunks. Zero-length chunks still travel as zero-length messages.
void allgatherv_ring(const Communicator& comm, std::span<const Region> views, const ChunkPlan& plan,
                     ProgramSet& programs,
                     CollectiveScope scope = {TagSpace::Allgatherv, std::nullopt});

// Dispatches to one of the three flat algorithms.
void flat_allreduce(InnerAlgorithm inner, const Communicator& comm,
                    std::span<const MemberBuffers> members, ProgramSet& programs,
                    std::optional<CollectiveScope> scope = std::nullopt);

// Three-stage multi-lane allreduce for every rank with `local_rank`:
//   1. ring reduce-scatter inside comm_group
//   2. allreduce of the owned chunk across comm_lane (inner algorithm)
//   3. ring allgatherv inside comm_group
// `by_rank` is indexed by global rank; entries for other local ranks are
// ignored.
void lane_allreduce(const CommunicatorMap& cmap, int local_rank,
                    std::span<const MemberBuffers> by_rank, InnerAlgorithm inner,
                    ProgramSet& programs);

// One independent flat allreduce per new_comm, each over its own partition
// of the shared buffers.
void multi_ppg_standard(const CommunicatorMap& cmap, std::span<const MemberBuffers> by_rank,
                        InnerAlgorithm inner, ProgramSet& programs);

// lane_allreduce once per local rank; every process is its own lane.
void multi_ppg_lane(const CommunicatorMap& cmap, std::span<const MemberBuffers> by_rank,
                    InnerAlgorithm inner, ProgramSet& programs);

// Elementwise sum by direct accumulation in input order. Throws
// ProtocolError on length mismatch.
std::vector<double> oracle_allreduce(std::span<const std::vector<double>> buffers);

}  // namespace lanesim
