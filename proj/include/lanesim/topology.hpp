#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lanesim {

using Rank = int;

// Shape of the modeled cluster: nodes x GPUs per node x processes per GPU.
// Ranks are laid out node-major, then GPU, then local rank:
//   rank = ((node * gpus_per_node) + gpu) * ppg + local_rank
class TopologySpec {
 public:
  int nodes() const { return nodes_; }
  int gpus_per_node() const { return gpus_per_node_; }
  int ppg() const { return ppg_; }
  int world_size() const { return nodes_ * gpus_per_node_ * ppg_; }
  int gpu_count() const { return nodes_ * gpus_per_node_; }

  bool operator==(const TopologySpec&) const = default;

 private:
  friend TopologySpec build_topology(int nodes, int gpus_per_node, int ppg);
  TopologySpec(int nodes, int gpus_per_node, int ppg)
      : nodes_(nodes), gpus_per_node_(gpus_per_node), ppg_(ppg) {}

  int nodes_;
  int gpus_per_node_;
  int ppg_;
};

// Throws ConfigError naming the offending field when any factor is < 1.
TopologySpec build_topology(int nodes, int gpus_per_node, int ppg);

std::ostream& operator<<(std::ostream& os, const TopologySpec& spec);

struct GpuKey {
  int node_id = 0;
  int gpu_id = 0;

  auto operator<=>(const GpuKey&) const = default;
};

struct RankInfo {
  Rank rank = 0;
  int node_id = 0;
  int gpu_id = 0;
  int local_rank = 0;
  bool is_leader = false;

  GpuKey gpu() const { return {node_id, gpu_id}; }
  bool operator==(const RankInfo&) const = default;
};

// Throws BoundsError for rank outside [0, world_size).
RankInfo rank_info(const TopologySpec& spec, Rank rank);

// Inverse of rank_info.
Rank rank_of(const TopologySpec& spec, int node_id, int gpu_id, int local_rank);

// Index of a GPU in [0, gpu_count), node-major.
inline int gpu_index(const TopologySpec& spec, GpuKey key) {
  return key.node_id * spec.gpus_per_node() + key.gpu_id;
}

enum class Locality { IntraGpu, IntraNode, InterNode };

Locality classify(const RankInfo& a, const RankInfo& b);
const char* to_string(Locality locality);

// Ordered set of global ranks. Member order defines ring neighbours.
class Communicator {
 public:
  Communicator() = default;
  explicit Communicator(std::vector<Rank> ranks) : ranks_(std::move(ranks)) {}

  int size() const { return static_cast<int>(ranks_.size()); }
  Rank operator[](int index) const { return ranks_[static_cast<std::size_t>(index)]; }
  std::span<const Rank> ranks() const { return ranks_; }

  // Position of a rank in this communicator, or -1.
  int index_of(Rank rank) const;
  bool contains(Rank rank) const { return index_of(rank) >= 0; }

  bool operator==(const Communicator&) const = default;

 private:
  std::vector<Rank> ranks_;
};

// The communicators the multi-process-per-GPU algorithms need:
//   new_comm(l)     all ranks with local rank l, one per GPU
//   comm_group(r)   same local rank, same node as r
//   comm_lane(r)    same local rank, same GPU slot as r, one per node
class CommunicatorMap {
 public:
  const TopologySpec& spec() const { return spec_; }
  const Communicator& world() const { return world_; }
  const Communicator& new_comm(int local_rank) const;
  const Communicator& comm_group(Rank rank) const;
  const Communicator& comm_lane(Rank rank) const;

 private:
  friend CommunicatorMap build_communicators(const TopologySpec& spec);
  explicit CommunicatorMap(const TopologySpec& spec) : spec_(spec) {}

  TopologySpec spec_;
  Communicator world_;
  std::vector<Communicator> new_comms_;  // [local_rank]
  std::vector<Communicator> groups_;     // [local_rank][node]
  std::vector<Communicator> lanes_;      // [local_rank][gpu]
};

CommunicatorMap build_communicators(const TopologySpec& spec);

}  // namespace lanesim
