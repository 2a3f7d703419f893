#include "lanesim/topology.hpp"

#include <algorithm>
#include <ostream>
#include <string>

#include "lanesim/errors.hpp"

namespace lanesim {

namespace {

void require_positive(int value, const char* field) {
  if (value < 1) {
    throw ConfigError(std::string(field) + " must be >= 1, got " + std::to_string(value));
  }
}

}  // namespace

TopologySpec build_topology(int nodes, int gpus_per_node, int ppg) {
  require_positive(nodes, "nodes");
  require_positive(gpus_per_node, "gpus_per_node");
  require_positive(ppg, "ppg");
  return TopologySpec(nodes, gpus_per_node, ppg);
}

std::ostream& operator<<(std::ostream& os, const TopologySpec& spec) {
  return os << "nodes=" << spec.nodes() << " gpus_per_node=" << spec.gpus_per_node()
            << " ppg=" << spec.ppg();
}

RankInfo rank_info(const TopologySpec& spec, Rank rank) {
  if (rank < 0 || rank >= spec.world_size()) {
    throw BoundsError("rank " + std::to_string(rank) + " outside [0, " +
                      std::to_string(spec.world_size()) + ")");
  }
  RankInfo info;
  info.rank = rank;
  info.local_rank = rank % spec.ppg();
  const int gpu_slot = rank / spec.ppg();
  info.gpu_id = gpu_slot % spec.gpus_per_node();
  info.node_id = gpu_slot / spec.gpus_per_node();
  info.is_leader = info.local_rank == 0;
  return info;
}

Rank rank_of(const TopologySpec& spec, int node_id, int gpu_id, int local_rank) {
  if (node_id < 0 || node_id >= spec.nodes() || gpu_id < 0 || gpu_id >= spec.gpus_per_node() ||
      local_rank < 0 || local_rank >= spec.ppg()) {
    throw BoundsError("coordinates (" + std::to_string(node_id) + ", " + std::to_string(gpu_id) +
                      ", " + std::to_string(local_rank) + ") outside topology");
  }
  return (node_id * spec.gpus_per_node() + gpu_id) * spec.ppg() + local_rank;
}

Locality classify(const RankInfo& a, const RankInfo& b) {
  if (a.node_id != b.node_id) return Locality::InterNode;
  if (a.gpu_id != b.gpu_id) return Locality::IntraNode;
  return Locality::IntraGpu;
}

const char* to_string(Locality locality) {
  switch (locality) {
    case Locality::IntraGpu:
      return "intra_gpu";
    case Locality::IntraNode:
      return "intra_node";
    case Locality::InterNode:
      return "inter_node";
  }
  return "unknown";
}

int Communicator::index_of(Rank rank) const {
  auto it = std::lower_bound(ranks_.begin(), ranks_.end(), rank);
  if (it == ranks_.end() || *it != rank) return -1;
  return static_cast<int>(it - ranks_.begin());
}

const Communicator& CommunicatorMap::new_comm(int local_rank) const {
  if (local_rank < 0 || local_rank >= spec_.ppg()) {
    throw BoundsError("local rank " + std::to_string(local_rank) + " outside [0, " +
                      std::to_string(spec_.ppg()) + ")");
  }
  return new_comms_[static_cast<std::size_t>(local_rank)];
}

const Communicator& CommunicatorMap::comm_group(Rank rank) const {
  const RankInfo info = rank_info(spec_, rank);
  return groups_[static_cast<std::size_t>(info.local_rank * spec_.nodes() + info.node_id)];
}

const Communicator& CommunicatorMap::comm_lane(Rank rank) const {
  const RankInfo info = rank_info(spec_, rank);
  return lanes_[static_cast<std::size_t>(info.local_rank * spec_.gpus_per_node() + info.gpu_id)];
}

CommunicatorMap build_communicators(const TopologySpec& spec) {
  CommunicatorMap map(spec);

  std::vector<Rank> all(static_cast<std::size_t>(spec.world_size()));
  for (Rank r = 0; r < spec.world_size(); ++r) all[static_cast<std::size_t>(r)] = r;
  map.world_ = Communicator(std::move(all));

  // Iterating node-major keeps every member list ascending in canonical rank.
  for (int l = 0; l < spec.ppg(); ++l) {
    std::vector<Rank> members;
    for (int node = 0; node < spec.nodes(); ++node) {
      for (int gpu = 0; gpu < spec.gpus_per_node(); ++gpu) {
        members.push_back(rank_of(spec, node, gpu, l));
      }
    }
    map.new_comms_.emplace_back(std::move(members));

    for (int node = 0; node < spec.nodes(); ++node) {
      std::vector<Rank> group;
      for (int gpu = 0; gpu < spec.gpus_per_node(); ++gpu) group.push_back(rank_of(spec, node, gpu, l));
      map.groups_.emplace_back(std::move(group));
    }
    for (int gpu = 0; gpu < spec.gpus_per_node(); ++gpu) {
      std::vector<Rank> lane;
      for (int node = 0; node < spec.nodes(); ++node) lane.push_back(rank_of(spec, node, gpu, l));
      map.lanes_.emplace_back(std::move(lane));
    }
  }
  return map;
}

}  // namespace lanesim
