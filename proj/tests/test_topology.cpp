#include <random>
#include <set>
#include <tuple>

#include "doctest.h"
#include "lanesim/errors.hpp"
#include "lanesim/topology.hpp"

using namespace lanesim;

TEST_CASE("world size is the product of the three factors") {
  CHECK(build_topology(8, 4, 1).world_size() == 32);
  CHECK(build_topology(2, 4, 2).world_size() == 16);
  CHECK(build_topology(1, 1, 1).world_size() == 1);
}

TEST_CASE("invalid factors name the field") {
  auto message = [](int n, int g, int p) {
    try {
      build_topology(n, g, p);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(0, 4, 1).find("nodes") != std::string::npos);
  CHECK(message(2, -1, 1).find("gpus_per_node") != std::string::npos);
  CHECK(message(2, 4, 0).find("ppg") != std::string::npos);
}

TEST_CASE("rank_info on (2,4,2)") {
  const auto spec = build_topology(2, 4, 2);
  CHECK(rank_info(spec, 0) == RankInfo{0, 0, 0, 0, true});
  CHECK(rank_info(spec, 5) == RankInfo{5, 0, 2, 1, false});
  CHECK(rank_info(spec, 15) == RankInfo{15, 1, 3, 1, false});
  CHECK_THROWS_AS(rank_info(spec, 16), BoundsError);
  CHECK_THROWS_AS(rank_info(spec, -1), BoundsError);
}

TEST_CASE("rank_info is a bijection with one leader per gpu for every world up to 512") {
  for (int n = 1; n <= 512; ++n) {
    for (int g = 1; n * g <= 512; ++g) {
      for (int p = 1; n * g * p <= 512; ++p) {
        const auto spec = build_topology(n, g, p);
        std::set<std::tuple<int, int, int>> seen;
        int leaders = 0;
        for (Rank r = 0; r < spec.world_size(); ++r) {
          const auto info = rank_info(spec, r);
          REQUIRE(info.node_id < n);
          REQUIRE(info.gpu_id < g);
          REQUIRE(info.local_rank == r % p);
          REQUIRE(rank_of(spec, info.node_id, info.gpu_id, info.local_rank) == r);
          seen.emplace(info.node_id, info.gpu_id, info.local_rank);
          leaders += info.is_leader ? 1 : 0;
        }
        REQUIRE(static_cast<int>(seen.size()) == spec.world_size());
        REQUIRE(leaders == n * g);
      }
    }
  }
}

TEST_CASE("communicator sizes") {
  const auto map = build_communicators(build_topology(2, 4, 1));
  CHECK(map.new_comm(0).size() == 8);
  for (Rank r = 0; r < 8; ++r) {
    CHECK(map.comm_group(r).size() == 4);
    CHECK(map.comm_lane(r).size() == 2);
  }

  const auto two = build_communicators(build_topology(2, 4, 2));
  CHECK(two.new_comm(0).size() == 8);
  CHECK(two.new_comm(1).size() == 8);
  for (Rank r : two.new_comm(0).ranks()) CHECK_FALSE(two.new_comm(1).contains(r));

  const auto single = build_communicators(build_topology(1, 4, 1));
  for (Rank r = 0; r < 4; ++r) CHECK(single.comm_lane(r).size() == 1);
}

TEST_CASE("communicator partition laws over a random sample of [1,8]^3") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> factor(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = factor(rng), g = factor(rng), p = factor(rng);
    CAPTURE(n);
    CAPTURE(g);
    CAPTURE(p);
    const auto spec = build_topology(n, g, p);
    const auto map = build_communicators(spec);
    REQUIRE(map.world().size() == spec.world_size());
    for (int l = 0; l < p; ++l) {
      const auto& comm = map.new_comm(l);
      REQUIRE(comm.size() == n * g);
      REQUIRE(std::is_sorted(comm.ranks().begin(), comm.ranks().end()));
      std::multiset<Rank> by_group, by_lane;
      for (Rank r : comm.ranks()) {
        const auto me = rank_info(spec, r);
        REQUIRE(me.local_rank == l);
        const auto& group = map.comm_group(r);
        const auto& lane = map.comm_lane(r);
        REQUIRE(group.size() == g);
        REQUIRE(lane.size() == n);
        int shared = 0;
        for (Rank q : group.ranks()) {
          const auto other = rank_info(spec, q);
          REQUIRE(other.node_id == me.node_id);
          REQUIRE(other.local_rank == l);
          if (lane.contains(q)) ++shared;
        }
        for (Rank q : lane.ranks()) {
          const auto other = rank_info(spec, q);
          REQUIRE(other.gpu_id == me.gpu_id);
          REQUIRE(other.local_rank == l);
        }
        REQUIRE(shared == 1);
        REQUIRE(group.contains(r));
        REQUIRE(lane.contains(r));
        if (group[0] == r) by_group.insert(group.ranks().begin(), group.ranks().end());
        if (lane[0] == r) by_lane.insert(lane.ranks().begin(), lane.ranks().end());
      }
      // Groups partition new_comm by node, lanes by gpu slot.
      const std::multiset<Rank> all(comm.ranks().begin(), comm.ranks().end());
      REQUIRE(by_group == all);
      REQUIRE(by_lane == all);
    }
  }
}

TEST_CASE("locality classes") {
  const auto spec = build_topology(2, 2, 2);
  const auto a = rank_info(spec, 0);
  CHECK(classify(a, rank_info(spec, 1)) == Locality::IntraGpu);
  CHECK(classify(a, rank_info(spec, 2)) == Locality::IntraNode);
  CHECK(classify(a, rank_info(spec, 4)) == Locality::InterNode);
  CHECK(std::string(to_string(Locality::InterNode)) == "inter_node");
}
