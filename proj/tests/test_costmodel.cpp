#include <sstream>

#include "doctest.h"
#include "lanesim/costmodel.hpp"
#include "lanesim/errors.hpp"

using namespace lanesim;

namespace {

TraceEvent message(EventKind kind, int step, Rank src, Rank dst, std::size_t count, Locality l) {
  TraceEvent e;
  e.step = step;
  e.kind = kind;
  e.rank = kind == EventKind::Send ? src : dst;
  e.src = src;
  e.dst = dst;
  e.tag = 1;
  e.count = count;
  e.locality = l;
  return e;
}

void add_message(EventTrace& t, int step, Rank src, Rank dst, std::size_t count, Locality l) {
  t.events.push_back(message(EventKind::Send, step, src, dst, count, l));
  t.events.push_back(message(EventKind::Recv, step, src, dst, count, l));
}

EventTrace timing_trace(Algorithm a, const TopologySpec& spec, std::size_t count,
                        AlgorithmOptions options = {}) {
  RunOptions opts;
  opts.materialize = false;
  opts.algorithm = options;
  return run_cell(a, spec, count, opts).trace;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("empty trace costs nothing") {
  const auto t = evaluate({}, build_topology(2, 2, 1), {});
  CHECK(t.total_seconds == 0.0);
  CHECK(t.messages_total == 0);
  CHECK(t.critical_path_steps == 0);
}

TEST_CASE("single intra-node message") {
  EventTrace t;
  add_message(t, 1, 0, 1, 1000, Locality::IntraNode);
  const CostParams p;
  const auto m = evaluate(t, build_topology(1, 2, 1), p);
  CHECK(m.total_seconds == doctest::Approx(1e-6 + 1000 * 5e-11).epsilon(1e-12));
  CHECK(m.totals(Locality::IntraNode).messages == 1);
  CHECK(m.totals(Locality::IntraNode).elements == 1000);
  CHECK(m.critical_path_steps == 1);
}

TEST_CASE("inter-node messages sharing a nic") {
  const auto spec = build_topology(2, 2, 1);  // ranks 0,1 on node 0; 2,3 on node 1
  EventTrace t;
  add_message(t, 1, 0, 2, 100, Locality::InterNode);
  add_message(t, 1, 1, 3, 100, Locality::InterNode);
  CostParams p;
  const double shared = evaluate(t, spec, p).total_seconds;
  CHECK(shared == doctest::Approx(p.alpha_inter_node + 100 * p.beta_inter_node * 2).epsilon(1e-12));
  p.nics_per_node = 2;
  CHECK(evaluate(t, spec, p).total_seconds ==
        doctest::Approx(p.alpha_inter_node + 100 * p.beta_inter_node).epsilon(1e-12));
}

TEST_CASE("kernels and steps add up") {
  const auto spec = build_topology(1, 2, 1);
  EventTrace t;
  add_message(t, 1, 0, 1, 10, Locality::IntraNode);
  TraceEvent k;
  k.step = 1;
  k.kind = EventKind::Reduce;
  k.rank = k.src = k.dst = 1;
  k.count = 10;
  t.events.push_back(k);
  add_message(t, 2, 1, 0, 10, Locality::IntraNode);
  const CostParams p;
  const double msg = p.alpha_intra_node + 10 * p.beta_intra_node;
  const auto m = evaluate(t, spec, p);
  CHECK(m.total_seconds == doctest::Approx(2 * msg + p.kappa_kernel + 10 * p.gamma_reduce).epsilon(1e-12));
  CHECK(m.kernels_total == 1);
}

TEST_CASE("malformed traces") {
  const auto spec = build_topology(2, 1, 1);
  EventTrace unpaired;
  unpaired.events.push_back(message(EventKind::Send, 1, 0, 1, 4, Locality::InterNode));
  CHECK_THROWS_AS(evaluate(unpaired, spec, {}), TraceError);

  EventTrace mislabelled;
  add_message(mislabelled, 1, 0, 1, 4, Locality::IntraNode);
  CHECK_THROWS_AS(evaluate(mislabelled, spec, {}), TraceError);

  EventTrace outside;
  add_message(outside, 1, 0, 7, 4, Locality::InterNode);
  CHECK_THROWS_AS(evaluate(outside, spec, {}), TraceError);
}

TEST_CASE("parameter validation and parsing") {
  CostParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha_inter_node = 1e-7;  // below intra-node
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.nics_per_node = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.beta_inter_node = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  std::istringstream text("# network\nbeta_inter_node = 1e-9\nnics_per_node=4\n\n");
  const auto parsed = parse_cost_params(text);
  CHECK(parsed.beta_inter_node == 1e-9);
  CHECK(parsed.nics_per_node == 4);
  CHECK(parsed.alpha_intra_node == CostParams{}.alpha_intra_node);
  std::istringstream unknown("gamma = 3\n");
  CHECK_THROWS_AS(parse_cost_params(unknown), UsageError);
}

TEST_CASE("stage breakdown sums to the total") {
  for (Algorithm a : kAllAlgorithms) {
    const auto spec = build_topology(4, 4, 2);
    const auto m = evaluate(timing_trace(a, spec, 4096), spec, {});
    double sum = 0;
    for (const auto& [stage, seconds] : m.stage_seconds) sum += seconds;
    CHECK(sum == doctest::Approx(m.total_seconds).epsilon(1e-12));
  }
}

TEST_CASE("lane beats ring on four nodes at 2^16") {
  const auto spec = build_topology(4, 4, 1);
  const CostParams p;
  const double lane = evaluate(timing_trace(Algorithm::Lane, spec, 1 << 16), spec, p).total_seconds;
  const double ring = evaluate(timing_trace(Algorithm::Ring, spec, 1 << 16), spec, p).total_seconds;
  CHECK(lane < ring);
}

TEST_CASE("scaling every parameter scales every time") {
  const auto spec = build_topology(2, 4, 2);
  for (Algorithm a : kAllAlgorithms) {
    const auto trace = timing_trace(a, spec, 1000);
    const CostParams p;
    for (double k : {0.5, 3.0, 1e3}) {
      CHECK(close(evaluate(trace, spec, p.scaled(k)).total_seconds,
                  k * evaluate(trace, spec, p).total_seconds));
    }
  }
}

TEST_CASE("without latency or contention, time follows the critical-path volume") {
  CostParams p;
  p.alpha_intra_gpu = p.alpha_intra_node = p.alpha_inter_node = 0;
  p.kappa_kernel = p.gamma_reduce = 0;
  p.beta_intra_gpu = p.beta_intra_node = p.beta_inter_node = 2e-10;
  p.nics_per_node = 64;
  const auto spec = build_topology(4, 4, 1);
  for (Algorithm a : {Algorithm::Ring, Algorithm::Lane}) {
    const auto trace = timing_trace(a, spec, 4096);
    // Per step, the rank that receives the most elements.
    std::map<int, std::map<Rank, std::size_t>> received;
    for (const auto& e : trace.events) {
      if (e.kind == EventKind::Recv) received[e.step][e.rank] += e.count;
    }
    std::size_t critical = 0;
    for (const auto& [step, per_rank] : received) {
      std::size_t most = 0;
      for (const auto& [rank, n] : per_rank) most = std::max(most, n);
      critical += most;
    }
    CHECK(close(evaluate(trace, spec, p).total_seconds, 2e-10 * static_cast<double>(critical)));
  }
}

TEST_CASE("raising inter-node latency never shrinks the lane advantage") {
  for (int nodes : {2, 4, 8}) {
    const auto spec = build_topology(nodes, 4, 1);
    for (std::size_t count : {std::size_t{1} << 10, std::size_t{1} << 16}) {
      const auto lane = timing_trace(Algorithm::Lane, spec, count);
      const auto ring = timing_trace(Algorithm::Ring, spec, count);
      double previous = -1e300;
      for (double alpha : {2e-6, 5e-6, 1e-5, 5e-5, 1e-4}) {
        CostParams p;
        p.alpha_inter_node = alpha;
        const double advantage =
            evaluate(ring, spec, p).total_seconds - evaluate(lane, spec, p).total_seconds;
        CHECK(advantage >= previous);
        previous = advantage;
      }
    }
  }
}

TEST_CASE("sweep") {
  const Algorithm ring[] = {Algorithm::Ring};
  const std::size_t one_count[] = {64};
  const TopologySpec one_spec[] = {build_topology(2, 2, 1)};
  CHECK(sweep(ring, one_count, one_spec, {}).size() == 1);
  CHECK_THROWS_AS(sweep(std::span<const Algorithm>{}, one_count, one_spec, {}), ConfigError);

  SUBCASE("time grows with count") {
    const Algorithm algos[] = {Algorithm::Ring, Algorithm::Lane};
    std::vector<std::size_t> counts;
    for (int k = 10; k <= 20; ++k) counts.push_back(std::size_t{1} << k);
    const TopologySpec eight[] = {build_topology(8, 4, 1)};
    const auto rows = sweep(algos, counts, eight, {});
    REQUIRE(rows.size() == 2 * counts.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].algorithm == rows[i - 1].algorithm) {
        CHECK(rows[i].time.total_seconds >= rows[i - 1].time.total_seconds);
      }
    }
  }
  SUBCASE("ppg axis: decreasing, then flat or rising") {
    const Algorithm standard[] = {Algorithm::PpgStandard};
    const std::size_t count[] = {std::size_t{1} << 20};
    std::vector<TopologySpec> specs;
    for (int ppg : {1, 2, 4, 8, 16}) specs.push_back(build_topology(8, 4, ppg));
    for (int nics : {1, 8}) {
      CostParams p;
      p.nics_per_node = nics;
      const auto rows = sweep(standard, count, specs, p);
      std::size_t i = 1;
      while (i < rows.size() && rows[i].time.total_seconds <= rows[i - 1].time.total_seconds) ++i;
      for (; i < rows.size(); ++i) CHECK(rows[i].time.total_seconds >= rows[i - 1].time.total_seconds);
    }
  }
  SUBCASE("unsupported cells stay as rows") {
    const Algorithm rd[] = {Algorithm::RecursiveDoubling};
    const TopologySpec three[] = {build_topology(3, 1, 1)};
    const auto rows = sweep(rd, one_count, three, {});
    REQUIRE(rows.size() == 1);
    CHECK_FALSE(rows[0].supported);
  }
}
