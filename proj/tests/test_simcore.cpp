#include <sstream>

#include "doctest.h"
#include "lanesim/errors.hpp"
#include "lanesim/harness.hpp"
#include "lanesim/simcore.hpp"
#include "lanesim/trace_io.hpp"

using namespace lanesim;

namespace {

// Two GPUs on one node, one rank each; every rank owns a send and a scratch buffer.
struct Pair {
  TopologySpec spec = build_topology(1, 2, 1);
  BufferPool pool;
  IpcRegistry registry;
  Region buf[2];
  Region scratch[2];
  ProgramSet programs = ProgramSet(2);

  Pair(std::vector<double> a, std::vector<double> b) {
    const std::vector<double>* init[] = {&a, &b};
    for (int r = 0; r < 2; ++r) {
      const auto info = rank_info(spec, r);
      const auto n = init[r]->size();
      buf[r] = {pool.allocate_zeroed(info, n, registry, BufferRole::Send).id, 0, n};
      scratch[r] = {pool.allocate_zeroed(info, n, registry, BufferRole::Scratch).id, 0, n};
      std::copy(init[r]->begin(), init[r]->end(), pool.data(buf[r]).begin());
    }
  }

  std::vector<double> values(int r) {
    auto d = pool.data(buf[r]);
    return {d.begin(), d.end()};
  }
};

const std::uint32_t kTag = make_tag(TagSpace::Test, Stage::Local, 1);

}  // namespace

TEST_CASE("one message then a local sum") {
  Pair p({1, 2}, {10, 20});
  p.programs[0].send(1, kTag, p.buf[0], Stage::Local);
  p.programs[1].recv(0, kTag, p.scratch[1], Stage::Local);
  p.programs[1].reduce(p.buf[1], p.scratch[1], Stage::Local);
  const auto trace = run(p.spec, p.pool, p.programs);
  CHECK(p.values(1) == std::vector<double>{11, 22});
  REQUIRE(trace.events.size() == 3);
  CHECK(trace.events[0].kind == EventKind::Send);
  CHECK(trace.events[1].kind == EventKind::Recv);
  CHECK(trace.events[1].locality == Locality::IntraNode);
  CHECK(trace.events[2].kind == EventKind::Reduce);
  CHECK(trace.events[2].step == trace.events[1].step);
  CHECK_NOTHROW(verify_pairing(trace));
}

TEST_CASE("unmatched receive deadlocks and names the rank") {
  Pair p({1}, {2});
  p.programs[0].recv(1, kTag, p.buf[0], Stage::Local);
  try {
    run(p.spec, p.pool, p.programs);
    FAIL("expected a deadlock");
  } catch (const DeadlockError& e) {
    const std::string what = e.what();
    CHECK(what.find("rank 0") != std::string::npos);
    CHECK(what.find("recv from 1") != std::string::npos);
  }
}

TEST_CASE("length mismatch on a matched pair") {
  Pair p({1, 2}, {3, 4});
  p.programs[0].send(1, kTag, p.buf[0], Stage::Local);
  p.programs[1].recv(0, kTag, p.scratch[1].sub(0, 1), Stage::Local);
  CHECK_THROWS_AS(run(p.spec, p.pool, p.programs), ProtocolError);
}

TEST_CASE("program count must match the world") {
  Pair p({1}, {2});
  p.programs.pop_back();
  CHECK_THROWS_AS(run(p.spec, p.pool, p.programs), ProtocolError);
}

TEST_CASE("reduce_local") {
  Pair p({1, 1, 0, 0}, {0});
  const Region dst = p.buf[0].sub(0, 2);
  const Region src = p.buf[0].sub(2, 2);
  p.pool.data(src)[0] = 2;
  p.pool.data(src)[1] = 3;
  reduce_local(p.pool, dst, src);
  CHECK(p.values(0) == std::vector<double>{3, 4, 2, 3});

  CHECK_NOTHROW(reduce_local(p.pool, p.buf[0].sub(1, 0), p.buf[0].sub(1, 0)));
  CHECK_THROWS_AS(reduce_local(p.pool, dst, dst), AliasingError);
  CHECK_THROWS_AS(reduce_local(p.pool, p.buf[0].sub(0, 2), p.buf[0].sub(1, 2)), AliasingError);
  CHECK_THROWS_AS(reduce_local(p.pool, dst, p.buf[0].sub(2, 1)), ProtocolError);
}

TEST_CASE("exchange in both directions completes") {
  Pair p({1, 2}, {5, 7});
  for (int r = 0; r < 2; ++r) {
    p.programs[static_cast<std::size_t>(r)].exchange({1 - r, kTag, p.buf[r]},
                                                     {1 - r, kTag, p.scratch[r]}, Stage::Exchange);
    p.programs[static_cast<std::size_t>(r)].reduce(p.buf[r], p.scratch[r], Stage::Exchange);
  }
  run(p.spec, p.pool, p.programs);
  CHECK(p.values(0) == std::vector<double>{6, 9});
  CHECK(p.values(1) == std::vector<double>{6, 9});
}

TEST_CASE("barrier waits for every member") {
  Pair p({1}, {2});
  p.programs[0].barrier(3, {0, 1});
  p.programs[0].send(1, kTag, p.buf[0], Stage::Local);
  p.programs[1].barrier(3, {0, 1});
  p.programs[1].recv(0, kTag, p.scratch[1], Stage::Local);
  CHECK_NOTHROW(run(p.spec, p.pool, p.programs));

  Pair lonely({1}, {2});
  lonely.programs[0].barrier(3, {0, 1});
  CHECK_THROWS_AS(run(lonely.spec, lonely.pool, lonely.programs), DeadlockError);
}

TEST_CASE("traces and buffers are identical across runs") {
  for (Algorithm a : kAllAlgorithms) {
    CAPTURE(to_string(a));
    const auto spec = build_topology(2, 2, 2);
    RunOptions opts;
    opts.fill = {FillKind::SeededRandomInt, 42};
    const auto first = run_cell(a, spec, 37, opts);
    const auto second = run_cell(a, spec, 37, opts);
    CHECK(first.trace == second.trace);
    CHECK(first.gpu_results == second.gpu_results);
    CHECK(trace_digest(first.trace) == trace_digest(second.trace));
  }
}

TEST_CASE("ones fill sums to the number of gpus everywhere") {
  for (Algorithm a : kAllAlgorithms) {
    const auto spec = build_topology(2, 4, 2);
    const auto cell = run_cell(a, spec, 24);
    for (const auto& gpu : cell.gpu_results) {
      for (double v : gpu) REQUIRE(v == 8.0);
    }
  }
}

TEST_CASE("json-lines round trip and independent pairing check") {
  const auto cell = run_cell(Algorithm::Lane, build_topology(2, 2, 1), 9);
  const std::string text = to_jsonl(cell.trace);
  std::istringstream in(text);
  const auto parsed = parse_jsonl(in);
  CHECK(parsed.events == cell.trace.events);
  CHECK(text.find("\"locality_class\":\"inter_node\"") != std::string::npos);
  const auto first_line = text.substr(0, text.find('\n'));
  CHECK(first_line.rfind("{\"step\":", 0) == 0);

  EventTrace broken = cell.trace;
  for (auto it = broken.events.begin(); it != broken.events.end(); ++it) {
    if (it->kind == EventKind::Recv) {
      broken.events.erase(it);
      break;
    }
  }
  CHECK_THROWS_AS(verify_pairing(broken), TraceError);

  std::istringstream garbage("{\"step\":1,\"kind\":\"teleport\"}\n");
  CHECK_THROWS_AS(parse_jsonl(garbage), TraceError);
}
