#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lanesim/buffers.hpp"
#include "lanesim/topology.hpp"

namespace lanesim {

enum class ReduceOp : std::uint8_t { Sum };

// Phase of an algorithm an action belongs to; used for tags and for the
// per-stage cost breakdown.
enum class Stage : std::uint8_t {
  Local = 0,
  ReduceScatter,
  Allgather,
  Exchange,
  IntraReduceScatter,
  InterAllreduce,
  IntraAllgather,
};

const char* to_string(Stage stage);

// Algorithm identifiers used in the top byte of a message tag.
enum class TagSpace : std::uint8_t {
  Test = 0,
  Ring = 1,
  RecursiveDoubling = 2,
  Rabenseifner = 3,
  ReduceScatter = 4,
  Allgatherv = 5,
  Lane = 6,
};

// tag = algorithm << 24 | stage << 16 | step
constexpr std::uint32_t make_tag(TagSpace space, Stage stage, std::uint32_t step) {
  return (static_cast<std::uint32_t>(space) << 24) | (static_cast<std::uint32_t>(stage) << 16) |
         (step & 0xFFFFu);
}

struct SendOp {
  Rank peer = 0;
  std::uint32_t tag = 0;
  Region region;
};

struct RecvOp {
  Rank peer = 0;
  std::uint32_t tag = 0;
  Region region;
};

// Nonblocking send and receive completed together (Isend + Irecv + Waitall).
struct ExchangeOp {
  SendOp send;
  RecvOp recv;
};

// dst[i] <- dst[i] op src[i]
struct LocalReduce {
  Region dst;
  Region src;
  ReduceOp op = ReduceOp::Sum;
};

struct LocalCopy {
  Region dst;
  Region src;
};

struct BarrierOp {
  std::uint32_t tag = 0;
  std::vector<Rank> members;
};

using ActionBody = std::variant<SendOp, RecvOp, ExchangeOp, LocalReduce, LocalCopy, BarrierOp>;

struct Action {
  ActionBody body;
  Stage stage = Stage::Local;
};

// Straight-line program for one rank. Control flow never depends on payload
// values, so a program set always yields the same trace.
struct RankProgram {
  std::vector<Action> actions;

  void send(Rank dst, std::uint32_t tag, Region region, Stage stage) {
    actions.push_back({SendOp{dst, tag, region}, stage});
  }
  void recv(Rank src, std::uint32_t tag, Region region, Stage stage) {
    actions.push_back({RecvOp{src, tag, region}, stage});
  }
  void exchange(SendOp send, RecvOp recv, Stage stage) {
    actions.push_back({ExchangeOp{send, recv}, stage});
  }
  void reduce(Region dst, Region src, Stage stage, ReduceOp op = ReduceOp::Sum) {
    actions.push_back({LocalReduce{dst, src, op}, stage});
  }
  void copy(Region dst, Region src, Stage stage) { actions.push_back({LocalCopy{dst, src}, stage}); }
  void barrier(std::uint32_t tag, std::vector<Rank> members, Stage stage = Stage::Local) {
    actions.push_back({BarrierOp{tag, std::move(members)}, stage});
  }
};

// One program per global rank, indexed by rank.
using ProgramSet = std::vector<RankProgram>;

enum class EventKind : std::uint8_t { Send, Recv, Reduce, Copy };

const char* to_string(EventKind kind);

// A message produces a Send event on the sender and a Recv event on the
// receiver; local kernels produce Reduce/Copy events with src = dst = rank.
struct TraceEvent {
  int step = 0;
  EventKind kind = EventKind::Send;
  Rank rank = 0;
  Rank src = 0;
  Rank dst = 0;
  std::uint32_t tag = 0;
  std::size_t count = 0;
  std::optional<Locality> locality;  // messages only
  Stage stage = Stage::Local;

  bool operator==(const TraceEvent&) const = default;
};

// Step numbering: every communication action advances the rank's step
// counter before it starts; local kernels take the current value. Kernels
// issued before any communication therefore sit in step 0.
struct EventTrace {
  std::vector<TraceEvent> events;
  std::vector<int> steps_per_rank;

  bool operator==(const EventTrace&) const = default;
};

// dst <- dst op src elementwise. Throws ProtocolError on length mismatch and
// AliasingError when the two non-empty ranges overlap.
void reduce_local(BufferPool& pool, const Region& dst, const Region& src,
                  ReduceOp op = ReduceOp::Sum);

// Executes every program to completion under a fixed round-robin schedule
// with rendezvous semantics (a send completes only once matched).
//
// Throws DeadlockError when no rank can make progress, ProtocolError when a
// matched send/recv pair disagrees on length or the program count is wrong.
EventTrace run(const TopologySpec& spec, BufferPool& pool, const ProgramSet& programs);

}  // namespace lanesim
