#include "lanesim/simcore.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>
#include <tuple>

#include "lanesim/errors.hpp"

namespace lanesim {

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Local:
      return "local";
    case Stage::ReduceScatter:
      return "reduce_scatter";
    case Stage::Allgather:
      return "allgather";
    case Stage::Exchange:
      return "exchange";
    case Stage::IntraReduceScatter:
      return "intra_reduce_scatter";
    case Stage::InterAllreduce:
      return "inter_allreduce";
    case Stage::IntraAllgather:
      return "intra_allgatherv";
  }
  return "unknown";
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Send:
      return "send";
    case EventKind::Recv:
      return "recv";
    case EventKind::Reduce:
      return "reduce";
    case EventKind::Copy:
      return "copy";
  }
  return "unknown";
}

void reduce_local(BufferPool& pool, const Region& dst, const Region& src, ReduceOp op) {
  if (dst.length != src.length) {
    throw ProtocolError("reduce_local length mismatch: dst " + std::to_string(dst.length) +
                        " vs src " + std::to_string(src.length));
  }
  pool.check(dst);
  pool.check(src);
  if (dst.length == 0) return;
  if (dst.overlaps(src)) {
    throw AliasingError("reduce_local ranges overlap in buffer " + std::to_string(dst.buffer.value) +
                        ": [" + std::to_string(dst.offset) + ", " + std::to_string(dst.end()) +
                        ") and [" + std::to_string(src.offset) + ", " + std::to_string(src.end()) +
                        ")");
  }
  if (!pool.materialized()) return;
  auto out = pool.data(dst);
  auto in = pool.data(src);
  switch (op) {
    case ReduceOp::Sum:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
      break;
  }
}

namespace {

using MatchKey = std::tuple<Rank, Rank, std::uint32_t>;  // src, dst, tag

struct Posted {
  Rank rank;
  Region region;
  int step;
  Stage stage;
};

struct RankState {
  std::size_t pc = 0;
  int step = 0;
  bool started = false;
  bool send_done = true;
  bool recv_done = true;
  bool barrier_done = true;
};

class Engine {
 public:
  Engine(const TopologySpec& spec, BufferPool& pool, const ProgramSet& programs)
      : pool_(pool), programs_(programs), state_(programs.size()) {
    infos_.reserve(programs.size());
    for (Rank r = 0; r < spec.world_size(); ++r) infos_.push_back(rank_info(spec, r));
  }

  EventTrace execute() {
    std::size_t remaining = 0;
    for (const auto& p : programs_) remaining += p.actions.empty() ? 0 : 1;

    while (remaining > 0) {
      bool progress = false;
      for (Rank r = 0; r < static_cast<Rank>(programs_.size()); ++r) {
        const bool was_running = !finished(r);
        progress |= advance(r);
        if (was_running && finished(r)) --remaining;
      }
      if (!progress) throw DeadlockError(describe_blocked());
    }
    trace_.steps_per_rank.reserve(state_.size());
    for (const auto& s : state_) trace_.steps_per_rank.push_back(s.step);
    return std::move(trace_);
  }

 private:
  bool finished(Rank r) const {
    return state_[static_cast<std::size_t>(r)].pc >= programs_[static_cast<std::size_t>(r)].actions.size();
  }

  // Runs rank r until it blocks or ends. Returns true if anything changed.
  bool advance(Rank r) {
    RankState& st = state_[static_cast<std::size_t>(r)];
    const auto& actions = programs_[static_cast<std::size_t>(r)].actions;
    bool progress = false;
    while (st.pc < actions.size()) {
      const Action& action = actions[st.pc];
      if (!st.started) {
        start(r, action);
        st.started = true;
        progress = true;
      }
      if (!(st.send_done && st.recv_done && st.barrier_done)) break;
      st.started = false;
      ++st.pc;
      progress = true;
    }
    return progress;
  }

  void start(Rank r, const Action& action) {
    RankState& st = state_[static_cast<std::size_t>(r)];
    std::visit(
        [&](const auto& op) {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, SendOp>) {
            ++st.step;
            post_send(r, op, action.stage);
          } else if constexpr (std::is_same_v<T, RecvOp>) {
            ++st.step;
            post_recv(r, op, action.stage);
          } else if constexpr (std::is_same_v<T, ExchangeOp>) {
            ++st.step;
            post_send(r, op.send, action.stage);
            post_recv(r, op.recv, action.stage);
          } else if constexpr (std::is_same_v<T, LocalReduce>) {
            reduce_local(pool_, op.dst, op.src, op.op);
            record_kernel(r, EventKind::Reduce, op.dst.length, action.stage);
          } else if constexpr (std::is_same_v<T, LocalCopy>) {
            copy_local(op.dst, op.src);
            record_kernel(r, EventKind::Copy, op.dst.length, action.stage);
          } else if constexpr (std::is_same_v<T, BarrierOp>) {
            arrive(r, op);
          }
        },
        action.body);
  }

  void check_peer(Rank r, Rank peer) const {
    if (peer < 0 || peer >= static_cast<Rank>(programs_.size())) {
      throw ProtocolError("rank " + std::to_string(r) + " addresses nonexistent rank " +
                          std::to_string(peer));
    }
  }

  void post_send(Rank r, const SendOp& op, Stage stage) {
    check_peer(r, op.peer);
    pool_.check(op.region);
    RankState& st = state_[static_cast<std::size_t>(r)];
    st.send_done = false;
    const MatchKey key{r, op.peer, op.tag};
    Posted mine{r, op.region, st.step, stage};
    auto it = recvs_.find(key);
    if (it != recvs_.end()) {
      Posted peer = it->second.front();
      it->second.pop_front();
      if (it->second.empty()) recvs_.erase(it);
      deliver(mine, peer, op.tag);
    } else {
      sends_[key].push_back(mine);
    }
  }

  void post_recv(Rank r, const RecvOp& op, Stage stage) {
    check_peer(r, op.peer);
    pool_.check(op.region);
    RankState& st = state_[static_cast<std::size_t>(r)];
    st.recv_done = false;
    const MatchKey key{op.peer, r, op.tag};
    Posted mine{r, op.region, st.step, stage};
    auto it = sends_.find(key);
    if (it != sends_.end()) {
      Posted peer = it->second.front();
      it->second.pop_front();
      if (it->second.empty()) sends_.erase(it);
      deliver(peer, mine, op.tag);
    } else {
      recvs_[key].push_back(mine);
    }
  }

  void deliver(const Posted& sender, const Posted& receiver, std::uint32_t tag) {
    if (sender.region.length != receiver.region.length) {
      throw ProtocolError("length mismatch on message " + std::to_string(sender.rank) + " -> " +
                          std::to_string(receiver.rank) + " tag " + std::to_string(tag) +
                          ": sent " + std::to_string(sender.region.length) + ", expected " +
                          std::to_string(receiver.region.length));
    }
    copy_local(receiver.region, sender.region);
    const Locality locality = classify(infos_[static_cast<std::size_t>(sender.rank)],
                                       infos_[static_cast<std::size_t>(receiver.rank)]);
    const std::size_t count = sender.region.length;
    trace_.events.push_back({sender.step, EventKind::Send, sender.rank, sender.rank, receiver.rank,
                             tag, count, locality, sender.stage});
    trace_.events.push_back({receiver.step, EventKind::Recv, receiver.rank, sender.rank,
                             receiver.rank, tag, count, locality, receiver.stage});
    state_[static_cast<std::size_t>(sender.rank)].send_done = true;
    state_[static_cast<std::size_t>(receiver.rank)].recv_done = true;
  }

  void copy_local(const Region& dst, const Region& src) {
    if (dst.length != src.length) {
      throw ProtocolError("copy length mismatch: dst " + std::to_string(dst.length) + " vs src " +
                          std::to_string(src.length));
    }
    pool_.check(dst);
    pool_.check(src);
    if (!pool_.materialized() || dst.length == 0 || dst == src) return;
    auto out = pool_.data(dst);
    auto in = pool_.data(src);
    if (dst.overlaps(src)) {
      std::vector<double> tmp(in.begin(), in.end());
      std::copy(tmp.begin(), tmp.end(), out.begin());
    } else {
      std::copy(in.begin(), in.end(), out.begin());
    }
  }

  void record_kernel(Rank r, EventKind kind, std::size_t count, Stage stage) {
    const int step = state_[static_cast<std::size_t>(r)].step;
    trace_.events.push_back({step, kind, r, r, r, 0, count, std::nullopt, stage});
  }

  void arrive(Rank r, const BarrierOp& op) {
    if (std::find(op.members.begin(), op.members.end(), r) == op.members.end()) {
      throw ProtocolError("rank " + std::to_string(r) + " entered barrier " +
                          std::to_string(op.tag) + " it is not a member of");
    }
    RankState& st = state_[static_cast<std::size_t>(r)];
    st.barrier_done = false;
    auto key = std::make_pair(op.tag, op.members);
    auto& arrived = barriers_[key];
    arrived.push_back(r);
    if (arrived.size() == op.members.size()) {
      for (Rank m : arrived) state_[static_cast<std::size_t>(m)].barrier_done = true;
      barriers_.erase(key);
    }
  }

  std::string describe_blocked() const {
    std::ostringstream os;
    os << "deadlock: no rank can progress;";
    for (Rank r = 0; r < static_cast<Rank>(programs_.size()); ++r) {
      if (finished(r)) continue;
      const RankState& st = state_[static_cast<std::size_t>(r)];
      os << " rank " << r << " blocked at action " << st.pc << " (";
      std::visit(
          [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, SendOp>) {
              os << "send to " << op.peer << " tag " << op.tag;
            } else if constexpr (std::is_same_v<T, RecvOp>) {
              os << "recv from " << op.peer << " tag " << op.tag;
            } else if constexpr (std::is_same_v<T, ExchangeOp>) {
              if (!st.send_done) os << "send to " << op.send.peer << " tag " << op.send.tag;
              if (!st.send_done && !st.recv_done) os << ", ";
              if (!st.recv_done) os << "recv from " << op.recv.peer << " tag " << op.recv.tag;
            } else if constexpr (std::is_same_v<T, BarrierOp>) {
              os << "barrier " << op.tag;
            } else {
              os << "local";
            }
          },
          programs_[static_cast<std::size_t>(r)].actions[st.pc].body);
      os << ");";
    }
    return os.str();
  }

  BufferPool& pool_;
  const ProgramSet& programs_;
  std::vector<RankState> state_;
  std::vector<RankInfo> infos_;
  std::map<MatchKey, std::deque<Posted>> sends_;
  std::map<MatchKey, std::deque<Posted>> recvs_;
  std::map<std::pair<std::uint32_t, std::vector<Rank>>, std::vector<Rank>> barriers_;
  EventTrace trace_;
};

}  // namespace

EventTrace run(const TopologySpec& spec, BufferPool& pool, const ProgramSet& programs) {
  if (static_cast<int>(programs.size()) != spec.world_size()) {
    throw ProtocolError("expected " + std::to_string(spec.world_size()) + " programs, got " +
                        std::to_string(programs.size()));
  }
  return Engine(spec, pool, programs).execute();
}

}  // namespace lanesim
