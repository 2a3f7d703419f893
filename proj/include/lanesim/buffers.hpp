#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lanesim/topology.hpp"

namespace lanesim {

struct BufferId {
  std::uint32_t value = 0;
  auto operator<=>(const BufferId&) const = default;
};

// Which of the per-GPU buffers a handle refers to. Every GPU carries a send
// buffer, a receive buffer and a scratch buffer, all partitioned identically
// across the processes sharing the GPU.
enum class BufferRole : std::uint8_t { Send, Recv, Scratch };

const char* to_string(BufferRole role);

// Contiguous element range inside one shared buffer.
struct Region {
  BufferId buffer;
  std::size_t offset = 0;
  std::size_t length = 0;

  std::size_t end() const { return offset + length; }
  Region sub(std::size_t rel_offset, std::size_t sub_length) const {
    return {buffer, offset + rel_offset, sub_length};
  }
  bool overlaps(const Region& other) const {
    return buffer == other.buffer && length > 0 && other.length > 0 && offset < other.end() &&
           other.offset < end();
  }
  bool operator==(const Region&) const = default;
};

// Offset and length of part `index` when `count` elements are split into
// `parts` contiguous pieces, lowest indices taking the remainder.
std::pair<std::size_t, std::size_t> even_split(std::size_t count, std::size_t parts,
                                               std::size_t index);

enum class FillKind { Ones, Ramp, SeededRandomInt };

struct Fill {
  FillKind kind = FillKind::Ones;
  std::uint64_t seed = 42;
};

// Accepts "ones", "ramp", "rand" and "seeded-random-int".
Fill parse_fill(std::string_view name, std::uint64_t seed);
const char* to_string(FillKind kind);

// Random stream used for the send buffer of a GPU.
inline std::uint64_t fill_stream(GpuKey gpu) {
  return (static_cast<std::uint64_t>(gpu.node_id) << 32) | static_cast<std::uint32_t>(gpu.gpu_id);
}

// Deterministic send-buffer contents for one GPU. Every value is an integer
// below 2^20 so sums over up to 2^33 contributors stay exact in a double.
std::vector<double> generate_fill(const Fill& fill, std::uint64_t stream, std::size_t count);

struct SharedBuffer {
  BufferId id;
  RankInfo owner;
  BufferRole role = BufferRole::Send;
  std::size_t element_count = 0;
  // Empty when the owning pool does not materialize data.
  std::vector<double> elements;
};

struct IpcHandle {
  BufferId buffer_id;
  std::size_t element_count = 0;
};

// Stand-in for IPC memory handle exchange: leaders publish, co-located
// processes resolve.
class IpcRegistry {
 public:
  void publish(const RankInfo& owner, BufferRole role, IpcHandle handle);
  bool published(GpuKey gpu, BufferRole role) const;

  // Throws ResolutionError if nothing is published for `target` yet or if
  // `target` is not the requester's own GPU.
  IpcHandle resolve(const RankInfo& requester, GpuKey target, BufferRole role) const;
  IpcHandle resolve(const RankInfo& requester, BufferRole role) const {
    return resolve(requester, requester.gpu(), role);
  }

 private:
  std::map<std::pair<GpuKey, BufferRole>, IpcHandle> handles_;
};

// Owns the simulated device memory of one run.
class BufferPool {
 public:
  // With materialize=false buffers only carry sizes; data movement becomes a
  // no-op, which is enough for message accounting and cost modeling.
  explicit BufferPool(bool materialize = true) : materialize_(materialize) {}

  // Only leaders may allocate; publishes the new buffer in `registry`.
  const SharedBuffer& allocate(const RankInfo& owner, std::size_t count, const Fill& fill,
                               IpcRegistry& registry, BufferRole role = BufferRole::Send);

  // Zero-initialised allocation (receive and scratch buffers).
  const SharedBuffer& allocate_zeroed(const RankInfo& owner, std::size_t count,
                                      IpcRegistry& registry, BufferRole role);

  bool materialized() const { return materialize_; }
  const SharedBuffer& get(BufferId id) const;
  std::size_t size() const { return buffers_.size(); }

  // Throws BoundsError when the region runs past its buffer.
  void check(const Region& region) const;
  std::span<double> data(const Region& region);
  std::span<const double> data(const Region& region) const;

 private:
  const SharedBuffer& insert(const RankInfo& owner, std::size_t count, std::vector<double> data,
                             IpcRegistry& registry, BufferRole role);

  bool materialize_;
  std::deque<SharedBuffer> buffers_;  // stable references across allocations
};

// A process's window into the buffer published for its GPU.
struct BufferView {
  BufferId buffer_id;
  std::size_t offset = 0;
  std::size_t length = 0;
  RankInfo holder;

  Region region() const { return {buffer_id, offset, length}; }
};

// The window at (c_buf / ppg) * local_rank, remainder going to the lowest
// local ranks. Passing ppg = 1 yields the whole buffer.
BufferView open_view(const RankInfo& holder, const IpcRegistry& registry, int ppg,
                     BufferRole role = BufferRole::Send);

}  // namespace lanesim
