#include "lanesim/buffers.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "lanesim/errors.hpp"

namespace lanesim {

namespace {

std::string describe(GpuKey gpu) {
  return "(node " + std::to_string(gpu.node_id) + ", gpu " + std::to_string(gpu.gpu_id) + ")";
}

}  // namespace

const char* to_string(BufferRole role) {
  switch (role) {
    case BufferRole::Send:
      return "send";
    case BufferRole::Recv:
      return "recv";
    case BufferRole::Scratch:
      return "scratch";
  }
  return "unknown";
}

std::pair<std::size_t, std::size_t> even_split(std::size_t count, std::size_t parts,
                                               std::size_t index) {
  const std::size_t base = count / parts;
  const std::size_t extra = count % parts;
  const std::size_t length = base + (index < extra ? 1 : 0);
  const std::size_t offset = index * base + (index < extra ? index : extra);
  return {offset, length};
}

Fill parse_fill(std::string_view name, std::uint64_t seed) {
  if (name == "ones") return {FillKind::Ones, seed};
  if (name == "ramp") return {FillKind::Ramp, seed};
  if (name == "rand" || name == "seeded-random-int") return {FillKind::SeededRandomInt, seed};
  throw UsageError("fill: unknown generator '" + std::string(name) + "' (expected ones|ramp|rand)");
}

const char* to_string(FillKind kind) {
  switch (kind) {
    case FillKind::Ones:
      return "ones";
    case FillKind::Ramp:
      return "ramp";
    case FillKind::SeededRandomInt:
      return "rand";
  }
  return "unknown";
}

std::vector<double> generate_fill(const Fill& fill, std::uint64_t stream, std::size_t count) {
  std::vector<double> out(count);
  switch (fill.kind) {
    case FillKind::Ones:
      std::fill(out.begin(), out.end(), 1.0);
      break;
    case FillKind::Ramp:
      for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(i);
      break;
    case FillKind::SeededRandomInt: {
      // mt19937_64 output is fixed by the standard, unlike the distributions.
      std::mt19937_64 engine(fill.seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
      for (auto& v : out) v = static_cast<double>(engine() >> 44);  // [0, 2^20)
      break;
    }
  }
  return out;
}

void IpcRegistry::publish(const RankInfo& owner, BufferRole role, IpcHandle handle) {
  if (!owner.is_leader) {
    throw OwnershipError("rank " + std::to_string(owner.rank) +
                         " is not a leader and cannot publish a buffer handle");
  }
  auto [it, inserted] = handles_.try_emplace({owner.gpu(), role}, handle);
  if (!inserted) {
    throw ConflictError(std::string(to_string(role)) + " buffer already published for " +
                        describe(owner.gpu()));
  }
}

bool IpcRegistry::published(GpuKey gpu, BufferRole role) const {
  return handles_.contains({gpu, role});
}

IpcHandle IpcRegistry::resolve(const RankInfo& requester, GpuKey target, BufferRole role) const {
  if (target != requester.gpu()) {
    throw ResolutionError("rank " + std::to_string(requester.rank) + " on " +
                          describe(requester.gpu()) + " cannot open a handle from " +
                          describe(target));
  }
  auto it = handles_.find({target, role});
  if (it == handles_.end()) {
    throw ResolutionError("no " + std::string(to_string(role)) + " buffer published yet for " +
                          describe(target));
  }
  return it->second;
}

const SharedBuffer& BufferPool::allocate(const RankInfo& owner, std::size_t count, const Fill& fill,
                                         IpcRegistry& registry, BufferRole role) {
  std::vector<double> data;
  if (materialize_ && owner.is_leader && count > 0) {
    data = generate_fill(fill, fill_stream(owner.gpu()), count);
  }
  return insert(owner, count, std::move(data), registry, role);
}

const SharedBuffer& BufferPool::allocate_zeroed(const RankInfo& owner, std::size_t count,
                                                IpcRegistry& registry, BufferRole role) {
  std::vector<double> data;
  if (materialize_) data.assign(count, 0.0);
  return insert(owner, count, std::move(data), registry, role);
}

const SharedBuffer& BufferPool::insert(const RankInfo& owner, std::size_t count,
                                       std::vector<double> data, IpcRegistry& registry,
                                       BufferRole role) {
  if (!owner.is_leader) {
    throw OwnershipError("rank " + std::to_string(owner.rank) + " (local rank " +
                         std::to_string(owner.local_rank) + ") is not a leader and cannot allocate");
  }
  if (count == 0) throw ConfigError("buffer element count must be > 0");
  if (registry.published(owner.gpu(), role)) {
    throw ConflictError(std::string(to_string(role)) + " buffer already allocated for " +
                        describe(owner.gpu()));
  }
  SharedBuffer buffer;
  buffer.id = BufferId{static_cast<std::uint32_t>(buffers_.size())};
  buffer.owner = owner;
  buffer.role = role;
  buffer.element_count = count;
  buffer.elements = std::move(data);
  registry.publish(owner, role, IpcHandle{buffer.id, count});
  buffers_.push_back(std::move(buffer));
  return buffers_.back();
}

const SharedBuffer& BufferPool::get(BufferId id) const {
  if (id.value >= buffers_.size()) {
    throw BoundsError("unknown buffer id " + std::to_string(id.value));
  }
  return buffers_[id.value];
}

void BufferPool::check(const Region& region) const {
  const SharedBuffer& buffer = get(region.buffer);
  if (region.offset > buffer.element_count || region.length > buffer.element_count - region.offset) {
    throw BoundsError("region [" + std::to_string(region.offset) + ", " +
                      std::to_string(region.end()) + ") exceeds buffer " +
                      std::to_string(region.buffer.value) + " of " +
                      std::to_string(buffer.element_count) + " elements");
  }
}

std::span<double> BufferPool::data(const Region& region) {
  check(region);
  if (!materialize_) return {};
  return std::span<double>(buffers_[region.buffer.value].elements).subspan(region.offset,
                                                                           region.length);
}

std::span<const double> BufferPool::data(const Region& region) const {
  check(region);
  if (!materialize_) return {};
  return std::span<const double>(buffers_[region.buffer.value].elements)
      .subspan(region.offset, region.length);
}

BufferView open_view(const RankInfo& holder, const IpcRegistry& registry, int ppg,
                     BufferRole role) {
  if (ppg < 1 || holder.local_rank >= ppg) {
    throw BoundsError("local rank " + std::to_string(holder.local_rank) +
                      " has no partition when ppg = " + std::to_string(ppg));
  }
  const IpcHandle handle = registry.resolve(holder, role);
  auto [offset, length] = even_split(handle.element_count, static_cast<std::size_t>(ppg),
                                     static_cast<std::size_t>(holder.local_rank));
  return BufferView{handle.buffer_id, offset, length, holder};
}

}  // namespace lanesim
