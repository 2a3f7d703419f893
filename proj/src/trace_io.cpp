#include "lanesim/trace_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "lanesim/errors.hpp"

namespace lanesim {

namespace {

using ordered_json = nlohmann::ordered_json;

template <typename Enum>
Enum enum_from(const std::string& text, int last, const char* what) {
  for (int i = 0; i <= last; ++i) {
    if (text == to_string(static_cast<Enum>(i))) return static_cast<Enum>(i);
  }
  throw TraceError(std::string("unknown ") + what + " '" + text + "'");
}

Locality locality_from(const std::string& text) {
  for (Locality l : {Locality::IntraGpu, Locality::IntraNode, Locality::InterNode}) {
    if (text == to_string(l)) return l;
  }
  throw TraceError("unknown locality_class '" + text + "'");
}

}  // namespace

void write_jsonl(std::ostream& os, const EventTrace& trace) {
  for (const TraceEvent& e : trace.events) {
    ordered_json j;
    j["step"] = e.step;
    j["kind"] = to_string(e.kind);
    j["src"] = e.src;
    j["dst"] = e.dst;
    j["tag"] = e.tag;
    j["count"] = e.count;
    j["locality_class"] = e.locality ? ordered_json(to_string(*e.locality)) : ordered_json(nullptr);
    j["rank"] = e.rank;
    j["stage"] = to_string(e.stage);
    os << j.dump() << '\n';
  }
}

std::string to_jsonl(const EventTrace& trace) {
  std::ostringstream os;
  write_jsonl(os, trace);
  return os.str();
}

EventTrace parse_jsonl(std::istream& is) {
  EventTrace trace;
  std::string line;
  std::size_t line_no = 0;
  std::map<Rank, int> max_step;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceEvent e;
      e.step = j.at("step").get<int>();
      e.kind = enum_from<EventKind>(j.at("kind").get<std::string>(), 3, "kind");
      e.src = j.at("src").get<Rank>();
      e.dst = j.at("dst").get<Rank>();
      e.tag = j.at("tag").get<std::uint32_t>();
      e.count = j.at("count").get<std::size_t>();
      const auto& loc = j.at("locality_class");
      if (!loc.is_null()) e.locality = locality_from(loc.get<std::string>());
      e.rank = j.value("rank", e.kind == EventKind::Recv ? e.dst : e.src);
      e.stage = enum_from<Stage>(j.value("stage", std::string("local")), 6, "stage");
      max_step[e.rank] = std::max(max_step[e.rank], e.step);
      trace.events.push_back(e);
    } catch (const nlohmann::json::exception& ex) {
      throw TraceError("line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (!max_step.empty()) {
    trace.steps_per_rank.assign(static_cast<std::size_t>(max_step.rbegin()->first) + 1, 0);
    for (auto [rank, step] : max_step) {
      if (rank < 0) throw TraceError("negative rank in trace");
      trace.steps_per_rank[static_cast<std::size_t>(rank)] = step;
    }
  }
  return trace;
}

std::string trace_digest(const EventTrace& trace) {
  const std::string text = to_jsonl(trace);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int md_len = 0;
  if (EVP_Digest(text.data(), text.size(), md.data(), &md_len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < md_len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
  return os.str();
}

void verify_pairing(const EventTrace& trace) {
  using Key = std::tuple<Rank, Rank, std::uint32_t, std::size_t>;
  std::map<Key, long> balance;
  for (const TraceEvent& e : trace.events) {
    if (e.step < 0) throw TraceError("negative step on rank " + std::to_string(e.rank));
    switch (e.kind) {
      case EventKind::Send:
        if (e.rank != e.src) throw TraceError("send event recorded on non-sender");
        if (!e.locality) throw TraceError("send event without locality_class");
        ++balance[{e.src, e.dst, e.tag, e.count}];
        break;
      case EventKind::Recv:
        if (e.rank != e.dst) throw TraceError("recv event recorded on non-receiver");
        if (!e.locality) throw TraceError("recv event without locality_class");
        --balance[{e.src, e.dst, e.tag, e.count}];
        break;
      case EventKind::Reduce:
      case EventKind::Copy:
        if (e.src != e.rank || e.dst != e.rank) throw TraceError("kernel event with remote endpoint");
        break;
    }
  }
  for (const auto& [key, count] : balance) {
    if (count != 0) {
      auto [src, dst, tag, n] = key;
      throw TraceError("unpaired message " + std::to_string(src) + " -> " + std::to_string(dst) +
                       " tag " + std::to_string(tag) + " count " + std::to_string(n) + ": " +
                       (count > 0 ? "send without recv" : "recv without send"));
    }
  }
}

}  // namespace lanesim
