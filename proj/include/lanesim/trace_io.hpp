#pragma once

#include <iosfwd>
#include <string>

#include "lanesim/simcore.hpp"

namespace lanesim {

// JSON-lines, one event per line:
//   {"step":..,"kind":..,"src":..,"dst":..,"tag":..,"count":..,
//    "locality_class":..,"rank":..,"stage":..}
// locality_class is null for kernel events.
void write_jsonl(std::ostream& os, const EventTrace& trace);
std::string to_jsonl(const EventTrace& trace);

// Rebuilds a trace from write_jsonl output. Throws TraceError on bad input.
EventTrace parse_jsonl(std::istream& is);

// Hex SHA-256 of the JSON-lines rendering.
std::string trace_digest(const EventTrace& trace);

// Checks, from the events alone, that every send has exactly one receive with
// the same (src, dst, tag, count) and that endpoints agree with the event's
// rank. Throws TraceError describing the first violation.
void verify_pairing(const EventTrace& trace);

}  // namespace lanesim
