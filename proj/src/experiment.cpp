#include "lanesim/experiment.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "lanesim/errors.hpp"
#include "lanesim/trace_io.hpp"

namespace lanesim {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> items;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (!item.empty()) items.push_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return items;
}

template <typename T>
T parse_number(std::string_view text, std::string_view field) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw UsageError(std::string(field) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return value;
}

std::vector<int> parse_ints(std::string_view text, std::string_view field) {
  std::vector<int> out;
  for (auto item : split_list(text)) out.push_back(parse_number<int>(item, field));
  return out;
}

bool parse_bool(std::string_view text, std::string_view field) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw UsageError(std::string(field) + ": expected true|false, got '" + std::string(text) + "'");
}

std::string normalize_key(std::string_view key) {
  std::string out(trim(key));
  while (!out.empty() && out.front() == '-') out.erase(out.begin());
  std::replace(out.begin(), out.end(), '_', '-');
  return out;
}

std::string format_seconds(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ec == std::errc{} ? ptr : buf);
}

std::string json_path_for(const std::string& csv_path) {
  const auto slash = csv_path.find_last_of('/');
  const auto dot = csv_path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
    return csv_path.substr(0, dot) + ".json";
  }
  return csv_path + ".json";
}

}  // namespace

std::vector<std::size_t> parse_counts(std::string_view text) {
  std::vector<std::size_t> out;
  for (auto item : split_list(text)) {
    if (item.starts_with("2^")) {
      const auto exponent = parse_number<unsigned>(item.substr(2), "counts");
      if (exponent >= 63) throw UsageError("counts: exponent too large in '" + std::string(item) + "'");
      out.push_back(std::size_t{1} << exponent);
    } else {
      out.push_back(parse_number<std::size_t>(item, "counts"));
    }
  }
  return out;
}

void ExperimentConfig::validate() const {
  auto positive_axis = [](const std::vector<int>& axis, const char* field) {
    if (axis.empty()) throw UsageError(std::string(field) + ": axis is empty");
    for (int v : axis) {
      if (v < 1) throw UsageError(std::string(field) + ": values must be >= 1, got " + std::to_string(v));
    }
  };
  positive_axis(nodes, "nodes");
  positive_axis(gpus_per_node, "gpus-per-node");
  positive_axis(ppg, "ppg");
  if (algorithms.empty()) throw UsageError("algorithms: axis is empty");
  if (counts.empty()) throw UsageError("counts: axis is empty");
  for (std::size_t c : counts) {
    if (c < 1) throw UsageError("counts: values must be >= 1");
    if (c > max_count) {
      throw UsageError("counts: " + std::to_string(c) + " exceeds max-count " +
                       std::to_string(max_count));
    }
  }
  for (int n : nodes) {
    for (int g : gpus_per_node) {
      for (int p : ppg) {
        if (static_cast<long>(n) * g * p > max_world) {
          throw UsageError("nodes/gpus-per-node/ppg: world size " + std::to_string(n * g * p) +
                           " exceeds max-world " + std::to_string(max_world));
        }
      }
    }
  }
  if (repetitions < 1) throw UsageError("repetitions: must be >= 1");
  try {
    cost.validate();
  } catch (const ConfigError& e) {
    throw UsageError(std::string("cost parameters: ") + e.what());
  }
}

void apply_setting(ExperimentConfig& config, std::string_view raw_key, std::string_view raw_value) {
  const std::string key = normalize_key(raw_key);
  const std::string_view value = trim(raw_value);
  if (key == "nodes") {
    config.nodes = parse_ints(value, key);
  } else if (key == "gpus-per-node") {
    config.gpus_per_node = parse_ints(value, key);
  } else if (key == "ppg") {
    config.ppg = parse_ints(value, key);
  } else if (key == "algorithms") {
    config.algorithms.clear();
    for (auto item : split_list(value)) config.algorithms.push_back(parse_algorithm(item));
  } else if (key == "counts") {
    config.counts = parse_counts(value);
  } else if (key == "fill") {
    config.fill = parse_fill(value, config.fill.seed);
  } else if (key == "seed") {
    config.fill.seed = parse_number<std::uint64_t>(value, key);
  } else if (key == "cost-config") {
    config.cost = load_cost_params(std::string(value), config.cost);
  } else if (key == "out") {
    config.out_path = std::string(value);
  } else if (key == "trace-out") {
    config.trace_out = std::string(value);
  } else if (key == "verify") {
    config.verify = parse_bool(value, key);
  } else if (key == "repetitions") {
    config.repetitions = parse_number<int>(value, key);
  } else if (key == "lane-inner") {
    config.algorithm_options.lane_inner = parse_inner(value);
  } else if (key == "ppg-inner") {
    config.algorithm_options.ppg_inner = parse_inner(value);
  } else if (key == "max-count") {
    config.max_count = parse_counts(value).at(0);
  } else if (key == "max-world") {
    config.max_world = parse_number<int>(value, key);
  } else {
    std::string cost_key = key;
    std::replace(cost_key.begin(), cost_key.end(), '-', '_');
    set_cost_param(config.cost, cost_key, value);
  }
}

void apply_config_file(ExperimentConfig& config, std::istream& is) {
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    apply_setting(config, view.substr(0, eq), view.substr(eq + 1));
  }
}

const char* to_string(CellStatus status) {
  switch (status) {
    case CellStatus::Ok:
      return "ok";
    case CellStatus::Unsupported:
      return "unsupported";
    case CellStatus::Failed:
      return "failed";
  }
  return "unknown";
}

bool ExperimentReport::passed() const {
  return std::none_of(cells.begin(), cells.end(),
                      [](const CellReport& c) { return c.status == CellStatus::Failed; });
}

std::string cell_key(Algorithm algorithm, const TopologySpec& spec, std::size_t count) {
  std::ostringstream os;
  os << to_string(algorithm) << "/n" << spec.nodes() << "/g" << spec.gpus_per_node() << "/p"
     << spec.ppg() << "/c" << count;
  return os.str();
}

namespace {

std::string describe_mismatch(const Mismatch& m) {
  std::ostringstream os;
  os << "gpu " << m.gpu << " element " << m.index << ": expected " << m.expected << ", got "
     << m.actual;
  return os.str();
}

void write_cell_trace(std::ostream& os, const std::string& key, const EventTrace& trace) {
  std::istringstream lines(to_jsonl(trace));
  std::string line;
  while (std::getline(lines, line)) {
    auto j = nlohmann::ordered_json::parse(line);
    j["cell"] = key;
    os << j.dump() << '\n';
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::ofstream trace_stream;
  if (!config.trace_out.empty()) {
    trace_stream.open(config.trace_out);
    if (!trace_stream) throw UsageError("trace-out: cannot open '" + config.trace_out + "'");
  }

  ExperimentReport report;
  for (Algorithm algorithm : config.algorithms) {
    for (int n : config.nodes) {
      for (int g : config.gpus_per_node) {
        for (int p : config.ppg) {
          const TopologySpec spec = build_topology(n, g, p);
          for (std::size_t count : config.counts) {
            CellReport cell{algorithm, spec, count, CellStatus::Ok, false, {}, {}, {}};
            if (auto reason = unsupported_reason(algorithm, spec, config.algorithm_options)) {
              cell.status = CellStatus::Unsupported;
              cell.detail = *reason;
              report.cells.push_back(std::move(cell));
              continue;
            }
            RunOptions options;
            options.fill = config.fill;
            options.materialize = config.verify;
            options.algorithm = config.algorithm_options;
            try {
              for (int rep = 0; rep < config.repetitions; ++rep) {
                const CellResult result = run_cell(algorithm, spec, count, options);
                cell.digests.push_back(trace_digest(result.trace));
                if (rep == 0) {
                  cell.time = evaluate(result.trace, spec, config.cost);
                  cell.verified = result.verified;
                  if (config.verify && !result.verified) {
                    cell.status = CellStatus::Failed;
                    cell.detail = "oracle mismatch at " + describe_mismatch(*result.mismatch);
                  }
                  if (trace_stream) write_cell_trace(trace_stream, cell_key(algorithm, spec, count), result.trace);
                }
              }
              if (std::adjacent_find(cell.digests.begin(), cell.digests.end(),
                                     std::not_equal_to<>()) != cell.digests.end()) {
                cell.status = CellStatus::Failed;
                cell.detail = "trace digests differ between repetitions";
              }
            } catch (const Error& e) {
              cell.status = CellStatus::Failed;
              cell.detail = e.what();
            }
            report.cells.push_back(std::move(cell));
          }
        }
      }
    }
  }

  if (!config.out_path.empty()) {
    std::ofstream csv(config.out_path);
    if (!csv) throw UsageError("out: cannot open '" + config.out_path + "'");
    write_csv(csv, report);
    std::ofstream json(json_path_for(config.out_path));
    if (!json) throw UsageError("out: cannot open '" + json_path_for(config.out_path) + "'");
    write_json(json, report);
  }
  return report;
}

void write_csv(std::ostream& os, const ExperimentReport& report) {
  os << "algorithm,nodes,gpus_per_node,ppg,count,total_seconds,inter_node_elements,"
        "intra_node_elements,messages_total,kernels_total\n";
  for (const CellReport& c : report.cells) {
    os << to_string(c.algorithm) << ',' << c.spec.nodes() << ',' << c.spec.gpus_per_node() << ','
       << c.spec.ppg() << ',' << c.count << ',';
    if (c.status == CellStatus::Unsupported || c.digests.empty()) {
      os << ",,,,\n";
      continue;
    }
    os << format_seconds(c.time.total_seconds) << ','
       << c.time.totals(Locality::InterNode).elements << ','
       << c.time.totals(Locality::IntraNode).elements << ',' << c.time.messages_total << ','
       << c.time.kernels_total << '\n';
  }
}

void write_json(std::ostream& os, const ExperimentReport& report) {
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const CellReport& c : report.cells) {
    nlohmann::ordered_json j;
    j["algorithm"] = to_string(c.algorithm);
    j["nodes"] = c.spec.nodes();
    j["gpus_per_node"] = c.spec.gpus_per_node();
    j["ppg"] = c.spec.ppg();
    j["count"] = c.count;
    j["status"] = to_string(c.status);
    j["verified"] = c.verified;
    if (!c.detail.empty()) j["detail"] = c.detail;
    if (!c.digests.empty()) {
      j["total_seconds"] = c.time.total_seconds;
      j["stage_seconds"] = c.time.stage_seconds;
      j["critical_path_steps"] = c.time.critical_path_steps;
      j["messages_total"] = c.time.messages_total;
      j["kernels_total"] = c.time.kernels_total;
      for (Locality l : {Locality::IntraGpu, Locality::IntraNode, Locality::InterNode}) {
        j[std::string(to_string(l)) + "_messages"] = c.time.totals(l).messages;
        j[std::string(to_string(l)) + "_elements"] = c.time.totals(l).elements;
      }
      j["trace_digests"] = c.digests;
    }
    cells.push_back(std::move(j));
  }
  nlohmann::ordered_json doc;
  doc["passed"] = report.passed();
  doc["cells"] = std::move(cells);
  os << doc.dump(2) << '\n';
}

std::vector<int> closed_form_sends(Algorithm algorithm, const TopologySpec& spec,
                                   const AlgorithmOptions& options) {
  auto flat = [](InnerAlgorithm inner, int n) {
    if (inner == InnerAlgorithm::RecursiveDoubling) return std::countr_zero(static_cast<unsigned>(n));
    return 2 * (n - 1);
  };
  const int gpus = spec.gpu_count();
  const int lane_sends = 2 * (spec.gpus_per_node() - 1) + flat(options.lane_inner, spec.nodes());
  std::vector<int> sends(static_cast<std::size_t>(spec.world_size()), 0);
  for (Rank r = 0; r < spec.world_size(); ++r) {
    const bool leader = rank_info(spec, r).is_leader;
    int& s = sends[static_cast<std::size_t>(r)];
    switch (algorithm) {
      case Algorithm::Ring:
      case Algorithm::Rabenseifner:
        s = leader ? 2 * (gpus - 1) : 0;
        break;
      case Algorithm::RecursiveDoubling:
        s = leader ? flat(InnerAlgorithm::RecursiveDoubling, gpus) : 0;
        break;
      case Algorithm::Lane:
        s = leader ? lane_sends : 0;
        break;
      case Algorithm::PpgStandard:
        s = flat(options.ppg_inner, gpus);
        break;
      case Algorithm::PpgLane:
        s = lane_sends;
        break;
    }
  }
  return sends;
}

VerifySummary verify_suite(const VerifyOptions& options, std::ostream* log) {
  VerifySummary summary;
  for (Algorithm algorithm : options.algorithms) {
    AlgorithmTally& tally = summary.by_algorithm[to_string(algorithm)];
    for (int n : options.nodes) {
      for (int g : options.gpus_per_node) {
        for (int p : options.ppg) {
          const TopologySpec spec = build_topology(n, g, p);
          for (std::size_t count : options.counts) {
            const std::string key = cell_key(algorithm, spec, count);
            if (!options.filter.empty() && key.find(options.filter) == std::string::npos) continue;
            ++summary.cells;
            if (unsupported_reason(algorithm, spec, options.algorithm_options)) {
              ++tally.skipped;
              continue;
            }
            RunOptions run_options = options.run_template;
            run_options.fill = options.fill;
            run_options.materialize = true;
            run_options.algorithm = options.algorithm_options;
            std::string failure;
            try {
              const CellResult result = run_cell(algorithm, spec, count, run_options);
              if (!result.verified) {
                failure = "first differing element index " +
                          std::to_string(result.mismatch->index) + " (" +
                          describe_mismatch(*result.mismatch) + ")";
              } else {
                std::vector<int> actual(static_cast<std::size_t>(spec.world_size()), 0);
                for (const TraceEvent& e : result.trace.events) {
                  if (e.kind == EventKind::Send) ++actual[static_cast<std::size_t>(e.rank)];
                }
                const auto expected = closed_form_sends(algorithm, spec, options.algorithm_options);
                for (std::size_t r = 0; r < actual.size() && failure.empty(); ++r) {
                  if (actual[r] != expected[r]) {
                    failure = "rank " + std::to_string(r) + " sent " + std::to_string(actual[r]) +
                              " messages, closed form says " + std::to_string(expected[r]);
                  }
                }
              }
            } catch (const Error& e) {
              failure = e.what();
            }
            if (failure.empty()) {
              ++tally.passed;
            } else {
              ++tally.failed;
              summary.failures.push_back(key + ": " + failure);
              if (log) *log << "FAIL " << key << ": " << failure << '\n';
            }
          }
        }
      }
    }
  }
  if (log) {
    if (summary.cells == 0) *log << "warning: 0 cells matched the verification matrix\n";
    for (const auto& [name, t] : summary.by_algorithm) {
      *log << name << ": " << t.passed << " passed, " << t.failed << " failed, " << t.skipped
           << " skipped\n";
    }
  }
  return summary;
}

}  // namespace lanesim
