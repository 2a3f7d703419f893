#include "lanesim/costmodel.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <istream>
#include <tuple>

#include "lanesim/errors.hpp"
#include "lanesim/trace_io.hpp"

namespace lanesim {

void CostParams::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"alpha_intra_gpu", alpha_intra_gpu}, {"alpha_intra_node", alpha_intra_node},
      {"alpha_inter_node", alpha_inter_node}, {"beta_intra_gpu", beta_intra_gpu},
      {"beta_intra_node", beta_intra_node}, {"beta_inter_node", beta_inter_node},
      {"gamma_reduce", gamma_reduce},       {"kappa_kernel", kappa_kernel},
  };
  for (auto [name, value] : fields) {
    if (!(value >= 0.0)) throw ConfigError(std::string(name) + " must be >= 0");
  }
  if (nics_per_node < 1) throw ConfigError("nics_per_node must be >= 1");
  if (alpha_inter_node < alpha_intra_node || alpha_intra_node < alpha_intra_gpu) {
    throw ConfigError(
        "alpha must not decrease with distance: alpha_inter_node >= alpha_intra_node >= "
        "alpha_intra_gpu");
  }
}

CostParams CostParams::scaled(double k) const {
  CostParams p = *this;
  p.alpha_intra_gpu *= k;
  p.alpha_intra_node *= k;
  p.alpha_inter_node *= k;
  p.beta_intra_gpu *= k;
  p.beta_intra_node *= k;
  p.beta_inter_node *= k;
  p.gamma_reduce *= k;
  p.kappa_kernel *= k;
  return p;
}

double CostParams::alpha(Locality locality) const {
  switch (locality) {
    case Locality::IntraGpu:
      return alpha_intra_gpu;
    case Locality::IntraNode:
      return alpha_intra_node;
    case Locality::InterNode:
      return alpha_inter_node;
  }
  return 0.0;
}

double CostParams::beta(Locality locality) const {
  switch (locality) {
    case Locality::IntraGpu:
      return beta_intra_gpu;
    case Locality::IntraNode:
      return beta_intra_node;
    case Locality::InterNode:
      return beta_inter_node;
  }
  return 0.0;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void set_cost_param(CostParams& params, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "nics_per_node") {
    int parsed = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      throw UsageError("nics_per_node: expected an integer, got '" + std::string(value) + "'");
    }
    params.nics_per_node = parsed;
    return;
  }
  double* field = nullptr;
  if (key == "alpha_intra_gpu") field = &params.alpha_intra_gpu;
  else if (key == "alpha_intra_node") field = &params.alpha_intra_node;
  else if (key == "alpha_inter_node") field = &params.alpha_inter_node;
  else if (key == "beta_intra_gpu") field = &params.beta_intra_gpu;
  else if (key == "beta_intra_node") field = &params.beta_intra_node;
  else if (key == "beta_inter_node") field = &params.beta_inter_node;
  else if (key == "gamma_reduce") field = &params.gamma_reduce;
  else if (key == "kappa_kernel") field = &params.kappa_kernel;
  if (field == nullptr) throw UsageError("unknown cost parameter '" + std::string(key) + "'");
  try {
    std::size_t used = 0;
    const std::string text(value);
    *field = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError(std::string(key) + ": expected a number, got '" + std::string(value) + "'");
  }
}

CostParams parse_cost_params(std::istream& is, CostParams base) {
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
      throw UsageError("cost config line " + std::to_string(line_no) + ": expected key=value");
    }
    set_cost_param(base, view.substr(0, eq), view.substr(eq + 1));
  }
  base.validate();
  return base;
}

CostParams load_cost_params(const std::string& path, CostParams base) {
  std::ifstream in(path);
  if (!in) throw UsageError("cost-config: cannot open '" + path + "'");
  return parse_cost_params(in, base);
}

namespace {

using MessageKey = std::tuple<Rank, Rank, std::uint32_t, std::size_t>;

struct StepCost {
  double total = 0.0;
  std::map<Stage, double> by_stage;

  void add(Stage stage, double seconds) {
    total += seconds;
    by_stage[stage] += seconds;
  }
};

}  // namespace

ModeledTime evaluate(const EventTrace& trace, const TopologySpec& spec, const CostParams& params) {
  params.validate();
  verify_pairing(trace);

  std::vector<RankInfo> infos;
  infos.reserve(static_cast<std::size_t>(spec.world_size()));
  for (Rank r = 0; r < spec.world_size(); ++r) infos.push_back(rank_info(spec, r));
  auto info = [&](Rank r) -> const RankInfo& {
    if (r < 0 || r >= spec.world_size()) {
      throw TraceError("rank " + std::to_string(r) + " outside topology of " +
                       std::to_string(spec.world_size()) + " ranks");
    }
    return infos[static_cast<std::size_t>(r)];
  };

  // Inter-node sends per (step, sender node), and each message's send step.
  std::map<std::pair<int, int>, int> node_load;
  std::map<MessageKey, std::deque<int>> send_steps;
  for (const TraceEvent& e : trace.events) {
    if (e.kind != EventKind::Send) continue;
    const Locality actual = classify(info(e.src), info(e.dst));
    if (*e.locality != actual) {
      throw TraceError("message " + std::to_string(e.src) + " -> " + std::to_string(e.dst) +
                       " labelled " + to_string(*e.locality) + " but topology says " +
                       to_string(actual));
    }
    if (actual == Locality::InterNode) ++node_load[{e.step, info(e.src).node_id}];
    send_steps[{e.src, e.dst, e.tag, e.count}].push_back(e.step);
  }

  ModeledTime out;
  std::map<std::pair<int, Rank>, StepCost> cost;  // (step, rank)
  for (const TraceEvent& e : trace.events) {
    switch (e.kind) {
      case EventKind::Send:
        break;
      case EventKind::Recv: {
        const Locality locality = *e.locality;
        auto& steps = send_steps[{e.src, e.dst, e.tag, e.count}];
        const int send_step = steps.front();
        steps.pop_front();
        double contention = 1.0;
        if (locality == Locality::InterNode) {
          const int concurrent = node_load[{send_step, info(e.src).node_id}];
          contention = std::max(1.0, static_cast<double>(concurrent) / params.nics_per_node);
        }
        const double seconds = params.alpha(locality) +
                               static_cast<double>(e.count) * params.beta(locality) * contention;
        cost[{e.step, e.rank}].add(e.stage, seconds);
        auto& totals = out.by_locality[static_cast<std::size_t>(locality)];
        ++totals.messages;
        totals.elements += e.count;
        ++out.messages_total;
        out.critical_path_steps = std::max(out.critical_path_steps, e.step);
        break;
      }
      case EventKind::Reduce:
      case EventKind::Copy:
        info(e.rank);
        cost[{e.step, e.rank}].add(
            e.stage, params.kappa_kernel + static_cast<double>(e.count) * params.gamma_reduce);
        ++out.kernels_total;
        break;
    }
  }

  // cost is ordered by step, then rank: keep the slowest rank of each step,
  // lowest rank winning ties.
  auto it = cost.begin();
  while (it != cost.end()) {
    const int step = it->first.first;
    const StepCost* slowest = &it->second;
    for (; it != cost.end() && it->first.first == step; ++it) {
      if (it->second.total > slowest->total) slowest = &it->second;
    }
    out.total_seconds += slowest->total;
    for (const auto& [stage, seconds] : slowest->by_stage) out.stage_seconds[to_string(stage)] += seconds;
  }
  return out;
}

std::vector<SweepRow> sweep(std::span<const Algorithm> algorithms,
                            std::span<const std::size_t> counts,
                            std::span<const TopologySpec> topologies, const CostParams& params,
                            const SweepOptions& options) {
  if (algorithms.empty()) throw ConfigError("sweep: algorithm axis is empty");
  if (counts.empty()) throw ConfigError("sweep: count axis is empty");
  if (topologies.empty()) throw ConfigError("sweep: topology axis is empty");
  params.validate();

  std::vector<SweepRow> rows;
  rows.reserve(algorithms.size() * counts.size() * topologies.size());
  for (Algorithm algorithm : algorithms) {
    for (const TopologySpec& spec : topologies) {
      for (std::size_t count : counts) {
        SweepRow row{algorithm, spec, count, true, {}, {}};
        if (unsupported_reason(algorithm, spec, options.algorithm)) {
          row.supported = false;
        } else {
          RunOptions run_options;
          run_options.materialize = false;
          run_options.algorithm = options.algorithm;
          const CellResult cell = run_cell(algorithm, spec, count, run_options);
          row.time = evaluate(cell.trace, spec, params);
          row.digest = trace_digest(cell.trace);
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace lanesim
