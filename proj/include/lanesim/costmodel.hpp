#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lanesim/harness.hpp"
#include "lanesim/simcore.hpp"
#include "lanesim/topology.hpp"

namespace lanesim {

// Latency (alpha, seconds per message) and inverse bandwidth (beta, seconds
// per element) for each locality class, plus NIC count and kernel costs.
// Defaults are order-of-magnitude placeholders; they reproduce orderings,
// not measured times.
struct CostParams {
  double alpha_intra_gpu = 0.0;
  double alpha_intra_node = 1e-6;
  double alpha_inter_node = 2e-6;
  double beta_intra_gpu = 1e-11;
  double beta_intra_node = 5e-11;
  double beta_inter_node = 4e-10;
  int nics_per_node = 1;
  double gamma_reduce = 1e-11;
  double kappa_kernel = 5e-6;

  // Throws ConfigError on negative values, nics_per_node < 1 or alphas that
  // do not grow with distance.
  void validate() const;

  // Every time parameter multiplied by k.
  CostParams scaled(double k) const;

  double alpha(Locality locality) const;
  double beta(Locality locality) const;
};

// Sets one field by name (e.g. "beta_inter_node"); throws UsageError for an
// unknown key or unparsable value.
void set_cost_param(CostParams& params, std::string_view key, std::string_view value);

// key=value lines; '#' starts a comment. Unset keys keep their value in `base`.
CostParams parse_cost_params(std::istream& is, CostParams base = {});
CostParams load_cost_params(const std::string& path, CostParams base = {});

struct LocalityTotals {
  std::size_t messages = 0;
  std::size_t elements = 0;
};

struct ModeledTime {
  double total_seconds = 0.0;
  std::map<std::string, double> stage_seconds;  // sums to total_seconds
  std::array<LocalityTotals, 3> by_locality{};  // indexed by Locality
  int critical_path_steps = 0;
  std::size_t messages_total = 0;
  std::size_t kernels_total = 0;

  const LocalityTotals& totals(Locality l) const {
    return by_locality[static_cast<std::size_t>(l)];
  }
};

// Bulk-synchronous evaluation. In every step each rank accumulates
//   alpha(class) + count * beta(class) * contention      per received message
//   kappa_kernel + count * gamma_reduce                   per local kernel
// where contention = max(1, inter-node sends leaving the sender's node in
// that step / nics_per_node) for inter-node messages and 1 otherwise. A step
// costs the maximum over ranks; the total is the sum over steps.
// Throws TraceError when the trace is malformed or inconsistent with spec.
ModeledTime evaluate(const EventTrace& trace, const TopologySpec& spec, const CostParams& params);

struct SweepRow {
  Algorithm algorithm;
  TopologySpec spec;
  std::size_t count = 0;
  bool supported = true;
  ModeledTime time;
  std::string digest;
};

struct SweepOptions {
  AlgorithmOptions algorithm;
};

// Full cross product, ordered by algorithm, then topology, then count.
// Traces are generated without materializing data. Unsupported cells are
// kept as rows with supported = false. Throws ConfigError on an empty axis.
std::vector<SweepRow> sweep(std::span<const Algorithm> algorithms,
                            std::span<const std::size_t> counts,
                            std::span<const TopologySpec> topologies, const CostParams& params,
                            const SweepOptions& options = {});

}  // namespace lanesim
