#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "core/engine.hpp"

namespace ccr {

// ---------------------------------------------------------------------------
// Monte Carlo oracle.
//
// Exact event-time simulation of an episode environment: every state is a
// race of competing exponential clocks (one per surviving pool firm, one per
// alive named party), so holding times are sampled from their true
// distribution and the paths carry no discretization error.  The estimators
// then discretize exactly where the lattice pricer does: premium accrues at
// tenor starts while no relevant default has been observed, events settle at
// the right endpoint of their interval, and close-out marks are read from the
// default-free backward tables at the settlement date's environment state.
// They therefore estimate the same number the pricer computes, and any gap
// beyond sampling noise indicts one of the two implementations.
//
// The oracle is deliberately independent of the pricer's recursion; it is a
// cross-check, not an alternative pricer.  Replacement-chain conventions are
// out of scope here: their marks are conditional expectations inside the
// payoff, which plain Monte Carlo cannot average away.
// ---------------------------------------------------------------------------

struct SimConfig {
  std::int64_t paths = 100000;
  std::uint64_t seed = 1;
  double horizon = 3.0;  // years; events beyond it are not recorded
  int threads = 1;

  void validate() const;  // paths >= 1, horizon > 0, threads >= 1
};

enum class EventKind { Pool, Investor, Counterparty, Reference };

const char* event_kind_label(EventKind kind);  // "pool", "investor", ...

struct PathEvent {
  double time = 0.0;
  EventKind kind = EventKind::Pool;
};

// One realized path: events in strictly increasing time order, at most
// pool_size Pool events and at most one event per named party.
using PathRecord = std::vector<PathEvent>;

// Simulates config.paths independent environment paths.  The intensity table
// is taken as given; zero entries are legal here and simply silence the
// corresponding clocks, so a table of zeros yields eventless paths.  Path i
// draws from its own RNG substream derived from (seed, i): the output is a
// pure function of the arguments, independent of how paths are scheduled
// across threads.
std::vector<PathRecord> simulate(const EpisodeSpec& episode,
                                 const std::vector<double>& gamma,
                                 const SimConfig& config);

// CSV dump, one row per event: path,time,event.
void write_paths_csv(std::ostream& os, const std::vector<PathRecord>& paths);

// Empirical counterpart of EventTable on a tenor grid: per interval, the
// fraction of paths whose first party default is the given party and falls in
// that interval; alive[x] is the fraction with no party default by t_x.
// Sampling error on any entry q is about sqrt(q(1-q)/paths).
struct EventFrequencies {
  std::vector<double> alive;               // [steps+1]
  std::vector<double> investor_first;      // [steps]
  std::vector<double> counterparty_first;  // [steps]
  std::vector<double> reference_first;     // [steps]
  std::int64_t paths = 0;
};

EventFrequencies event_frequencies(const std::vector<PathRecord>& paths,
                                   const TenorGrid& grid);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t paths = 0;
};

// Pathwise-payoff estimate of the bilateral price when both close-out marks
// are the default-free value on the prevailing environment: premium at tenor
// starts while all three names stand, protection at the settlement date of a
// reference default, and the margin-agreement settlement of the default-free
// mark at the settlement date of a party default.  The mark state includes
// everything that happened up to that date, defaults after the first one in
// the same interval included.  The horizon is the grid's maturity;
// config.horizon is ignored here.
Estimate estimate_convention_a_price(const ModelSpec& model,
                                     const ContractSpec& contract,
                                     const TenorGrid& grid,
                                     const SettlementPolicy& policy,
                                     double spread, const SimConfig& config);

// Same machinery for the default-free contract itself: premium while the
// reference default has not been observed, protection at its settlement date,
// party defaults ignored.  Estimates the backward tables' inception value.
Estimate estimate_riskfree_value(const ModelSpec& model,
                                 const ContractSpec& contract,
                                 const TenorGrid& grid, double spread,
                                 const SimConfig& config);

// Dependence between close-out losses and the contagion state: the sample
// covariance, over paths whose first party default is the counterparty,
// between the investor's positive settlement loss (default-free mark minus
// what the margin agreement pays) and the count level prevailing just before
// that default, i.e. the index at which the intensity ladder was being read.
// Positive covariance is wrong-way risk: under an escalating ladder a deeper
// count means both a worse counterparty and a larger loss.  A flat ladder
// severs the channel and the statistic collapses to noise around zero; a
// decreasing ladder flips the sign.  loss_bearing counts the strictly
// positive losses; the estimate is flagged insufficient below
// min_loss_samples() of them.
struct DependenceDiagnostic {
  double covariance = 0.0;
  double std_error = 0.0;
  std::int64_t defaults = 0;      // counterparty-first paths
  std::int64_t loss_bearing = 0;  // of those, strictly positive loss
  bool sufficient = false;

  static std::int64_t min_loss_samples() { return 1000; }
};

DependenceDiagnostic wrong_way_diagnostic(const ModelSpec& model,
                                          const ContractSpec& contract,
                                          const TenorGrid& grid,
                                          const SettlementPolicy& policy,
                                          double spread,
                                          const SimConfig& config);

}  // namespace ccr
