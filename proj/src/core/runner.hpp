#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "core/montecarlo.hpp"

namespace ccr {

// ---------------------------------------------------------------------------
// Experiment runner: one JSON config in, one spread table out.
//
// A run sweeps either the counterparty settlement recovery (rows = R2 values,
// one fitted spread per convention) or the replacement-chain depth (rows =
// ranks, optionally crossed with the leaf rule).  Results land in a CSV plus
// a JSON manifest that echoes the fully resolved configuration, so every
// number in the CSV can be recomputed from the manifest alone.  Outputs are
// deterministic: identical config means byte-identical CSV, whatever the
// thread count.
// ---------------------------------------------------------------------------

struct OracleConfig {
  std::int64_t paths = 0;  // 0: no oracle block
  std::uint64_t seed = 1;

  bool enabled() const { return paths > 0; }
};

struct RunConfig {
  ModelSpec model;
  ContractSpec contract;
  TenorGrid grid;

  std::vector<Convention> conventions;
  int rank = 3;
  LeafRule leaf = LeafRule::RiskFree;
  std::vector<int> ranks;            // non-empty: sweep rows are ranks
  std::vector<LeafRule> leaves;      // with a rank sweep: cross with leaf rules
  double coverage = 1.0;

  std::vector<double> recovery_grid;            // R2 rows (recovery sweep)
  double recovery_counterparty = 0.4;           // R2 when sweeping ranks
  std::optional<double> recovery_investor;      // empty: tracks R2
  bool include_investor_settlement = true;
  MarginMode margin = MarginMode::Uncollateralized;
  double collateral_fraction = 0.0;
  double lockup_investor = 0.0;
  double lockup_counterparty = 0.0;

  OracleConfig oracle;
  std::string basename = "run";

  bool rank_sweep() const { return !ranks.empty(); }
  SettlementPolicy policy_at(double r2) const;
  void validate() const;
};

// Strict parse: unknown keys, wrong types and out-of-range values all throw
// std::invalid_argument with the offending path in the message.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// In-repo presets reproducing the reference tables.
const std::vector<std::string>& preset_names();      // "table1" .. "table5"
std::string preset_config(const std::string& name);  // JSON text

struct SweepRow {
  double recovery = 0.0;
  int rank = 0;
  LeafRule leaf = LeafRule::RiskFree;
  std::vector<double> spreads;  // one per convention, in config order
};

struct RunResult {
  std::string basename;
  bool rank_sweep = false;
  bool leaf_sweep = false;
  std::vector<Convention> conventions;
  double riskfree_par = 0.0;
  std::vector<SweepRow> rows;
  std::vector<double> resolved_intensities;  // the ladder every pricer used
  double elapsed_seconds = 0.0;
  std::string error;  // non-empty: the sweep stopped early, rows are partial

  bool failed() const { return !error.empty(); }
};

// Fits every requested spread.  Pricer construction fans out over `threads`
// workers; assembly is ordered, so the result does not depend on the thread
// count.  A solver or construction failure stops the sweep and is reported in
// `error` with the rows completed so far kept.
RunResult execute_run(const RunConfig& config, int threads = 1);

// CSV with a key column (r2, or rank, or rule+rank), one spread column per
// convention, and the spread dispersion per row both as max-min in absolute
// basis points and relative to the row minimum.  Numbers carry 7 significant
// digits.  A failed run ends with a FAILED marker row.
void write_sweep_csv(std::ostream& os, const RunResult& result);

// Full config echo (resolved intensity table and grid dates included),
// library version, timings, and the result rows.
void write_manifest(std::ostream& os, const RunConfig& config,
                    const RunResult& result);

// Writes <basename>.csv and <basename>.manifest.json under `directory`
// (created if missing).  Returns the process exit code: 0 on success.
int run_to_directory(const RunConfig& config, const std::string& directory,
                     int threads, std::ostream& log);

// ---------------------------------------------------------------------------
// Verification: invariant suites with measured tolerances.
// ---------------------------------------------------------------------------

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;  // worst observed value of the suite's statistic
  double bound = 0.0;     // what it must stay within
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_passed() const;
};

// Sup-norm gap, over the given dates, between the total-default-count law of
// the full chain and the reduced counting chain (valid at unit multipliers),
// both started all-alive.  The overload taking the generator exists so a
// fault can be injected upstream and must surface here.
double counting_chain_gap(const GeneratorSpec& spec,
                          const std::vector<double>& dates);
double counting_chain_gap(const RateMatrix& full_generator,
                          const GeneratorSpec& spec,
                          const std::vector<double>& dates);

// Runs the verification suites on the configured model: randomized
// settlement identities, the counting-chain equivalence at unit multipliers,
// and Monte Carlo agreement of event frequencies and prices with the lattice.
// Requires the oracle block (throws std::invalid_argument without it).
VerifyReport run_verification(const RunConfig& config, int threads = 1);

void write_verify_report(std::ostream& os, const VerifyReport& report);

}  // namespace ccr
