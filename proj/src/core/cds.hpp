#pragma once

#include <vector>

#include "core/contagion.hpp"

namespace ccr {

// Payment schedule t0 = 0 < t1 < ... < tM = maturity.  Premium accrues at
// interval left endpoints; default is observed at the right endpoint of the
// interval in which it occurs.
struct TenorGrid {
  std::vector<double> dates;

  static TenorGrid uniform(double maturity, int steps);

  int steps() const { return static_cast<int>(dates.size()) - 1; }
  double maturity() const { return dates.back(); }
  double dt(int interval) const { return dates[interval + 1] - dates[interval]; }
  void validate() const;
};

// Unit-notional credit default swap on one reference entity.  The spread is
// paid while no default relevant to the contract has been observed; the
// protection payment is 1 - recovery.
struct ContractSpec {
  double maturity = 3.0;
  double spread = 0.0;
  double recovery = 0.45;

  void validate() const;
};

// Backward value tables for a default-free contract on an environment chain
// laid out by env_index.  For tenor index j and chain state s,
//   hit[j][s]     = P[reference seen defaulted by maturity | state s at t_j]
//   accrual[j][s] = E[sum of dt over tenor dates in [t_j, maturity) at which
//                     the reference default has not yet been observed]
// so the contract value is (1 - recovery) * hit - spread * accrual.  States
// with the reference flag set carry exactly the protection payout.
struct RiskFreeTables {
  std::vector<Eigen::VectorXd> hit;
  std::vector<Eigen::VectorXd> accrual;

  double value(int tenor_index, int state, double spread, double recovery) const;
  double par_spread(int tenor_index, int state, double recovery) const;
};

RiskFreeTables riskfree_tables(const RateMatrix& environment, const TenorGrid& grid);

// Inception environment: the systemic pool net of initial defaults plus the
// three named parties, all carrying contagion.
EpisodeSpec inception_episode(const ModelSpec& model);

// Environment after the counterparty's default at total count `count`: one of
// the counted defaults is the counterparty itself, the replacement carries no
// default risk, and the investor and reference keep their contagious
// dynamics at the running count.
EpisodeSpec post_counterparty_episode(const ModelSpec& model, int count);

// Value at tenor date t_j of the default-free contract, conditional on the
// observed default count.  At the inception count this conditions on the
// inception state; at a higher count it prices the contract an equivalent
// default-free counterparty would hold after the original one defaulted.
double riskfree_cds_value(const ContractSpec& contract, const ModelSpec& model,
                          const TenorGrid& grid, int count, int tenor_index);

// Spread that zeroes the inception value of the default-free contract.
// Fails if the value has no root in [0, 10].
double riskfree_par_spread(const ContractSpec& contract, const ModelSpec& model,
                           const TenorGrid& grid);

// Mark assigned to the contract a surviving party holds against the last
// replacement counterparty when that one defaults in turn.
enum class LeafRule {
  RiskFree,  // value of a fresh default-free contract at the same count
  Zero,      // no further replacement; the position is written off
};

const char* leaf_rule_label(LeafRule rule);
LeafRule parse_leaf_rule(const std::string& s);

double equivalent_contract_value(const ContractSpec& contract, const ModelSpec& model,
                                 const TenorGrid& grid, int count, int tenor_index,
                                 LeafRule rule);

}  // namespace ccr
