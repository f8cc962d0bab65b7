#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "core/cds.hpp"
#include "core/settlement.hpp"

namespace ccr {

// ---------------------------------------------------------------------------
// Bilateral pricing under close-out conventions.
//
// The bilateral contract differs from the default-free one in what happens at
// the first default among investor, counterparty and reference.  A reference
// default pays protection as usual.  A party default closes the contract out
// at a mark M and the investor receives settle(M) under the margin agreement
// in force.  The mark at a counterparty default is the value of the contract
// the investor would hold against a replacement counterparty whose credit
// quality follows the selected convention; under B, C and CPrime that
// replacement is itself risky, so marks are defined recursively along a
// replacement chain, cut off after `rank` links by the leaf rule.  The mark
// at an investor default is the default-free value of the remaining contract
// on the prevailing environment: the same quantity the margin agreement
// tracks, and the one close-out valuation the conventions leave untouched.
//
// All value tables live on the tenor grid, which must be uniform here (the
// default-free operations in cds.hpp accept any grid).  Premium accrues at
// interval left endpoints and events settle at the right endpoint of the
// interval in which they fall, so the backward recursion and the default-free
// tables decompose each other exactly; that identity is what makes the CVA of
// a fully recovered close-out vanish at machine precision rather than at grid
// accuracy.
// ---------------------------------------------------------------------------

// Depth and cut-off of the replacement chain.  rank = 1 marks the first
// counterparty default directly by the leaf rule.  Conventions A and APrime
// carry no risky replacement, so the rule is inert there: A marks at the
// default-free value by definition and APrime replacements never default.
struct CloseOutRule {
  int rank = 3;
  LeafRule leaf = LeafRule::RiskFree;

  void validate() const;  // rank >= 1
};

// Settlement economics applied at every close-out.  collateral_fraction
// scales the mark into the posted amounts (c2 = fraction * M+, c1 =
// fraction * M-), so 1.0 is a fully collateralized close-out under the
// Collateral mode.  include_investor_settlement = false extinguishes the
// contract without payment when the investor itself defaults first; the
// bilateral price then only carries the counterparty-default settlements.
struct SettlementPolicy {
  double recovery_investor = 1.0;
  double recovery_counterparty = 1.0;
  MarginMode margin = MarginMode::Uncollateralized;
  double collateral_fraction = 0.0;
  double lockup_investor = 0.0;
  double lockup_counterparty = 0.0;
  bool include_investor_settlement = true;

  void validate() const;
  SettlementTerms terms_at(double mark) const;
  double on_counterparty_default(double mark) const;
  double on_investor_default(double mark) const;  // 0 when the leg is off
};

struct EngineConfig {
  Convention convention = Convention::A;
  CloseOutRule closeout;
  // Replacement-entry counts are truncated to the smallest contiguous window
  // holding at least this probability mass, per node and interval; mass
  // outside is assigned to the nearest window edge.  1.0 disables truncation.
  double coverage = 0.95;

  void validate() const;  // coverage in [0.5, 1]
};

// Fitted spread and its companions for one contract / policy pair.
struct PricingReport {
  Convention convention = Convention::A;
  CloseOutRule closeout;
  SettlementPolicy policy;
  double par_spread = 0.0;
  double residual = 0.0;      // bilateral price at the fitted spread
  double riskfree_par = 0.0;
  double cva = 0.0;           // default-free value at the fitted spread
  int iterations = 0;
  std::vector<std::pair<double, double>> evaluations;  // (spread, price)
};

// Environment against the `layer`-th replacement counterparty, entered at
// total count `count`.  With non-systemic replacements (the default) the
// environment depends on the entry count alone: the pool is short the counted
// defaults minus the original counterparty, the replacement's own default
// does not feed the count, and its intensity follows the convention (absent
// under APrime, pinned at inception under B, one level behind the running
// count under C and CPrime, which also re-rates the investor).  With
// model.systemic_replacements the previous `layer - 1` replacement defaults
// are counted too, replacements are contagious, and the level shift deepens
// by one per layer.
EpisodeSpec replacement_episode(const ModelSpec& model, Convention convention,
                                int count, int layer = 1);

class BilateralPricer {
 public:
  // Builds every event table and default-free table the recursion needs; the
  // per-spread evaluations afterwards are pure arithmetic, so one pricer
  // serves a whole sweep of spreads and settlement policies.
  BilateralPricer(const ModelSpec& model, const ContractSpec& contract,
                  const TenorGrid& grid, const EngineConfig& config);

  double price(double spread, const SettlementPolicy& policy) const;

  // Same recursion with both party-default settlements replaced by the mark
  // itself: the value lost to neither side's default.  Coincides with price()
  // when both recoveries are 1 or the close-out is fully collateralized.
  double first_default_free_price(double spread, const SettlementPolicy& policy) const;

  double riskfree_value(double spread) const;
  double riskfree_par() const;

  // Spread at which the bilateral price crosses zero: bracketed on [0, 10],
  // bisection with secant acceleration, |price| <= price_tolerance().  Throws
  // if the bracket fails or the price curve is not decreasing.
  double par_spread(const SettlementPolicy& policy) const;

  PricingReport report(const SettlementPolicy& policy) const;

  // Credit valuation adjustment at a given spread, evaluated directly as the
  // expected first-default cost: sum over default events of the gap between
  // the default-free mark and the settlement actually received.  Agrees with
  // riskfree_value - price by construction; kept as an independent path for
  // cross-checking.
  double cva_direct(double spread, const SettlementPolicy& policy) const;

  // Replacement-chain value tables (tenor date x entry count), innermost
  // layer first; empty under convention A.
  std::vector<Eigen::MatrixXd> layer_values(double spread,
                                            const SettlementPolicy& policy) const;

  const EngineConfig& config() const { return config_; }
  const ModelSpec& model() const { return model_; }
  const TenorGrid& grid() const { return grid_; }

  static double price_tolerance() { return 1e-8; }

 private:
  struct NodeTables {
    EpisodeSpec episode;
    EventTable events;
    RiskFreeTables riskfree;
    // Per interval: clamped range of replacement-entry counts.
    std::vector<std::array<int, 2>> windows;
  };
  enum class MarkMode { RiskFree, Zero, Next };

  NodeTables make_tables(const EpisodeSpec& episode) const;
  const std::vector<NodeTables>& bank(int layer) const;

  double counterparty_mark(const NodeTables& t, MarkMode mode,
                           const Eigen::MatrixXd* next, int interval,
                           int absolute, int d, int a, int b,
                           double spread) const;
  double investor_mark(const NodeTables& t, int absolute, int d, int a, int b,
                       double spread) const;

  double node_value(const NodeTables& t, int entry, double spread,
                    const SettlementPolicy& policy, MarkMode mode,
                    const Eigen::MatrixXd* next, bool passthrough) const;

  Eigen::MatrixXd layer_table(int layer, double spread,
                              const SettlementPolicy& policy, MarkMode mode,
                              const Eigen::MatrixXd* next) const;

  // Builds the replacement chain and reports how the root's counterparty
  // marks are sourced; fills `dump` with the layer tables when given.
  std::optional<Eigen::MatrixXd> root_marks(double spread,
                                            const SettlementPolicy& policy,
                                            MarkMode* mode,
                                            std::vector<Eigen::MatrixXd>* dump) const;

  double evaluate(double spread, const SettlementPolicy& policy,
                  bool passthrough_root,
                  std::vector<Eigen::MatrixXd>* dump) const;

  ModelSpec model_;
  ContractSpec contract_;
  TenorGrid grid_;
  EngineConfig config_;
  double dt_ = 0.0;
  std::vector<double> gamma_;
  int count_cap_ = 0;  // layer tables carry counts 0 .. count_cap_ - 1
  NodeTables root_;
  std::vector<std::vector<NodeTables>> banks_;  // [layer - 1][count], shared in base mode
};

// One-call conveniences over a freshly built pricer.
double price_bilateral(const ModelSpec& model, const ContractSpec& contract,
                       const TenorGrid& grid, const EngineConfig& config,
                       const SettlementPolicy& policy);
double par_spread_bilateral(const ModelSpec& model, const ContractSpec& contract,
                            const TenorGrid& grid, const EngineConfig& config,
                            const SettlementPolicy& policy);
PricingReport cva_report(const ModelSpec& model, const ContractSpec& contract,
                         const TenorGrid& grid, const EngineConfig& config,
                         const SettlementPolicy& policy);

}  // namespace ccr
