#pragma once
#include <vector>

namespace ccr {

enum class Party { Investor, Counterparty };

enum class MarginMode {
  Uncollateralized,
  Collateral,
  LockUp,
  Segregated,
  LockUpSegregated,
};

// Close-out economics of one contract. Collateral amounts c1/c2 are the
// nonnegative market values posted by the investor resp. the counterparty;
// which one applies follows the sign of the mark (marks and collateral are
// sign-aligned). u1/u2 are lock-up margins; the net lock-up is u2 - u1.
struct SettlementTerms {
  double r1 = 1.0;
  double r2 = 1.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double u1 = 0.0;
  double u2 = 0.0;
  MarginMode mode = MarginMode::Uncollateralized;

  double net_lockup() const { return u2 - u1; }
  void validate() const;  // throws std::invalid_argument
};

// Margin-agreement mechanics used to build collateral paths. The 1/2
// suffixes follow the investor/counterparty numbering used everywhere else.
struct MarginTerms {
  double threshold1 = 0.0;       // H1
  double threshold2 = 0.0;       // H2
  double min_transfer1 = 0.0;    // A1
  double min_transfer2 = 0.0;    // A2
  double haircut1 = 0.0;         // h1
  double haircut2 = 0.0;         // h2
  double margin_period = 0.0;    // s, years
  bool diversified = false;      // gross pre-default collateral up by (1+h)
  void validate() const;
};

enum class Collateralization { Under, Over, Neither };

// Settlement value received by the investor when `defaulter` defaults while
// the contract marks at M. Dispatches on terms.mode.
double settle(double M, const SettlementTerms& terms, Party defaulter);

double settle_uncollateralized(double M, const SettlementTerms& terms, Party defaulter);
double settle_collateralized(double M, const SettlementTerms& terms, Party defaulter);
double settle_lockup(double M, const SettlementTerms& terms, Party defaulter);
double settle_segregated(double M, const SettlementTerms& terms, Party defaulter);
double settle_lockup_segregated(double M, const SettlementTerms& terms, Party defaulter);

double exposure(double M, double C);

enum class LgdVariant { Uncollateralized, Collateralized, Segregated };

// Investor loss (counterparty default) or gain shortfall (investor default)
// under the symmetric-mark assumption.
double lgd_loss(double M, const SettlementTerms& terms, LgdVariant variant);
double lgd_gain(double M, const SettlementTerms& terms, LgdVariant variant);

Collateralization classify_collateralization(double E, double M, Party side);

// Collateral held against an exposure path: (E - (H + A))^+ before the first
// default (grossed up by 1+h in the diversified variant), frozen at
// (1+h)(E(tau) - (H + A))^+ over the margin period of risk, zero afterwards.
// E(tau) is interpolated linearly between grid times; `side` selects which
// threshold/transfer/haircut set applies.
std::vector<double> collateral_path(const std::vector<double>& times,
                                    const std::vector<double>& exposures,
                                    const MarginTerms& margin,
                                    double first_default, Party side);

}  // namespace ccr
