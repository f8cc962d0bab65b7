#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "core/engine.hpp"
#include "doctest.h"

using namespace ccr;

namespace {

ModelSpec base_model(double survival_1y) {
  ModelSpec model;
  model.m = 10;
  model.survival_1y = survival_1y;
  model.contagion_factor = 1.5;
  model.calibration = CalibrationMode::Implied;
  model.mult_investor = 1.0;
  model.mult_counterparty = 0.8;
  model.mult_reference = 1.3;
  return model;
}

// One calibration per survival level; every pricer below shares the ladder.
const ModelSpec& resolved_model(double survival_1y) {
  static std::map<double, ModelSpec> cache;
  auto it = cache.find(survival_1y);
  if (it == cache.end()) {
    ModelSpec model = base_model(survival_1y);
    model.intensity_table = resolve_intensities(model, 48);
    it = cache.emplace(survival_1y, std::move(model)).first;
  }
  return it->second;
}

ContractSpec contract3y() {
  ContractSpec contract;
  contract.maturity = 3.0;
  contract.recovery = 0.45;
  return contract;
}

struct PricerKey {
  double survival;
  Convention convention;
  int rank;
  LeafRule leaf;
  double coverage;
  bool systemic;
  int initial_defaults;
  auto tie() const {
    return std::tuple(survival, static_cast<int>(convention), rank,
                      static_cast<int>(leaf), coverage, systemic, initial_defaults);
  }
  bool operator<(const PricerKey& o) const { return tie() < o.tie(); }
};

const BilateralPricer& pricer(double survival, Convention convention, int rank,
                              LeafRule leaf = LeafRule::RiskFree,
                              double coverage = 1.0, bool systemic = false,
                              int initial_defaults = 0) {
  static std::map<PricerKey, std::unique_ptr<BilateralPricer>> cache;
  const PricerKey key{survival, convention, rank, leaf, coverage, systemic,
                      initial_defaults};
  auto it = cache.find(key);
  if (it == cache.end()) {
    ModelSpec model = resolved_model(survival);
    model.systemic_replacements = systemic;
    model.initial_defaults = initial_defaults;
    EngineConfig config;
    config.convention = convention;
    config.closeout.rank = rank;
    config.closeout.leaf = leaf;
    config.coverage = coverage;
    auto p = std::make_unique<BilateralPricer>(model, contract3y(),
                                               TenorGrid::uniform(3.0, 36), config);
    it = cache.emplace(key, std::move(p)).first;
  }
  return *it->second;
}

SettlementPolicy recoveries(double r, bool investor_leg = true) {
  SettlementPolicy policy;
  policy.recovery_investor = r;
  policy.recovery_counterparty = r;
  policy.include_investor_settlement = investor_leg;
  return policy;
}

constexpr double kParEps = 5e-8;  // root solved to |price| <= 1e-8, slope ~1.3

}  // namespace

TEST_CASE("close-out rule and engine configuration validation") {
  CloseOutRule rule;
  rule.rank = 0;
  CHECK_THROWS_AS(rule.validate(), std::invalid_argument);
  rule.rank = 1;
  rule.validate();

  EngineConfig config;
  config.coverage = 0.4;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.coverage = 1.2;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.coverage = 0.5;
  config.validate();

  TenorGrid uneven;
  uneven.dates = {0.0, 0.5, 2.0, 3.0};
  CHECK_THROWS_AS(BilateralPricer(resolved_model(0.95), contract3y(), uneven,
                                  EngineConfig{}),
                  std::invalid_argument);
}

TEST_CASE("settlement policy terms and one-sided payments") {
  SettlementPolicy policy;
  policy.recovery_investor = 0.3;
  policy.recovery_counterparty = 0.4;
  policy.collateral_fraction = 0.5;
  policy.margin = MarginMode::Collateral;
  policy.validate();

  const SettlementTerms up = policy.terms_at(2.0);
  CHECK(up.c2 == doctest::Approx(1.0));
  CHECK(up.c1 == 0.0);
  const SettlementTerms down = policy.terms_at(-2.0);
  CHECK(down.c1 == doctest::Approx(1.0));
  CHECK(down.c2 == 0.0);

  policy.margin = MarginMode::Uncollateralized;
  policy.collateral_fraction = 0.0;
  CHECK(policy.on_counterparty_default(1.0) == doctest::Approx(0.4));
  CHECK(policy.on_counterparty_default(-1.0) == doctest::Approx(-1.0));
  CHECK(policy.on_investor_default(1.0) == doctest::Approx(1.0));
  CHECK(policy.on_investor_default(-1.0) == doctest::Approx(-0.3));
  policy.include_investor_settlement = false;
  CHECK(policy.on_investor_default(-1.0) == 0.0);

  policy.recovery_investor = 1.5;
  CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
  policy.recovery_investor = 0.3;
  policy.collateral_fraction = -0.1;
  CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
  policy.collateral_fraction = 0.0;
  policy.lockup_investor = -1.0;
  CHECK_THROWS_AS(policy.validate(), std::invalid_argument);
}

TEST_CASE("replacement environment construction") {
  const ModelSpec model = base_model(0.95);

  const EpisodeSpec ap = replacement_episode(model, Convention::APrime, 3);
  CHECK(ap.pool_size == 8);
  CHECK(ap.base_count == 3);
  CHECK_FALSE(ap.counterparty.present);

  const EpisodeSpec b = replacement_episode(model, Convention::B, 3);
  CHECK(b.counterparty.present);
  CHECK(b.counterparty.frozen_level == 0);
  CHECK_FALSE(b.counterparty.contagious);
  CHECK(b.counterparty.multiplier == doctest::Approx(0.8));
  CHECK(b.investor.level_offset == 0);

  const EpisodeSpec c = replacement_episode(model, Convention::C, 3);
  CHECK(c.counterparty.level_offset == -1);
  CHECK(c.counterparty.frozen_level == -1);
  CHECK(c.investor.level_offset == 0);

  const EpisodeSpec cp = replacement_episode(model, Convention::CPrime, 3);
  CHECK(cp.counterparty.level_offset == -1);
  CHECK(cp.investor.level_offset == -1);

  // Deep in a systemic chain the replacement is contagious and the level
  // shift tracks the number of dead counterparties.
  ModelSpec systemic = model;
  systemic.systemic_replacements = true;
  const EpisodeSpec deep = replacement_episode(systemic, Convention::CPrime, 5, 2);
  CHECK(deep.pool_size == 7);
  CHECK(deep.counterparty.contagious);
  CHECK(deep.counterparty.level_offset == -2);
  CHECK(deep.investor.level_offset == -2);

  CHECK_THROWS_AS(replacement_episode(model, Convention::A, 3), std::invalid_argument);
  CHECK_THROWS_AS(replacement_episode(model, Convention::B, 0), std::invalid_argument);
  CHECK_THROWS_AS(replacement_episode(model, Convention::B, 3, 0), std::invalid_argument);
}

TEST_CASE("default-free close-out marks reproduce the unilateral model") {
  const BilateralPricer& a = pricer(0.95, Convention::A, 1);
  CHECK(a.riskfree_par() == doctest::Approx(0.05505866395386933).epsilon(1e-10));

  CHECK(a.par_spread(recoveries(0.4)) ==
        doctest::Approx(0.0524782849558889).epsilon(kParEps));
  CHECK(a.par_spread(recoveries(0.9)) ==
        doctest::Approx(0.0546400040451534).epsilon(kParEps));
  CHECK(a.par_spread(recoveries(0.01)) ==
        doctest::Approx(0.05070878669530375).epsilon(kParEps));
  CHECK(a.par_spread(recoveries(0.4, false)) ==
        doctest::Approx(0.0466502321734639).epsilon(kParEps));

  CHECK(a.price(0.05, recoveries(0.4)) ==
        doctest::Approx(0.006408819837274824).epsilon(1e-8));
}

TEST_CASE("default-free replacement chain prices above the original counterparty") {
  const BilateralPricer& ap = pricer(0.95, Convention::APrime, 3);
  CHECK(ap.par_spread(recoveries(0.4)) ==
        doctest::Approx(0.052478296690784666).epsilon(kParEps));
  CHECK(ap.par_spread(recoveries(0.01)) ==
        doctest::Approx(0.0507087869945655).epsilon(kParEps));

  // The chain depth is irrelevant: the replacement never defaults, so there
  // is exactly one layer regardless of the configured rank.
  const BilateralPricer& ap1 = pricer(0.95, Convention::APrime, 1);
  CHECK(ap1.price(0.05, recoveries(0.4)) ==
        doctest::Approx(ap.price(0.05, recoveries(0.4))).epsilon(1e-14));

  const BilateralPricer& a = pricer(0.95, Convention::A, 1);
  CHECK(ap.par_spread(recoveries(0.4)) > a.par_spread(recoveries(0.4)));
}

TEST_CASE("risky replacement chains at depth three") {
  const SettlementPolicy pol = recoveries(0.4);
  const BilateralPricer& b = pricer(0.95, Convention::B, 3);
  const BilateralPricer& c = pricer(0.95, Convention::C, 3);
  const BilateralPricer& cp = pricer(0.95, Convention::CPrime, 3);

  const double par_b = b.par_spread(pol);
  const double par_c = c.par_spread(pol);
  const double par_cp = cp.par_spread(pol);
  CHECK(par_b == doctest::Approx(0.05244632493080032).epsilon(kParEps));
  CHECK(par_c == doctest::Approx(0.052355086961457874).epsilon(kParEps));
  CHECK(par_cp == doctest::Approx(0.05228483746754622).epsilon(kParEps));

  CHECK(b.par_spread(recoveries(0.9)) ==
        doctest::Approx(0.05462851175996347).epsilon(kParEps));
  CHECK(c.par_spread(recoveries(0.9)) ==
        doctest::Approx(0.0545932183348145).epsilon(kParEps));
  CHECK(cp.par_spread(recoveries(0.9)) ==
        doctest::Approx(0.05445188353600897).epsilon(kParEps));

  CHECK(b.par_spread(recoveries(0.01)) ==
        doctest::Approx(0.050707411496590644).epsilon(kParEps));
  CHECK(c.par_spread(recoveries(0.01)) ==
        doctest::Approx(0.05070375019001059).epsilon(kParEps));
  CHECK(cp.par_spread(recoveries(0.01)) ==
        doctest::Approx(0.050701857880107434).epsilon(kParEps));

  // A marked-down replacement book is worth less at close-out, so the fair
  // spread drops as the replacement terms get more punitive.
  const BilateralPricer& a = pricer(0.95, Convention::A, 1);
  const double par_a = a.par_spread(pol);
  CHECK(par_cp < par_c);
  CHECK(par_c < par_b);
  CHECK(par_b < par_a);
  CHECK(par_a < a.riskfree_par());

  CHECK(b.price(0.05, pol) == doctest::Approx(0.00632394861766441).epsilon(1e-8));
  CHECK(pricer(0.95, Convention::CPrime, 2).price(0.05, recoveries(0.4, false)) ==
        doctest::Approx(-0.009555629767041144).epsilon(1e-8));
}

TEST_CASE("replacement chain depth converges") {
  const SettlementPolicy pol = recoveries(0.4);
  const double r1 = pricer(0.95, Convention::B, 1).par_spread(pol);
  const double r2 = pricer(0.95, Convention::B, 2).par_spread(pol);
  const double r4 = pricer(0.95, Convention::B, 4).par_spread(pol);
  CHECK(r1 == doctest::Approx(0.0524782849558889).epsilon(kParEps));
  CHECK(r2 == doctest::Approx(0.05244661620100734).epsilon(kParEps));
  CHECK(r4 == doctest::Approx(0.052446322795668694).epsilon(kParEps));

  const double r3 = pricer(0.95, Convention::B, 3).par_spread(pol);
  CHECK(std::abs(r4 - r3) < 1e-6);
  CHECK(std::abs(r4 - r3) < std::abs(r3 - r2));
  CHECK(std::abs(r3 - r2) < std::abs(r2 - r1));
}

TEST_CASE("depth-one chains with default-free leaf match convention a") {
  const SettlementPolicy pol = recoveries(0.4);
  const BilateralPricer& a = pricer(0.95, Convention::A, 1);
  for (Convention cv : {Convention::B, Convention::C, Convention::CPrime}) {
    const BilateralPricer& one = pricer(0.95, cv, 1);
    for (double spread : {0.03, 0.05505866395386933}) {
      CHECK(std::abs(one.price(spread, pol) - a.price(spread, pol)) < 1e-12);
    }
    CHECK(std::abs(one.par_spread(pol) - a.par_spread(pol)) < 1e-10);
  }
}

TEST_CASE("written-off close-out marks") {
  const SettlementPolicy pol = recoveries(0.4);
  const double z1 = pricer(0.95, Convention::B, 1, LeafRule::Zero).par_spread(pol);
  const double z2 = pricer(0.95, Convention::B, 2, LeafRule::Zero).par_spread(pol);
  const double z3 = pricer(0.95, Convention::B, 3, LeafRule::Zero).par_spread(pol);
  CHECK(z1 == doctest::Approx(0.050662528561853215).epsilon(kParEps));
  CHECK(z2 == doctest::Approx(0.05242550785577141).epsilon(kParEps));
  CHECK(z3 == doctest::Approx(0.052446131079265046).epsilon(kParEps));

  CHECK(pricer(0.95, Convention::B, 1, LeafRule::Zero).price(0.05, pol) ==
        doctest::Approx(0.0016759448557928363).epsilon(1e-8));

  // Writing the replacement book off punishes the surviving investor, so the
  // written-off par spread sits below the default-free-leaf one at any depth,
  // and the gap fades as the leaf recedes.
  const double r1 = pricer(0.95, Convention::B, 1).par_spread(pol);
  const double r3 = pricer(0.95, Convention::B, 3).par_spread(pol);
  CHECK(z1 < r1);
  CHECK(z3 < r3);
  CHECK(r1 - z1 > r3 - z3);
}

TEST_CASE("first-default-free value and full-recovery identities") {
  const BilateralPricer& a = pricer(0.95, Convention::A, 1);
  const SettlementPolicy pol = recoveries(0.4);
  CHECK(std::abs(a.first_default_free_price(0.05, pol) - a.riskfree_value(0.05)) <
        1e-13);

  const BilateralPricer& b = pricer(0.95, Convention::B, 3);
  const SettlementPolicy full = recoveries(1.0);
  CHECK(std::abs(b.price(0.05, full) - b.first_default_free_price(0.05, full)) <
        1e-12);
  CHECK(std::abs(b.cva_direct(0.05, full) -
                 (b.riskfree_value(0.05) - b.price(0.05, full))) < 1e-12);

  // A fully collateralized close-out transfers the mark exactly, whatever the
  // recoveries.
  SettlementPolicy margined = recoveries(0.4);
  margined.margin = MarginMode::Collateral;
  margined.collateral_fraction = 1.0;
  const BilateralPricer& cp = pricer(0.95, Convention::CPrime, 2);
  CHECK(std::abs(cp.price(0.05, margined) -
                 cp.first_default_free_price(0.05, margined)) < 1e-12);

  // At the default-free par spread with full recoveries nothing is lost to
  // either default, so the bilateral contract is at par too.
  const double krf = a.riskfree_par();
  CHECK(std::abs(a.price(krf, full)) < 1e-10);
  CHECK(std::abs(a.cva_direct(krf, full)) < 1e-10);
}

TEST_CASE("direct credit adjustment equals the value gap") {
  const BilateralPricer& b = pricer(0.95, Convention::B, 2, LeafRule::RiskFree, 0.95);
  const SettlementPolicy pol = recoveries(0.4);
  CHECK(std::abs(b.cva_direct(0.05, pol) -
                 (b.riskfree_value(0.05) - b.price(0.05, pol))) < 1e-12);

  const BilateralPricer& a = pricer(0.95, Convention::A, 1);
  const SettlementPolicy off = recoveries(0.4, false);
  CHECK(std::abs(a.cva_direct(0.07, off) -
                 (a.riskfree_value(0.07) - a.price(0.07, off))) < 1e-12);
}

TEST_CASE("replacement count truncation") {
  const SettlementPolicy pol = recoveries(0.4);
  CHECK(pricer(0.95, Convention::B, 3, LeafRule::RiskFree, 0.95).par_spread(pol) ==
        doctest::Approx(0.05238466565977323).epsilon(kParEps));
  CHECK(pricer(0.95, Convention::CPrime, 3, LeafRule::RiskFree, 0.95).par_spread(pol) ==
        doctest::Approx(0.05223250627253168).epsilon(kParEps));

  // Near-total coverage reproduces the exact chain.
  const double nearly = pricer(0.95, Convention::B, 3, LeafRule::RiskFree, 0.9999)
                            .par_spread(pol);
  const double exact = pricer(0.95, Convention::B, 3).par_spread(pol);
  CHECK(std::abs(nearly - exact) < 1e-5);
}

TEST_CASE("par spreads are monotone in the settlement recovery") {
  const BilateralPricer& cp = pricer(0.95, Convention::CPrime, 3);
  const double lo = cp.par_spread(recoveries(0.01));
  const double mid = cp.par_spread(recoveries(0.4));
  const double hi = cp.par_spread(recoveries(0.9));
  CHECK(lo < mid);
  CHECK(mid < hi);
  CHECK(hi < cp.riskfree_par());

  // With nothing recovered the close-out convention barely matters: every
  // positive mark is lost either way.
  const double pars[] = {
      pricer(0.95, Convention::A, 1).par_spread(recoveries(0.01)),
      pricer(0.95, Convention::APrime, 3).par_spread(recoveries(0.01)),
      pricer(0.95, Convention::B, 3).par_spread(recoveries(0.01)),
      pricer(0.95, Convention::C, 3).par_spread(recoveries(0.01)),
      pricer(0.95, Convention::CPrime, 3).par_spread(recoveries(0.01)),
  };
  for (double x : pars) {
    for (double y : pars) CHECK(std::abs(x - y) < 1e-4);
  }
}

TEST_CASE("systemic replacement defaults feed the count") {
  const SettlementPolicy pol = recoveries(0.4);
  const double b = pricer(0.95, Convention::B, 3, LeafRule::RiskFree, 1.0, true)
                       .par_spread(pol);
  const double c = pricer(0.95, Convention::C, 3, LeafRule::RiskFree, 1.0, true)
                       .par_spread(pol);
  const double cp = pricer(0.95, Convention::CPrime, 3, LeafRule::RiskFree, 1.0, true)
                        .par_spread(pol);
  CHECK(b == doctest::Approx(0.05247154179866503).epsilon(kParEps));
  CHECK(c == doctest::Approx(0.0524255746513913).epsilon(kParEps));
  CHECK(cp == doctest::Approx(0.05234646677386616).epsilon(kParEps));

  // Counting replacement defaults raises the contagion seen by the marks, so
  // the close-out book is worth more and the par spread moves up.
  CHECK(b > pricer(0.95, Convention::B, 3).par_spread(pol));
  CHECK(c > pricer(0.95, Convention::C, 3).par_spread(pol));
  CHECK(cp > pricer(0.95, Convention::CPrime, 3).par_spread(pol));
}

TEST_CASE("inception count above zero") {
  const SettlementPolicy pol = recoveries(0.4);
  const BilateralPricer& a = pricer(0.95, Convention::A, 1, LeafRule::RiskFree, 1.0,
                                    false, 2);
  CHECK(a.riskfree_par() == doctest::Approx(0.1720538609055987).epsilon(1e-10));
  CHECK(a.par_spread(pol) == doctest::Approx(0.15846805176045536).epsilon(kParEps));
  CHECK(pricer(0.95, Convention::B, 2, LeafRule::RiskFree, 1.0, false, 2)
            .par_spread(pol) ==
        doctest::Approx(0.15816169643379863).epsilon(kParEps));
}

TEST_CASE("stressed regime with one-year survival 0.8") {
  const SettlementPolicy pol = recoveries(0.4);
  const BilateralPricer& a = pricer(0.8, Convention::A, 1);
  CHECK(a.riskfree_par() == doctest::Approx(0.28999744954442896).epsilon(1e-10));
  CHECK(a.par_spread(pol) == doctest::Approx(0.26172870112577534).epsilon(kParEps));
  CHECK(a.par_spread(recoveries(0.4, false)) ==
        doctest::Approx(0.1908301237930131).epsilon(kParEps));
  CHECK(a.price(0.05, pol) == doctest::Approx(0.33869388620880847).epsilon(1e-10));

  CHECK(pricer(0.8, Convention::APrime, 3).par_spread(pol) ==
        doctest::Approx(0.26172895551037056).epsilon(kParEps));
  const BilateralPricer& b = pricer(0.8, Convention::B, 3);
  CHECK(b.par_spread(pol) == doctest::Approx(0.26114197739741696).epsilon(kParEps));
  CHECK(b.price(0.05, pol) == doctest::Approx(0.3373781717702298).epsilon(1e-10));
  CHECK(pricer(0.8, Convention::C, 3).par_spread(pol) ==
        doctest::Approx(0.25903988891175284).epsilon(kParEps));
  const BilateralPricer& cp = pricer(0.8, Convention::CPrime, 3);
  CHECK(cp.par_spread(pol) == doctest::Approx(0.25833297172145137).epsilon(kParEps));
  CHECK(cp.par_spread(recoveries(0.4, false)) ==
        doctest::Approx(0.17832327699451078).epsilon(kParEps));
  CHECK(pricer(0.8, Convention::CPrime, 2).price(0.05, recoveries(0.4, false)) ==
        doctest::Approx(0.17905167444591233).epsilon(1e-10));
}

TEST_CASE("pricing report composition") {
  const BilateralPricer& a = pricer(0.95, Convention::A, 1);
  const PricingReport rep = a.report(recoveries(0.4));
  CHECK(rep.convention == Convention::A);
  CHECK(rep.par_spread == doctest::Approx(0.0524782849558889).epsilon(kParEps));
  CHECK(std::abs(rep.residual) <= BilateralPricer::price_tolerance());
  CHECK(rep.riskfree_par == doctest::Approx(0.05505866395386933).epsilon(1e-10));
  CHECK(rep.cva == doctest::Approx(0.006890501045384523).epsilon(1e-5));
  CHECK(rep.iterations >= 1);
  CHECK(rep.evaluations.size() >= 3);

  const PricingReport stressed = pricer(0.8, Convention::A, 1).report(recoveries(0.4));
  CHECK(stressed.cva == doctest::Approx(0.04796343664431724).epsilon(1e-5));

  CHECK(a.layer_values(0.05, recoveries(0.4)).empty());
  const auto layers = pricer(0.95, Convention::CPrime, 3).layer_values(
      0.05, recoveries(0.4));
  REQUIRE(layers.size() == 2);
  for (const auto& table : layers) {
    CHECK(table.rows() == 37);
    CHECK(table.cols() == 13);
    CHECK(table.col(0).cwiseAbs().maxCoeff() == 0.0);  // inception count unused
    CHECK(table.row(36).cwiseAbs().maxCoeff() == 0.0);  // worthless at maturity
  }
  // Innermost table first: the outer layer folds the inner one in, pulling
  // its values toward the default-free marks.
  CHECK(layers[0](0, 1) != layers[1](0, 1));
}
