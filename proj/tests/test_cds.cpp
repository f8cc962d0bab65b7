#include <cmath>
#include <stdexcept>
#include <vector>

#include "core/cds.hpp"
#include "doctest.h"

using namespace ccr;

namespace {

ModelSpec benchmark_model(double survival_1y) {
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

ContractSpec benchmark_contract() {
  ContractSpec contract;
  contract.maturity = 3.0;
  contract.recovery = 0.45;
  return contract;
}

// Single name with constant intensity: an environment holding only the
// reference entity.
EpisodeSpec single_name() {
  EpisodeSpec ep;
  ep.pool_size = 0;
  ep.base_count = 0;
  ep.investor = PartyDynamics::absent();
  ep.counterparty = PartyDynamics::absent();
  return ep;
}

}  // namespace

TEST_CASE("uniform tenor grid") {
  const auto grid = TenorGrid::uniform(3.0, 36);
  CHECK(grid.steps() == 36);
  CHECK(grid.maturity() == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(grid.dates.front() == 0.0);
  CHECK(grid.dt(0) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(grid.dt(35) == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  grid.validate();

  CHECK_THROWS_AS(TenorGrid::uniform(0.0, 12), std::invalid_argument);
  CHECK_THROWS_AS(TenorGrid::uniform(3.0, 0), std::invalid_argument);

  TenorGrid bad;
  bad.dates = {0.5, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.dates = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.dates = {0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("contract validation") {
  ContractSpec c = benchmark_contract();
  c.validate();
  c.recovery = 1.2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.recovery = 0.4;
  c.maturity = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.maturity = 3.0;
  c.spread = -0.01;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("constant intensity single name matches the closed form") {
  const double lambda = 0.1;
  const double T = 3.0;
  const double R = 0.45;
  const std::vector<double> gamma(3, lambda);
  const auto env = build_environment_generator(single_name(), gamma);

  for (int M : {12, 36}) {
    const auto grid = TenorGrid::uniform(T, M);
    const auto tables = riskfree_tables(env, grid);
    const int s0 = env_index(0, 0, 0, 0);
    const double dt = T / M;

    // protection leg is exact: default by maturity does not depend on the grid
    CHECK(tables.hit[0](s0) ==
          doctest::Approx(1.0 - std::exp(-lambda * T)).epsilon(1e-13));

    // premium accrues at left endpoints: a finite geometric sum
    const double accrual_exact =
        dt * (1.0 - std::exp(-lambda * T)) / (1.0 - std::exp(-lambda * dt));
    CHECK(tables.accrual[0](s0) == doctest::Approx(accrual_exact).epsilon(1e-12));

    // the continuous-time expressions are recovered at first order in dt
    const double accrual_cont = (1.0 - std::exp(-lambda * T)) / lambda;
    CHECK(tables.accrual[0](s0) >= accrual_cont);
    CHECK(tables.accrual[0](s0) - accrual_cont <= dt * (1.0 - std::exp(-lambda * T)));

    const double par = tables.par_spread(0, s0, R);
    const double par_cont = (1.0 - R) * lambda;
    CHECK(par <= par_cont);
    CHECK(std::abs(par / par_cont - 1.0) < 1.2 * lambda * dt);

    // a state where the default has been observed is worth the payout
    CHECK(tables.value(12 % (M + 1), env_index(0, 0, 0, 1), 0.02, R) ==
          doctest::Approx(1.0 - R).epsilon(1e-13));
  }
}

TEST_CASE("table entries stay inside their ranges") {
  const auto model = benchmark_model(0.95);
  const auto grid = TenorGrid::uniform(3.0, 36);
  const auto ep = inception_episode(model);
  const auto gamma = resolve_intensities(model, required_table_length(ep));
  const auto tables = riskfree_tables(build_environment_generator(ep, gamma), grid);
  for (int j = 0; j <= grid.steps(); ++j) {
    CHECK(tables.hit[j].minCoeff() >= -1e-14);
    CHECK(tables.hit[j].maxCoeff() <= 1.0 + 1e-14);
    CHECK(tables.accrual[j].minCoeff() >= -1e-14);
    CHECK(tables.accrual[j].maxCoeff() <= 3.0 + 1e-12);
  }
}

TEST_CASE("benchmark par spreads") {
  const auto grid = TenorGrid::uniform(3.0, 36);
  const auto contract = benchmark_contract();

  const double par95 = riskfree_par_spread(contract, benchmark_model(0.95), grid);
  CHECK(par95 == doctest::Approx(0.05505866395386933).epsilon(1e-8));
  CHECK(std::abs(par95 / 0.0550386 - 1.0) < 0.005);

  const double par80 = riskfree_par_spread(contract, benchmark_model(0.80), grid);
  CHECK(par80 == doctest::Approx(0.28999744954442896).epsilon(1e-8));

  // the par contract values to zero at inception
  ContractSpec at_par = contract;
  at_par.spread = par95;
  CHECK(std::abs(riskfree_cds_value(at_par, benchmark_model(0.95), grid, 0, 0)) <=
        1e-9);
}

TEST_CASE("value is linear in the spread and monotone in recovery") {
  const auto model = benchmark_model(0.95);
  const auto grid = TenorGrid::uniform(3.0, 36);
  ContractSpec c = benchmark_contract();

  auto value_at = [&](double spread, double recovery) {
    ContractSpec cc = c;
    cc.spread = spread;
    cc.recovery = recovery;
    return riskfree_cds_value(cc, model, grid, 0, 0);
  };

  const double v0 = value_at(0.0, 0.45);
  const double v1 = value_at(0.02, 0.45);
  const double v2 = value_at(0.05, 0.45);
  const double v3 = value_at(0.07, 0.45);
  CHECK(std::abs((v1 - v0) / 0.02 - (v3 - v2) / 0.02) < 1e-12);
  CHECK(std::abs(v1 + v2 - v0 - v3) < 1e-13);
  CHECK(v1 > v2);

  CHECK(value_at(0.02, 0.0) > value_at(0.02, 0.45));
  CHECK(value_at(0.02, 0.45) > value_at(0.02, 0.9));
}

TEST_CASE("conditional value grows with the observed count") {
  const auto model = benchmark_model(0.95);
  const auto grid = TenorGrid::uniform(3.0, 36);
  ContractSpec c = benchmark_contract();
  c.spread = riskfree_par_spread(c, model, grid);

  double previous = riskfree_cds_value(c, model, grid, 1, 12);
  for (int count = 2; count <= model.m + 2; ++count) {
    const double v = riskfree_cds_value(c, model, grid, count, 12);
    CHECK(v >= previous - 1e-13);
    previous = v;
  }
  // a single extra default already carries positive value at the par spread
  CHECK(riskfree_cds_value(c, model, grid, 1, 12) > 0.0);
}

TEST_CASE("par spread change halves when the grid step halves") {
  const auto model = benchmark_model(0.95);
  const auto contract = benchmark_contract();
  const double p18 = riskfree_par_spread(contract, model, TenorGrid::uniform(3.0, 18));
  const double p36 = riskfree_par_spread(contract, model, TenorGrid::uniform(3.0, 36));
  const double p72 = riskfree_par_spread(contract, model, TenorGrid::uniform(3.0, 72));
  const double ratio = (p72 - p36) / (p36 - p18);
  CHECK(ratio > 0.3);
  CHECK(ratio < 0.7);
}

TEST_CASE("equivalent contract marks") {
  const auto model = benchmark_model(0.95);
  const auto grid = TenorGrid::uniform(3.0, 36);
  ContractSpec c = benchmark_contract();
  c.spread = riskfree_par_spread(c, model, grid);

  CHECK(equivalent_contract_value(c, model, grid, 4, 12, LeafRule::Zero) == 0.0);
  CHECK(std::abs(equivalent_contract_value(c, model, grid, 0, 0, LeafRule::RiskFree)) <=
        1e-9);
  CHECK(equivalent_contract_value(c, model, grid, 3, 12, LeafRule::RiskFree) ==
        doctest::Approx(riskfree_cds_value(c, model, grid, 3, 12)).epsilon(1e-15));

  CHECK(parse_leaf_rule("riskfree") == LeafRule::RiskFree);
  CHECK(parse_leaf_rule("Zero") == LeafRule::Zero);
  CHECK_THROWS_AS(parse_leaf_rule("none"), std::invalid_argument);
  CHECK(leaf_rule_label(LeafRule::RiskFree) == doctest::String("riskfree"));
}

TEST_CASE("domain errors are rejected") {
  const auto model = benchmark_model(0.95);
  const auto grid = TenorGrid::uniform(3.0, 36);
  const auto contract = benchmark_contract();

  CHECK_THROWS_AS(riskfree_cds_value(contract, model, grid, 0, 37),
                  std::invalid_argument);
  CHECK_THROWS_AS(riskfree_cds_value(contract, model, grid, 0, -1),
                  std::invalid_argument);
  CHECK_THROWS_AS(riskfree_cds_value(contract, model, grid, 13, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(riskfree_cds_value(contract, model, grid, -1, 0),
                  std::invalid_argument);

  // schedule must end at the contract maturity
  CHECK_THROWS_AS(riskfree_cds_value(contract, model, TenorGrid::uniform(2.0, 24), 0, 0),
                  std::invalid_argument);

  // a very risky name needs a spread beyond any quoted range
  ModelSpec harsh = benchmark_model(0.95);
  harsh.m = 1;
  harsh.intensity_table = {2000.0};
  ContractSpec r0 = contract;
  r0.recovery = 0.0;
  CHECK_THROWS_AS(riskfree_par_spread(r0, harsh, TenorGrid::uniform(3.0, 120)),
                  std::runtime_error);
}

TEST_CASE("model spec resolution") {
  ModelSpec model = benchmark_model(0.95);
  const auto gamma = resolve_intensities(model, model.m + 3);
  CHECK(gamma.size() == 13);
  CHECK(gamma[0] == doctest::Approx(0.04404717928801696).epsilon(1e-8));
  CHECK(gamma[1] == doctest::Approx(gamma[0] * 1.5).epsilon(1e-13));

  model.calibration = CalibrationMode::Direct;
  CHECK(resolve_intensities(model, 1)[0] ==
        doctest::Approx(-std::log(0.95)).epsilon(1e-14));

  // explicit tables are used verbatim and padded with their last level
  model.intensity_table = {0.01, 0.02};
  const auto padded = resolve_intensities(model, 4);
  CHECK(padded == std::vector<double>{0.01, 0.02, 0.02, 0.02});

  const auto spec = generator_spec(benchmark_model(0.95));
  CHECK(spec.m == 10);
  CHECK(spec.base_intensity.size() == 13);
  CHECK(spec.mult_counterparty == 0.8);

  ModelSpec bad = benchmark_model(0.95);
  bad.initial_defaults = 11;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = benchmark_model(0.95);
  bad.intensity_table = {0.1, -0.2};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
