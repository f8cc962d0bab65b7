#include "core/cds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ccr {

TenorGrid TenorGrid::uniform(double maturity, int steps) {
  if (!(maturity > 0.0)) throw std::invalid_argument("maturity must be positive");
  if (steps < 1) throw std::invalid_argument("grid needs at least one interval");
  TenorGrid grid;
  grid.dates.resize(steps + 1);
  for (int j = 0; j <= steps; ++j) grid.dates[j] = maturity * j / steps;
  grid.dates[steps] = maturity;
  return grid;
}

void TenorGrid::validate() const {
  if (dates.size() < 2) throw std::invalid_argument("grid needs at least one interval");
  if (dates.front() != 0.0) throw std::invalid_argument("grid must start at zero");
  for (size_t j = 1; j < dates.size(); ++j) {
    if (!(dates[j] > dates[j - 1])) {
      throw std::invalid_argument("grid dates must be strictly increasing");
    }
  }
}

void ContractSpec::validate() const {
  if (!(maturity > 0.0)) throw std::invalid_argument("maturity must be positive");
  if (!(spread >= 0.0)) throw std::invalid_argument("spread must be nonnegative");
  if (!(recovery >= 0.0 && recovery <= 1.0)) {
    throw std::invalid_argument("recovery must lie in [0,1]");
  }
}

double RiskFreeTables::value(int tenor_index, int state, double spread,
                             double recovery) const {
  return (1.0 - recovery) * hit.at(tenor_index)(state) -
         spread * accrual.at(tenor_index)(state);
}

double RiskFreeTables::par_spread(int tenor_index, int state, double recovery) const {
  const double u = hit.at(tenor_index)(state);
  const double w = accrual.at(tenor_index)(state);
  if (!(u > 0.0)) throw std::runtime_error("protection leg vanishes; no par spread");
  if (!(w > 0.0)) throw std::runtime_error("premium leg vanishes; no par spread");
  return (1.0 - recovery) * u / w;
}

RiskFreeTables riskfree_tables(const RateMatrix& environment, const TenorGrid& grid) {
  grid.validate();
  const int M = grid.steps();
  const Eigen::Index dim = environment.rows();
  const auto kernels = step_kernels(environment, grid.dates);

  RiskFreeTables tables;
  tables.hit.assign(M + 1, Eigen::VectorXd::Zero(dim));
  tables.accrual.assign(M + 1, Eigen::VectorXd::Zero(dim));
  for (Eigen::Index s = 0; s < dim; ++s) {
    if (s & 1) tables.hit[M](s) = 1.0;
  }
  for (int j = M - 1; j >= 0; --j) {
    tables.hit[j] = kernels[j] * tables.hit[j + 1];
    tables.accrual[j] = kernels[j] * tables.accrual[j + 1];
    const double dt = grid.dt(j);
    for (Eigen::Index s = 0; s < dim; ++s) {
      if (!(s & 1)) tables.accrual[j](s) += dt;
    }
  }
  return tables;
}

EpisodeSpec inception_episode(const ModelSpec& model) {
  model.validate();
  EpisodeSpec ep;
  ep.pool_size = model.m - model.initial_defaults;
  ep.base_count = model.initial_defaults;
  ep.investor.multiplier = model.mult_investor;
  ep.counterparty.multiplier = model.mult_counterparty;
  ep.reference.multiplier = model.mult_reference;
  return ep;
}

EpisodeSpec post_counterparty_episode(const ModelSpec& model, int count) {
  model.validate();
  if (count <= model.initial_defaults) {
    throw std::invalid_argument("count must exceed the inception count");
  }
  EpisodeSpec ep;
  ep.pool_size = std::max(model.m - (count - 1), 0);
  ep.base_count = count;
  ep.investor.multiplier = model.mult_investor;
  ep.counterparty = PartyDynamics::absent();
  ep.reference.multiplier = model.mult_reference;
  return ep;
}

namespace {

int tenor_state_index(const TenorGrid& grid, int tenor_index) {
  if (tenor_index < 0 || tenor_index > grid.steps()) {
    throw std::invalid_argument("tenor index outside the payment schedule");
  }
  return tenor_index;
}

RiskFreeTables conditional_tables(const ContractSpec& contract, const ModelSpec& model,
                                  const TenorGrid& grid, int count) {
  contract.validate();
  grid.validate();
  if (std::abs(grid.maturity() - contract.maturity) > 1e-12) {
    throw std::invalid_argument("grid must end at the contract maturity");
  }
  if (count < model.initial_defaults || count > model.m + 2) {
    throw std::invalid_argument("conditioning count out of range");
  }
  const EpisodeSpec ep = count == model.initial_defaults
                             ? inception_episode(model)
                             : post_counterparty_episode(model, count);
  const auto gamma = resolve_intensities(model, required_table_length(ep));
  return riskfree_tables(build_environment_generator(ep, gamma), grid);
}

}  // namespace

double riskfree_cds_value(const ContractSpec& contract, const ModelSpec& model,
                          const TenorGrid& grid, int count, int tenor_index) {
  const int j = tenor_state_index(grid, tenor_index);
  const auto tables = conditional_tables(contract, model, grid, count);
  return tables.value(j, env_index(0, 0, 0, 0), contract.spread, contract.recovery);
}

double riskfree_par_spread(const ContractSpec& contract, const ModelSpec& model,
                           const TenorGrid& grid) {
  const auto tables = conditional_tables(contract, model, grid, model.initial_defaults);
  const double par = tables.par_spread(0, env_index(0, 0, 0, 0), contract.recovery);
  if (!(par <= 10.0)) {
    throw std::runtime_error("par spread has no root in [0, 10]");
  }
  return par;
}

const char* leaf_rule_label(LeafRule rule) {
  return rule == LeafRule::RiskFree ? "riskfree" : "zero";
}

LeafRule parse_leaf_rule(const std::string& s) {
  std::string t;
  for (char ch : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (t == "riskfree" || t == "risk_free" || t == "risk-free") return LeafRule::RiskFree;
  if (t == "zero") return LeafRule::Zero;
  throw std::invalid_argument("unknown leaf rule: " + s);
}

double equivalent_contract_value(const ContractSpec& contract, const ModelSpec& model,
                                 const TenorGrid& grid, int count, int tenor_index,
                                 LeafRule rule) {
  if (rule == LeafRule::Zero) {
    tenor_state_index(grid, tenor_index);
    return 0.0;
  }
  return riskfree_cds_value(contract, model, grid, count, tenor_index);
}

}  // namespace ccr
