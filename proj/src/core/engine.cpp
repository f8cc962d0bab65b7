#include "core/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ccr {

namespace {

// Smallest contiguous count window holding at least `coverage` of the mass;
// ties resolve to the lowest start.
std::array<int, 2> coverage_window(const Eigen::VectorXd& mass, double coverage) {
  const int n = static_cast<int>(mass.size());
  const double total = mass.sum();
  if (coverage >= 1.0 || total <= 0.0) return {0, n - 1};
  const double target = coverage * total;
  int best_lo = 0;
  int best_hi = n - 1;
  int best_len = n + 1;
  for (int lo = 0; lo < n; ++lo) {
    double s = 0.0;
    for (int hi = lo; hi < n; ++hi) {
      s += mass[hi];
      if (s >= target) {
        if (hi - lo + 1 < best_len) {
          best_len = hi - lo + 1;
          best_lo = lo;
          best_hi = hi;
        }
        break;
      }
    }
  }
  return {best_lo, best_hi};
}

std::string format_curve(const std::vector<std::pair<double, double>>& evals) {
  std::ostringstream os;
  for (const auto& [s, p] : evals) os << " (" << s << ", " << p << ")";
  return os.str();
}

}  // namespace

void CloseOutRule::validate() const {
  if (rank < 1) throw std::invalid_argument("close-out rank must be at least 1");
}

void SettlementPolicy::validate() const {
  if (recovery_investor < 0.0 || recovery_investor > 1.0 ||
      recovery_counterparty < 0.0 || recovery_counterparty > 1.0) {
    throw std::invalid_argument("party recoveries must lie in [0, 1]");
  }
  if (collateral_fraction < 0.0 || collateral_fraction > 1.0) {
    throw std::invalid_argument("collateral fraction must lie in [0, 1]");
  }
  if (lockup_investor < 0.0 || lockup_counterparty < 0.0) {
    throw std::invalid_argument("lock-up amounts must be non-negative");
  }
  terms_at(1.0).validate();
  terms_at(-1.0).validate();
}

SettlementTerms SettlementPolicy::terms_at(double mark) const {
  SettlementTerms terms;
  terms.r1 = recovery_investor;
  terms.r2 = recovery_counterparty;
  terms.c1 = collateral_fraction * std::max(-mark, 0.0);
  terms.c2 = collateral_fraction * std::max(mark, 0.0);
  terms.u1 = lockup_investor;
  terms.u2 = lockup_counterparty;
  terms.mode = margin;
  return terms;
}

double SettlementPolicy::on_counterparty_default(double mark) const {
  return settle(mark, terms_at(mark), Party::Counterparty);
}

double SettlementPolicy::on_investor_default(double mark) const {
  if (!include_investor_settlement) return 0.0;
  return settle(mark, terms_at(mark), Party::Investor);
}

void EngineConfig::validate() const {
  closeout.validate();
  if (coverage < 0.5 || coverage > 1.0) {
    throw std::invalid_argument("count coverage must lie in [0.5, 1]");
  }
}

EpisodeSpec replacement_episode(const ModelSpec& model, Convention convention,
                                int count, int layer) {
  model.validate();
  if (count <= model.initial_defaults) {
    throw std::invalid_argument("count must exceed the inception count");
  }
  if (layer < 1) throw std::invalid_argument("layer must be at least 1");
  if (convention == Convention::A) {
    throw std::invalid_argument("convention a has no replacement environment");
  }
  if (convention == Convention::APrime) return post_counterparty_episode(model, count);

  const bool systemic = model.systemic_replacements;
  const int dead = systemic ? layer : 1;  // counted defaults known not to be pool firms
  EpisodeSpec ep;
  ep.pool_size = std::max(model.m - (count - dead), 0);
  ep.base_count = count;
  ep.investor.multiplier = model.mult_investor;
  ep.reference.multiplier = model.mult_reference;
  ep.counterparty.multiplier = model.mult_counterparty;
  ep.counterparty.contagious = systemic;
  switch (convention) {
    case Convention::B:
      ep.counterparty.frozen_level = model.initial_defaults;
      break;
    case Convention::C:
      ep.counterparty.level_offset = -dead;
      break;
    case Convention::CPrime:
      ep.counterparty.level_offset = -dead;
      ep.investor.level_offset = -dead;
      break;
    default:
      break;
  }
  ep.validate();
  return ep;
}

BilateralPricer::BilateralPricer(const ModelSpec& model, const ContractSpec& contract,
                                 const TenorGrid& grid, const EngineConfig& config)
    : model_(model), contract_(contract), grid_(grid), config_(config) {
  model_.validate();
  contract_.validate();
  grid_.validate();
  config_.validate();

  const int steps = grid_.steps();
  dt_ = grid_.dt(0);
  for (int i = 1; i < steps; ++i) {
    if (std::abs(grid_.dt(i) - dt_) > 1e-12 * std::max(1.0, dt_)) {
      throw std::invalid_argument("bilateral pricing requires a uniform tenor grid");
    }
  }

  const Convention cv = config_.convention;
  const int rank = config_.closeout.rank;
  int layers = 0;
  if (cv == Convention::APrime) {
    layers = 1;
  } else if (cv != Convention::A) {
    layers = rank - 1;
  }
  const bool systemic = model_.systemic_replacements && layers > 0 &&
                        cv != Convention::APrime;
  count_cap_ = model_.m + 3 + (systemic ? rank - 1 : 0);

  const EpisodeSpec root_ep = inception_episode(model_);
  const int first_count = model_.initial_defaults + 1;

  std::vector<std::vector<EpisodeSpec>> bank_eps;
  const int bank_slots = layers == 0 ? 0 : (systemic ? layers : 1);
  for (int slot = 0; slot < bank_slots; ++slot) {
    std::vector<EpisodeSpec> eps;
    for (int count = first_count; count < count_cap_; ++count) {
      eps.push_back(replacement_episode(model_, cv, count, slot + 1));
    }
    bank_eps.push_back(std::move(eps));
  }

  int table_len = required_table_length(root_ep);
  for (const auto& eps : bank_eps) {
    for (const auto& ep : eps) table_len = std::max(table_len, required_table_length(ep));
  }
  gamma_ = resolve_intensities(model_, table_len);

  root_ = make_tables(root_ep);
  for (const auto& eps : bank_eps) {
    std::vector<NodeTables> bank(count_cap_);
    for (int count = first_count; count < count_cap_; ++count) {
      bank[count] = make_tables(eps[count - first_count]);
    }
    banks_.push_back(std::move(bank));
  }
}

BilateralPricer::NodeTables BilateralPricer::make_tables(const EpisodeSpec& episode) const {
  NodeTables t;
  t.episode = episode;
  t.events = event_probabilities(episode, gamma_, grid_.steps(), dt_);
  t.riskfree = riskfree_tables(build_environment_generator(episode, gamma_), grid_);
  t.windows.resize(grid_.steps());
  for (int rp = 0; rp < grid_.steps(); ++rp) {
    if (episode.counterparty.present && config_.coverage < 1.0) {
      t.windows[rp] = coverage_window(t.events.counterparty_first_by_count(rp),
                                      config_.coverage);
    } else {
      t.windows[rp] = {0, count_cap_ - 1};
    }
  }
  return t;
}

const std::vector<BilateralPricer::NodeTables>& BilateralPricer::bank(int layer) const {
  if (banks_.empty()) throw std::logic_error("no replacement tables were built");
  if (banks_.size() == 1) return banks_[0];
  return banks_.at(layer - 1);
}

double BilateralPricer::counterparty_mark(const NodeTables& t, MarkMode mode,
                                          const Eigen::MatrixXd* next, int interval,
                                          int absolute, int d, int a, int b,
                                          double spread) const {
  switch (mode) {
    case MarkMode::RiskFree:
      return t.riskfree.value(absolute, env_index(d, a, 1, b), spread,
                              contract_.recovery);
    case MarkMode::Zero:
      // Write-off covers the whole position, pending payouts included.
      return 0.0;
    case MarkMode::Next: {
      // The replacement environment cannot carry an already-defaulted
      // reference; the mark there is the settled protection payout.
      if (b == 1) return 1.0 - contract_.recovery;
      int v = t.events.count_after_counterparty_default(d, a, b);
      const auto& win = t.windows[interval];
      v = std::clamp(v, win[0], win[1]);
      v = std::min(v, count_cap_ - 1);
      return (*next)(absolute, v);
    }
  }
  throw std::logic_error("unreachable mark mode");
}

double BilateralPricer::investor_mark(const NodeTables& t, int absolute, int d,
                                      int a, int b, double spread) const {
  return t.riskfree.value(absolute, env_index(d, 1, a, b), spread,
                          contract_.recovery);
}

double BilateralPricer::node_value(const NodeTables& t, int entry, double spread,
                                   const SettlementPolicy& policy, MarkMode mode,
                                   const Eigen::MatrixXd* next, bool passthrough) const {
  const EventTable& ev = t.events;
  const int steps = grid_.steps();
  const double loss = 1.0 - contract_.recovery;
  double acc = 0.0;
  for (int rp = 0; entry + rp < steps; ++rp) {
    const int absolute = entry + rp + 1;
    acc -= spread * dt_ * ev.alive[rp];
    acc += loss * ev.reference_first[rp];
    const Eigen::VectorXd& cpty = ev.counterparty_first[rp];
    const Eigen::VectorXd& inv = ev.investor_first[rp];
    for (int d = 0; d <= t.episode.pool_size; ++d) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const int bucket = ev.bucket_index(d, a, b);
          const double mc = cpty[bucket];
          if (mc > 0.0) {
            const double mark =
                counterparty_mark(t, mode, next, rp, absolute, d, a, b, spread);
            acc += mc * (passthrough ? mark : policy.on_counterparty_default(mark));
          }
          const double mi = inv[bucket];
          if (mi > 0.0) {
            const double mark = investor_mark(t, absolute, d, a, b, spread);
            acc += mi * (passthrough ? mark : policy.on_investor_default(mark));
          }
        }
      }
    }
  }
  return acc;
}

Eigen::MatrixXd BilateralPricer::layer_table(int layer, double spread,
                                             const SettlementPolicy& policy,
                                             MarkMode mode,
                                             const Eigen::MatrixXd* next) const {
  const int steps = grid_.steps();
  const int first_count = model_.initial_defaults + 1;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(steps + 1, count_cap_);
  const auto& bk = bank(layer);
  for (int count = first_count; count < count_cap_; ++count) {
    const NodeTables& t = bk[count];
    for (int entry = steps - 1; entry >= 0; --entry) {
      table(entry, count) = node_value(t, entry, spread, policy, mode, next, false);
    }
  }
  return table;
}

std::optional<Eigen::MatrixXd> BilateralPricer::root_marks(
    double spread, const SettlementPolicy& policy, MarkMode* mode,
    std::vector<Eigen::MatrixXd>* dump) const {
  const Convention cv = config_.convention;
  const int rank = config_.closeout.rank;
  if (cv == Convention::A) {
    *mode = MarkMode::RiskFree;
    return std::nullopt;
  }
  if (cv == Convention::APrime) {
    Eigen::MatrixXd table = layer_table(1, spread, policy, MarkMode::RiskFree, nullptr);
    if (dump) dump->push_back(table);
    *mode = MarkMode::Next;
    return table;
  }
  const MarkMode leaf = config_.closeout.leaf == LeafRule::Zero ? MarkMode::Zero
                                                                : MarkMode::RiskFree;
  if (rank == 1) {
    *mode = leaf;
    return std::nullopt;
  }
  Eigen::MatrixXd chain = layer_table(rank - 1, spread, policy, leaf, nullptr);
  if (dump) dump->push_back(chain);
  for (int layer = rank - 2; layer >= 1; --layer) {
    Eigen::MatrixXd upper = layer_table(layer, spread, policy, MarkMode::Next, &chain);
    if (dump) dump->push_back(upper);
    chain = std::move(upper);
  }
  *mode = MarkMode::Next;
  return chain;
}

double BilateralPricer::evaluate(double spread, const SettlementPolicy& policy,
                                 bool passthrough_root,
                                 std::vector<Eigen::MatrixXd>* dump) const {
  policy.validate();
  MarkMode mode;
  const auto next = root_marks(spread, policy, &mode, dump);
  return node_value(root_, 0, spread, policy, mode, next ? &*next : nullptr,
                    passthrough_root);
}

double BilateralPricer::price(double spread, const SettlementPolicy& policy) const {
  return evaluate(spread, policy, false, nullptr);
}

double BilateralPricer::first_default_free_price(double spread,
                                                 const SettlementPolicy& policy) const {
  return evaluate(spread, policy, true, nullptr);
}

double BilateralPricer::riskfree_value(double spread) const {
  return root_.riskfree.value(0, env_index(0, 0, 0, 0), spread, contract_.recovery);
}

double BilateralPricer::riskfree_par() const {
  return root_.riskfree.par_spread(0, env_index(0, 0, 0, 0), contract_.recovery);
}

std::vector<Eigen::MatrixXd> BilateralPricer::layer_values(
    double spread, const SettlementPolicy& policy) const {
  std::vector<Eigen::MatrixXd> dump;
  MarkMode mode;
  root_marks(spread, policy, &mode, &dump);
  return dump;
}

double BilateralPricer::cva_direct(double spread, const SettlementPolicy& policy) const {
  policy.validate();
  MarkMode mode;
  const auto next = root_marks(spread, policy, &mode, nullptr);
  const EventTable& ev = root_.events;
  const int steps = grid_.steps();
  double acc = 0.0;
  for (int rp = 0; rp < steps; ++rp) {
    const int absolute = rp + 1;
    const Eigen::VectorXd& cpty = ev.counterparty_first[rp];
    const Eigen::VectorXd& inv = ev.investor_first[rp];
    for (int d = 0; d <= root_.episode.pool_size; ++d) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const int bucket = ev.bucket_index(d, a, b);
          const double mc = cpty[bucket];
          if (mc > 0.0) {
            const double full = root_.riskfree.value(absolute, env_index(d, a, 1, b),
                                                     spread, contract_.recovery);
            const double mark = counterparty_mark(root_, mode, next ? &*next : nullptr,
                                                  rp, absolute, d, a, b, spread);
            acc += mc * (full - policy.on_counterparty_default(mark));
          }
          const double mi = inv[bucket];
          if (mi > 0.0) {
            const double mark = investor_mark(root_, absolute, d, a, b, spread);
            acc += mi * (mark - policy.on_investor_default(mark));
          }
        }
      }
    }
  }
  return acc;
}

double BilateralPricer::par_spread(const SettlementPolicy& policy) const {
  PricingReport rep = report(policy);
  return rep.par_spread;
}

PricingReport BilateralPricer::report(const SettlementPolicy& policy) const {
  policy.validate();
  PricingReport rep;
  rep.convention = config_.convention;
  rep.closeout = config_.closeout;
  rep.policy = policy;
  rep.riskfree_par = riskfree_par();

  const double tol = price_tolerance();
  double lo = 0.0;
  double hi = 10.0;
  double flo = price(lo, policy);
  rep.evaluations.emplace_back(lo, flo);
  if (std::abs(flo) <= tol) {
    rep.par_spread = lo;
    rep.residual = flo;
    rep.cva = riskfree_value(lo);
    rep.iterations = 1;
    return rep;
  }
  if (flo < 0.0) {
    throw std::runtime_error("bilateral price is negative at zero spread; samples:" +
                             format_curve(rep.evaluations));
  }
  double fhi = price(hi, policy);
  rep.evaluations.emplace_back(hi, fhi);
  if (fhi > tol) {
    throw std::runtime_error("bilateral price has no root below spread 10; samples:" +
                             format_curve(rep.evaluations));
  }

  for (int it = 1; it <= 200; ++it) {
    double x = hi - fhi * (hi - lo) / (fhi - flo);
    if (!(x > lo && x < hi) || it % 4 == 0) x = 0.5 * (lo + hi);
    const double fx = price(x, policy);
    rep.evaluations.emplace_back(x, fx);
    if (std::abs(fx) <= tol) {
      rep.par_spread = x;
      rep.residual = fx;
      rep.cva = riskfree_value(x);
      rep.iterations = it;
      return rep;
    }
    if (fx > flo + 1e-12 || fx < fhi - 1e-12) {
      throw std::runtime_error("bilateral price is not decreasing in the spread; samples:" +
                               format_curve(rep.evaluations));
    }
    if (fx > 0.0) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
      fhi = fx;
    }
  }
  throw std::runtime_error("par spread search did not converge; samples:" +
                           format_curve(rep.evaluations));
}

double price_bilateral(const ModelSpec& model, const ContractSpec& contract,
                       const TenorGrid& grid, const EngineConfig& config,
                       const SettlementPolicy& policy) {
  return BilateralPricer(model, contract, grid, config).price(contract.spread, policy);
}

double par_spread_bilateral(const ModelSpec& model, const ContractSpec& contract,
                            const TenorGrid& grid, const EngineConfig& config,
                            const SettlementPolicy& policy) {
  return BilateralPricer(model, contract, grid, config).par_spread(policy);
}

PricingReport cva_report(const ModelSpec& model, const ContractSpec& contract,
                         const TenorGrid& grid, const EngineConfig& config,
                         const SettlementPolicy& policy) {
  return BilateralPricer(model, contract, grid, config).report(policy);
}

}  // namespace ccr
