#include "core/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

namespace ccr {

void SimConfig::validate() const {
  if (paths < 1) throw std::invalid_argument("paths must be at least 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("horizon must be positive and finite");
  }
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

const char* event_kind_label(EventKind kind) {
  switch (kind) {
    case EventKind::Pool: return "pool";
    case EventKind::Investor: return "investor";
    case EventKind::Counterparty: return "counterparty";
    case EventKind::Reference: return "reference";
  }
  return "?";
}

namespace {

// splitmix64: stream k of a seed keys one mt19937_64 per path, so a path's
// draws are a function of (seed, index) alone, whatever the thread schedule.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 path_rng(std::uint64_t seed, std::int64_t path) {
  return std::mt19937_64(
      mix64(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(path)));
}

// Runs body(i, rng) for every path index.  Work is handed out in fixed-size
// blocks; each body writes only to its own path's slot, so the results do not
// depend on the thread count.
template <class Fn>
void for_each_path(const SimConfig& config, Fn&& body) {
  const std::int64_t n = config.paths;
  const int workers = static_cast<int>(
      std::min<std::int64_t>(config.threads, n));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) {
      std::mt19937_64 rng = path_rng(config.seed, i);
      body(i, rng);
    }
    return;
  }
  std::atomic<std::int64_t> cursor{0};
  constexpr std::int64_t kBlock = 4096;
  auto run = [&]() {
    for (;;) {
      const std::int64_t lo = cursor.fetch_add(kBlock);
      if (lo >= n) return;
      const std::int64_t hi = std::min(n, lo + kBlock);
      for (std::int64_t i = lo; i < hi; ++i) {
        std::mt19937_64 rng = path_rng(config.seed, i);
        body(i, rng);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int k = 0; k < workers; ++k) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
}

struct EnvState {
  int d = 0;  // new pool defaults since episode start
  int inv = 0, cpty = 0, ref = 0;
};

int running_count(const EpisodeSpec& ep, const EnvState& s) {
  return ep.base_count + s.d + (ep.investor.contagious ? s.inv : 0) +
         (ep.counterparty.contagious ? s.cpty : 0) +
         (ep.reference.contagious ? s.ref : 0);
}

// One event of the competing-exponentials race, mirroring the environment
// generator's rates.  Returns false when every clock is silent or the event
// lands past the horizon; on true the state and time are advanced and `kind`
// names the event.
bool step(const EpisodeSpec& ep, const std::vector<double>& gamma,
          double horizon, std::mt19937_64& rng, EnvState& s, double& t,
          EventKind& kind) {
  const int c = running_count(ep, s);
  double rate[4] = {0.0, 0.0, 0.0, 0.0};
  if (s.d < ep.pool_size) rate[0] = (ep.pool_size - s.d) * level_intensity(gamma, c);
  if (s.inv == 0 && ep.investor.present) rate[1] = party_intensity(ep.investor, gamma, c);
  if (s.cpty == 0 && ep.counterparty.present) rate[2] = party_intensity(ep.counterparty, gamma, c);
  if (s.ref == 0 && ep.reference.present) rate[3] = party_intensity(ep.reference, gamma, c);
  const double total = rate[0] + rate[1] + rate[2] + rate[3];
  if (!(total > 0.0)) return false;
  t += std::exponential_distribution<double>(total)(rng);
  if (t > horizon) return false;
  // The last live clock absorbs roundoff at the top of the cumulative scan.
  int pick = 0;
  for (int k = 0; k < 4; ++k) {
    if (rate[k] > 0.0) pick = k;
  }
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (int k = 0; k < 4; ++k) {
    if (rate[k] <= 0.0) continue;
    u -= rate[k];
    if (u < 0.0) {
      pick = k;
      break;
    }
  }
  switch (pick) {
    case 0: ++s.d; kind = EventKind::Pool; break;
    case 1: s.inv = 1; kind = EventKind::Investor; break;
    case 2: s.cpty = 1; kind = EventKind::Counterparty; break;
    default: s.ref = 1; kind = EventKind::Reference; break;
  }
  return true;
}

void check_simulation_inputs(const EpisodeSpec& ep,
                             const std::vector<double>& gamma,
                             const SimConfig& config) {
  ep.validate();
  config.validate();
  if (gamma.empty()) throw std::invalid_argument("intensity table is empty");
  for (double g : gamma) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw std::invalid_argument("intensity table entries must be finite and nonnegative");
    }
  }
}

// Serial reduction in path order: bitwise reproducible for any thread count.
Estimate reduce(const std::vector<double>& payoff) {
  Estimate e;
  e.paths = static_cast<std::int64_t>(payoff.size());
  double sum = 0.0;
  for (double v : payoff) sum += v;
  e.value = sum / static_cast<double>(e.paths);
  if (e.paths > 1) {
    double ss = 0.0;
    for (double v : payoff) ss += (v - e.value) * (v - e.value);
    e.std_error = std::sqrt(ss / static_cast<double>(e.paths - 1) /
                            static_cast<double>(e.paths));
  }
  return e;
}

// Tenor index of the settlement date: the first grid date >= the event time.
int settlement_index(const std::vector<double>& dates, double time) {
  const auto it = std::lower_bound(dates.begin() + 1, dates.end(), time);
  return static_cast<int>(it - dates.begin());
}

struct PricingTables {
  EpisodeSpec episode;
  std::vector<double> gamma;
  RiskFreeTables marks;
};

PricingTables pricing_tables(const ModelSpec& model, const TenorGrid& grid) {
  PricingTables t;
  t.episode = inception_episode(model);
  t.gamma = resolve_intensities(model, required_table_length(t.episode));
  t.marks = riskfree_tables(build_environment_generator(t.episode, t.gamma), grid);
  return t;
}

}  // namespace

std::vector<PathRecord> simulate(const EpisodeSpec& episode,
                                 const std::vector<double>& gamma,
                                 const SimConfig& config) {
  check_simulation_inputs(episode, gamma, config);
  std::vector<PathRecord> out(static_cast<std::size_t>(config.paths));
  for_each_path(config, [&](std::int64_t i, std::mt19937_64& rng) {
    PathRecord rec;
    EnvState s;
    double t = 0.0;
    EventKind kind;
    while (step(episode, gamma, config.horizon, rng, s, t, kind)) {
      rec.push_back({t, kind});
    }
    out[static_cast<std::size_t>(i)] = std::move(rec);
  });
  return out;
}

void write_paths_csv(std::ostream& os, const std::vector<PathRecord>& paths) {
  os << "path,time,event\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (const PathEvent& e : paths[i]) {
      os << i << ',' << e.time << ',' << event_kind_label(e.kind) << '\n';
    }
  }
}

EventFrequencies event_frequencies(const std::vector<PathRecord>& paths,
                                   const TenorGrid& grid) {
  grid.validate();
  if (paths.empty()) throw std::invalid_argument("no paths to tally");
  const int steps = grid.steps();
  const std::vector<double>& dates = grid.dates;
  EventFrequencies f;
  f.paths = static_cast<std::int64_t>(paths.size());
  f.alive.assign(steps + 1, 0.0);
  f.investor_first.assign(steps, 0.0);
  f.counterparty_first.assign(steps, 0.0);
  f.reference_first.assign(steps, 0.0);
  for (const PathRecord& rec : paths) {
    double tau = std::numeric_limits<double>::infinity();
    EventKind first = EventKind::Pool;
    for (const PathEvent& e : rec) {
      if (e.kind != EventKind::Pool) {
        tau = e.time;
        first = e.kind;
        break;
      }
    }
    for (int x = 0; x <= steps; ++x) {
      if (dates[x] < tau) f.alive[x] += 1.0;
    }
    if (tau <= dates.back()) {
      const int interval = settlement_index(dates, tau) - 1;
      if (first == EventKind::Investor) f.investor_first[interval] += 1.0;
      if (first == EventKind::Counterparty) f.counterparty_first[interval] += 1.0;
      if (first == EventKind::Reference) f.reference_first[interval] += 1.0;
    }
  }
  const double n = static_cast<double>(f.paths);
  for (double& v : f.alive) v /= n;
  for (double& v : f.investor_first) v /= n;
  for (double& v : f.counterparty_first) v /= n;
  for (double& v : f.reference_first) v /= n;
  return f;
}

Estimate estimate_convention_a_price(const ModelSpec& model,
                                     const ContractSpec& contract,
                                     const TenorGrid& grid,
                                     const SettlementPolicy& policy,
                                     double spread, const SimConfig& config) {
  model.validate();
  contract.validate();
  grid.validate();
  policy.validate();
  config.validate();
  const PricingTables tables = pricing_tables(model, grid);
  const std::vector<double>& dates = grid.dates;
  const double maturity = dates.back();
  std::vector<double> payoff(static_cast<std::size_t>(config.paths));
  for_each_path(config, [&](std::int64_t i, std::mt19937_64& rng) {
    EnvState s;
    double t = 0.0;
    EventKind kind;
    double value = -spread * (maturity - dates.front());
    for (;;) {
      if (!step(tables.episode, tables.gamma, maturity, rng, s, t, kind)) break;
      if (kind == EventKind::Pool) continue;
      const EventKind first = kind;
      const int settle = settlement_index(dates, t);
      value = -spread * (dates[settle] - dates.front());
      if (first == EventKind::Reference) {
        value += 1.0 - contract.recovery;
        break;
      }
      // Let the environment run out the interval; the mark is struck on the
      // state at the settlement date, later same-interval defaults included.
      while (step(tables.episode, tables.gamma, dates[settle], rng, s, t, kind)) {
      }
      if (first == EventKind::Counterparty) {
        const double mark = tables.marks.value(
            settle, env_index(s.d, s.inv, 1, s.ref), spread, contract.recovery);
        value += policy.on_counterparty_default(mark);
      } else {
        const double mark = tables.marks.value(
            settle, env_index(s.d, 1, s.cpty, s.ref), spread, contract.recovery);
        value += policy.on_investor_default(mark);
      }
      break;
    }
    payoff[static_cast<std::size_t>(i)] = value;
  });
  return reduce(payoff);
}

Estimate estimate_riskfree_value(const ModelSpec& model,
                                 const ContractSpec& contract,
                                 const TenorGrid& grid, double spread,
                                 const SimConfig& config) {
  model.validate();
  contract.validate();
  grid.validate();
  config.validate();
  const EpisodeSpec episode = inception_episode(model);
  const std::vector<double> gamma =
      resolve_intensities(model, required_table_length(episode));
  const std::vector<double>& dates = grid.dates;
  const double maturity = dates.back();
  std::vector<double> payoff(static_cast<std::size_t>(config.paths));
  for_each_path(config, [&](std::int64_t i, std::mt19937_64& rng) {
    EnvState s;
    double t = 0.0;
    EventKind kind;
    double value = -spread * (maturity - dates.front());
    while (step(episode, gamma, maturity, rng, s, t, kind)) {
      if (kind != EventKind::Reference) continue;
      const int settle = settlement_index(dates, t);
      value = (1.0 - contract.recovery) - spread * (dates[settle] - dates.front());
      break;
    }
    payoff[static_cast<std::size_t>(i)] = value;
  });
  return reduce(payoff);
}

DependenceDiagnostic wrong_way_diagnostic(const ModelSpec& model,
                                          const ContractSpec& contract,
                                          const TenorGrid& grid,
                                          const SettlementPolicy& policy,
                                          double spread,
                                          const SimConfig& config) {
  model.validate();
  contract.validate();
  grid.validate();
  policy.validate();
  config.validate();
  const PricingTables tables = pricing_tables(model, grid);
  const std::vector<double>& dates = grid.dates;
  const double maturity = dates.back();
  const std::size_t n = static_cast<std::size_t>(config.paths);
  std::vector<double> loss(n, 0.0);
  std::vector<double> level(n, 0.0);
  std::vector<unsigned char> seen(n, 0);
  for_each_path(config, [&](std::int64_t i, std::mt19937_64& rng) {
    EnvState s;
    double t = 0.0;
    EventKind kind;
    for (;;) {
      const int pre = running_count(tables.episode, s);
      if (!step(tables.episode, tables.gamma, maturity, rng, s, t, kind)) return;
      if (kind == EventKind::Pool) continue;
      if (kind != EventKind::Counterparty) return;
      const int settle = settlement_index(dates, t);
      while (step(tables.episode, tables.gamma, dates[settle], rng, s, t, kind)) {
      }
      const double mark = tables.marks.value(
          settle, env_index(s.d, s.inv, 1, s.ref), spread, contract.recovery);
      // Marks come out of matrix exponentials, so an economically zero mark
      // carries roundoff; losses below it are zero, not loss-bearing.
      double shortfall = mark - policy.on_counterparty_default(mark);
      if (shortfall < 1e-12) shortfall = 0.0;
      const std::size_t slot = static_cast<std::size_t>(i);
      loss[slot] = shortfall;
      level[slot] = static_cast<double>(pre);
      seen[slot] = 1;
      return;
    }
  });
  DependenceDiagnostic diag;
  double sum_loss = 0.0, sum_level = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) continue;
    ++diag.defaults;
    if (loss[i] > 0.0) ++diag.loss_bearing;
    sum_loss += loss[i];
    sum_level += level[i];
  }
  if (diag.defaults >= 2) {
    const double nd = static_cast<double>(diag.defaults);
    const double mean_loss = sum_loss / nd;
    const double mean_level = sum_level / nd;
    double sum_z = 0.0, sum_zz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!seen[i]) continue;
      const double z = (loss[i] - mean_loss) * (level[i] - mean_level);
      sum_z += z;
      sum_zz += z * z;
    }
    diag.covariance = sum_z / (nd - 1.0);
    const double var_z = std::max(0.0, sum_zz / nd - (sum_z / nd) * (sum_z / nd));
    diag.std_error = std::sqrt(var_z / nd);
  }
  diag.sufficient = diag.loss_bearing >= DependenceDiagnostic::min_loss_samples();
  return diag;
}

}  // namespace ccr
