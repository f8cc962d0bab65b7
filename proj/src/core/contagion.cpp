#include "core/contagion.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace ccr {

namespace {

double gamma_at(const std::vector<double>& g, int level) {
  const int last = static_cast<int>(g.size()) - 1;
  return g[std::clamp(level, 0, last)];
}

void check_intensity_table(const std::vector<double>& g, int required) {
  if (static_cast<int>(g.size()) < required) {
    std::ostringstream msg;
    msg << "intensity table has " << g.size() << " entries, need at least "
        << required;
    throw std::invalid_argument(msg.str());
  }
  for (double v : g) {
    if (!(v > 0.0)) throw std::invalid_argument("intensity table entries must be positive");
  }
}

void check_multiplier(double v, const char* name) {
  if (!(v > 0.0)) {
    throw std::invalid_argument(std::string(name) + " multiplier must be positive");
  }
}

}  // namespace

int chain_dim(int m) { return 8 * (m + 1); }

int chain_index(const ChainState& s) {
  return ((s.pool * 2 + s.investor) * 2 + s.counterparty) * 2 + s.reference;
}

ChainState chain_state(int index) {
  ChainState s;
  s.reference = index & 1;
  s.counterparty = (index >> 1) & 1;
  s.investor = (index >> 2) & 1;
  s.pool = index >> 3;
  return s;
}

std::string chain_label(const ChainState& s) {
  std::ostringstream os;
  os << s.pool << ':' << s.investor << ':' << s.counterparty << ':' << s.reference;
  return os.str();
}

void GeneratorSpec::validate() const {
  if (m < 1) throw std::invalid_argument("pool size m must be at least 1");
  check_multiplier(mult_investor, "investor");
  check_multiplier(mult_counterparty, "counterparty");
  check_multiplier(mult_reference, "reference");
  if (!(contagion_factor > 0.0)) {
    throw std::invalid_argument("contagion factor must be positive");
  }
  check_intensity_table(base_intensity, m + 3);
}

std::vector<double> intensity_ladder(double level0, double factor, int count) {
  if (!(level0 > 0.0)) throw std::invalid_argument("base intensity must be positive");
  if (!(factor > 0.0)) throw std::invalid_argument("contagion factor must be positive");
  if (count < 1) throw std::invalid_argument("ladder length must be positive");
  std::vector<double> g(count);
  g[0] = level0;
  for (int l = 1; l < count; ++l) g[l] = g[l - 1] * factor;
  return g;
}

double direct_base_intensity(double survival_1y) {
  if (!(survival_1y > 0.0 && survival_1y < 1.0)) {
    throw std::invalid_argument("survival probability must lie in (0,1)");
  }
  return -std::log(survival_1y);
}

RateMatrix build_generator(const GeneratorSpec& spec) {
  spec.validate();
  const int m = spec.m;
  const int dim = chain_dim(m);
  RateMatrix A = RateMatrix::Zero(dim, dim);
  for (int idx = 0; idx < dim; ++idx) {
    const ChainState s = chain_state(idx);
    const int l = s.total();
    const double g = gamma_at(spec.base_intensity, l);
    if (s.pool < m) {
      ChainState t = s;
      ++t.pool;
      A(idx, chain_index(t)) += (m - s.pool) * g;
    }
    if (s.investor == 0) {
      ChainState t = s;
      t.investor = 1;
      A(idx, chain_index(t)) += spec.mult_investor * g;
    }
    if (s.counterparty == 0) {
      ChainState t = s;
      t.counterparty = 1;
      A(idx, chain_index(t)) += spec.mult_counterparty * g;
    }
    if (s.reference == 0) {
      ChainState t = s;
      t.reference = 1;
      A(idx, chain_index(t)) += spec.mult_reference * g;
    }
    A(idx, idx) = -A.row(idx).sum();
  }
  return A;
}

RateMatrix build_counting_generator(const GeneratorSpec& spec) {
  spec.validate();
  if (spec.mult_investor != 1.0 || spec.mult_counterparty != 1.0 ||
      spec.mult_reference != 1.0) {
    throw std::invalid_argument(
        "counting chain requires unit multipliers: the total count is Markov "
        "only in the homogeneous case");
  }
  const int m = spec.m;
  const int dim = m + 4;  // l = 0..m+3
  RateMatrix A = RateMatrix::Zero(dim, dim);
  for (int l = 0; l < m + 3; ++l) {
    const double rate = (m + 3 - l) * gamma_at(spec.base_intensity, l);
    A(l, l + 1) = rate;
    A(l, l) = -rate;
  }
  return A;
}

double pool_survival_one_year(const GeneratorSpec& spec) {
  const RateMatrix A = build_generator(spec);
  const Eigen::MatrixXd K = step_kernel(A, 1.0);
  const int start = chain_index(ChainState{});
  double surv = 0.0;
  for (int idx = 0; idx < K.cols(); ++idx) {
    const ChainState s = chain_state(idx);
    surv += K(start, idx) * static_cast<double>(spec.m - s.pool) / spec.m;
  }
  return surv;
}

double implied_base_intensity(double survival_1y, int m, double factor,
                              double mult_investor, double mult_counterparty,
                              double mult_reference) {
  if (!(survival_1y > 0.0 && survival_1y < 1.0)) {
    throw std::invalid_argument("survival probability must lie in (0,1)");
  }
  GeneratorSpec spec;
  spec.m = m;
  spec.mult_investor = mult_investor;
  spec.mult_counterparty = mult_counterparty;
  spec.mult_reference = mult_reference;
  spec.contagion_factor = factor;
  auto survival = [&](double g0) {
    spec.base_intensity = intensity_ladder(g0, factor, m + 3);
    return pool_survival_one_year(spec);
  };
  double lo = 1e-10;
  double hi = 1.0;
  while (survival(hi) > survival_1y) {
    hi *= 2.0;
    if (hi > 1e3) throw std::runtime_error("implied intensity bracket failed");
  }
  // survival is strictly decreasing in the base intensity
  for (int it = 0; it < 200 && (hi - lo) > 1e-15 * std::max(1.0, lo); ++it) {
    const double mid = 0.5 * (lo + hi);
    (survival(mid) > survival_1y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void ModelSpec::validate() const {
  if (m < 1) throw std::invalid_argument("pool size must be positive");
  if (intensity_table.empty() && !(survival_1y > 0.0 && survival_1y < 1.0)) {
    throw std::invalid_argument("survival probability must lie in (0,1)");
  }
  if (!(contagion_factor > 0.0)) {
    throw std::invalid_argument("contagion factor must be positive");
  }
  if (!(mult_investor > 0.0 && mult_counterparty > 0.0 && mult_reference > 0.0)) {
    throw std::invalid_argument("intensity multipliers must be positive");
  }
  if (initial_defaults < 0 || initial_defaults > m) {
    throw std::invalid_argument("initial defaults out of range");
  }
  for (double g : intensity_table) {
    if (!(g > 0.0)) throw std::invalid_argument("intensity table entries must be positive");
  }
}

std::vector<double> resolve_intensities(const ModelSpec& model, int length) {
  model.validate();
  if (length < 1) throw std::invalid_argument("intensity table length must be positive");
  if (!model.intensity_table.empty()) {
    std::vector<double> g = model.intensity_table;
    while (static_cast<int>(g.size()) < length) g.push_back(g.back());
    return g;
  }
  double g0;
  if (model.calibration == CalibrationMode::Direct) {
    g0 = direct_base_intensity(model.survival_1y);
  } else {
    g0 = implied_base_intensity(model.survival_1y, model.m, model.contagion_factor,
                                model.mult_investor, model.mult_counterparty,
                                model.mult_reference);
  }
  return intensity_ladder(g0, model.contagion_factor, length);
}

GeneratorSpec generator_spec(const ModelSpec& model) {
  GeneratorSpec spec;
  spec.m = model.m;
  spec.contagion_factor = model.contagion_factor;
  spec.mult_investor = model.mult_investor;
  spec.mult_counterparty = model.mult_counterparty;
  spec.mult_reference = model.mult_reference;
  spec.base_intensity = resolve_intensities(model, model.m + 3);
  return spec;
}

const char* convention_label(Convention c) {
  switch (c) {
    case Convention::A: return "a";
    case Convention::APrime: return "a_prime";
    case Convention::B: return "b";
    case Convention::C: return "c";
    case Convention::CPrime: return "c_prime";
  }
  return "?";
}

Convention parse_convention(const std::string& s) {
  std::string t;
  for (char ch : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (t == "a") return Convention::A;
  if (t == "a_prime" || t == "a'" || t == "aprime") return Convention::APrime;
  if (t == "b") return Convention::B;
  if (t == "c") return Convention::C;
  if (t == "c_prime" || t == "c'" || t == "cprime") return Convention::CPrime;
  throw std::invalid_argument("unknown close-out convention: " + s);
}

int ext_chain_dim(int m, int rank) { return 8 * (m + 1) * rank; }

int ext_chain_index(int i, int k, int j1, int j2, int j3, int rank) {
  return (((i * rank + k) * 2 + j1) * 2 + j2) * 2 + j3;
}

RateMatrix build_extended_generator(const GeneratorSpec& spec, int rank,
                                    Convention convention, int initial_count) {
  spec.validate();
  if (convention == Convention::A || convention == Convention::APrime) {
    throw std::invalid_argument(
        "replacement counterparties carry no default risk under default-free "
        "close-out conventions; no extended chain exists");
  }
  if (rank < 2) throw std::invalid_argument("extended chain needs rank at least 2");
  if (initial_count < 0 || initial_count > spec.m) {
    throw std::invalid_argument("initial count out of range");
  }
  check_intensity_table(spec.base_intensity, spec.m + rank + 2);
  const int m = spec.m;
  const int dim = ext_chain_dim(m, rank);
  RateMatrix A = RateMatrix::Zero(dim, dim);
  const auto& g = spec.base_intensity;
  for (int i = 0; i <= m; ++i) {
    for (int k = 0; k < rank; ++k) {
      for (int j1 = 0; j1 <= 1; ++j1) {
        for (int j2 = 0; j2 <= 1; ++j2) {
          for (int j3 = 0; j3 <= 1; ++j3) {
            const int from = ext_chain_index(i, k, j1, j2, j3, rank);
            const int l = i + k + j1 + j2 + j3;
            if (i < m) {
              A(from, ext_chain_index(i + 1, k, j1, j2, j3, rank)) +=
                  (m - i) * gamma_at(g, l);
            }
            if (j3 == 0) {
              A(from, ext_chain_index(i, k, j1, j2, 1, rank)) +=
                  spec.mult_reference * gamma_at(g, l);
            }
            if (j1 == 0) {
              const int lvl = (j2 == 1 && convention == Convention::CPrime) ? i : l;
              A(from, ext_chain_index(i, k, 1, j2, j3, rank)) +=
                  spec.mult_investor * gamma_at(g, lvl);
            }
            if (j2 == 0) {
              A(from, ext_chain_index(i, k, j1, 1, j3, rank)) +=
                  spec.mult_counterparty * gamma_at(g, l);
            } else if (k < rank - 1) {
              const int lvl = (convention == Convention::B) ? initial_count : i;
              A(from, ext_chain_index(i, k + 1, j1, 1, j3, rank)) +=
                  spec.mult_counterparty * gamma_at(g, lvl);
            }
            A(from, from) = -A.row(from).sum();
          }
        }
      }
    }
  }
  return A;
}

Eigen::MatrixXd step_kernel(const RateMatrix& generator, double dt) {
  if (generator.rows() != generator.cols()) {
    throw std::invalid_argument("generator must be square");
  }
  if (!(dt >= 0.0)) throw std::invalid_argument("step length must be nonnegative");
  if (dt == 0.0) return Eigen::MatrixXd::Identity(generator.rows(), generator.cols());
  Eigen::MatrixXd K = (generator * dt).exp();
  if (!K.allFinite()) {
    std::ostringstream msg;
    msg << "matrix exponential overflow: max |rate|*dt = "
        << generator.cwiseAbs().maxCoeff() * dt;
    throw std::runtime_error(msg.str());
  }
  for (Eigen::Index r = 0; r < K.rows(); ++r) {
    double sum = K.row(r).sum();
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg << "step kernel row " << r << " sums to " << sum;
      throw std::runtime_error(msg.str());
    }
    for (Eigen::Index c = 0; c < K.cols(); ++c) {
      if (K(r, c) < 0.0) {
        if (K(r, c) < -1e-10) throw std::runtime_error("step kernel entry below -1e-10");
        K(r, c) = 0.0;
      } else if (K(r, c) > 1.0) {
        K(r, c) = 1.0;
      }
    }
    K.row(r) /= K.row(r).sum();
  }
  return K;
}

std::vector<Eigen::MatrixXd> step_kernels(const RateMatrix& generator,
                                          const std::vector<double>& times) {
  if (times.size() < 2) throw std::invalid_argument("grid needs at least two dates");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw std::invalid_argument("grid dates must be strictly increasing");
    }
  }
  std::vector<Eigen::MatrixXd> kernels;
  kernels.reserve(times.size() - 1);
  std::vector<std::pair<double, std::size_t>> seen;  // dt -> index into kernels
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    auto match = std::find_if(seen.begin(), seen.end(), [dt](const auto& p) {
      return std::abs(p.first - dt) <= 1e-12;
    });
    if (match != seen.end()) {
      kernels.push_back(kernels[match->second]);
    } else {
      kernels.push_back(step_kernel(generator, dt));
      seen.emplace_back(dt, kernels.size() - 1);
    }
  }
  return kernels;
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& matrix) {
  const Eigen::Index dim = matrix.rows();
  const bool labelled = dim % 8 == 0 && dim > 0;
  auto label = [&](Eigen::Index idx) {
    if (labelled) return chain_label(chain_state(static_cast<int>(idx)));
    return std::to_string(idx);
  };
  os << "state";
  for (Eigen::Index c = 0; c < matrix.cols(); ++c) os << ',' << label(c);
  os << '\n';
  for (Eigen::Index r = 0; r < dim; ++r) {
    os << label(r);
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) os << ',' << matrix(r, c);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Episode environments and first-to-default tables
// ---------------------------------------------------------------------------

void EpisodeSpec::validate() const {
  if (pool_size < 0) throw std::invalid_argument("pool size must be nonnegative");
  if (base_count < 0) throw std::invalid_argument("base count must be nonnegative");
  for (const PartyDynamics* p : {&investor, &counterparty, &reference}) {
    if (p->present && !(p->multiplier > 0.0)) {
      throw std::invalid_argument("party multiplier must be positive");
    }
  }
}

int env_index(int pool_defaults, int inv, int cpty, int ref) {
  return ((pool_defaults * 2 + inv) * 2 + cpty) * 2 + ref;
}

int required_table_length(const EpisodeSpec& ep) {
  int max_offset = 0;
  int max_frozen = -1;
  for (const PartyDynamics* p : {&ep.investor, &ep.counterparty, &ep.reference}) {
    if (!p->present) continue;
    max_offset = std::max(max_offset, p->level_offset);
    max_frozen = std::max(max_frozen, p->frozen_level);
  }
  const int max_running = ep.base_count + ep.pool_size + 2 + max_offset;
  return std::max(max_running, max_frozen) + 1;
}

namespace {

double party_rate(const PartyDynamics& p, const std::vector<double>& gamma,
                  int running_count) {
  const int level = p.frozen_level >= 0 ? p.frozen_level : running_count + p.level_offset;
  return p.multiplier * gamma_at(gamma, level);
}

// Augmented chain for the first-to-default decomposition: an "alive" block
// indexed by new pool defaults d, plus one block per named party that is
// entered the instant that party defaults first.  Inside a block the
// remaining two parties and the pool keep evolving under the true episode
// dynamics, so reading the block mass at the end of an interval gives the
// exact joint law of (who defaulted first, environment at the right
// endpoint).
struct FirstPassageLayout {
  int pool_size;
  int alive_size() const { return pool_size + 1; }
  int block_size() const { return 4 * (pool_size + 1); }
  int dim() const { return alive_size() + 3 * block_size(); }
  int alive(int d) const { return d; }
  // block: 0 = investor defaulted first, 1 = counterparty, 2 = reference
  int bucket(int block, int d, int a, int b) const {
    return alive_size() + block * block_size() + (d * 2 + a) * 2 + b;
  }
};

RateMatrix build_first_passage_generator(const EpisodeSpec& ep,
                                         const std::vector<double>& gamma) {
  const FirstPassageLayout lay{ep.pool_size};
  const int s = ep.pool_size;
  RateMatrix A = RateMatrix::Zero(lay.dim(), lay.dim());
  for (int d = 0; d <= s; ++d) {
    const int from = lay.alive(d);
    const int c = ep.base_count + d;
    if (d < s) A(from, lay.alive(d + 1)) += (s - d) * gamma_at(gamma, c);
    if (ep.investor.present) A(from, lay.bucket(0, d, 0, 0)) += party_rate(ep.investor, gamma, c);
    if (ep.counterparty.present) A(from, lay.bucket(1, d, 0, 0)) += party_rate(ep.counterparty, gamma, c);
    if (ep.reference.present) A(from, lay.bucket(2, d, 0, 0)) += party_rate(ep.reference, gamma, c);
    A(from, from) = -A.row(from).sum();
  }
  const PartyDynamics* defaulter[3] = {&ep.investor, &ep.counterparty, &ep.reference};
  const PartyDynamics* first[3] = {&ep.counterparty, &ep.investor, &ep.investor};
  const PartyDynamics* second[3] = {&ep.reference, &ep.reference, &ep.counterparty};
  for (int blk = 0; blk < 3; ++blk) {
    for (int d = 0; d <= s; ++d) {
      for (int a = 0; a <= 1; ++a) {
        for (int b = 0; b <= 1; ++b) {
          const int from = lay.bucket(blk, d, a, b);
          const int c = ep.base_count + d + (defaulter[blk]->contagious ? 1 : 0) +
                        (first[blk]->contagious ? a : 0) +
                        (second[blk]->contagious ? b : 0);
          if (d < s) A(from, lay.bucket(blk, d + 1, a, b)) += (s - d) * gamma_at(gamma, c);
          if (a == 0 && first[blk]->present) {
            A(from, lay.bucket(blk, d, 1, b)) += party_rate(*first[blk], gamma, c);
          }
          if (b == 0 && second[blk]->present) {
            A(from, lay.bucket(blk, d, a, 1)) += party_rate(*second[blk], gamma, c);
          }
          A(from, from) = -A.row(from).sum();
        }
      }
    }
  }
  return A;
}

}  // namespace

double level_intensity(const std::vector<double>& gamma, int level) {
  return gamma_at(gamma, level);
}

double party_intensity(const PartyDynamics& party,
                       const std::vector<double>& gamma, int running_count) {
  return party_rate(party, gamma, running_count);
}

RateMatrix build_environment_generator(const EpisodeSpec& ep,
                                       const std::vector<double>& gamma) {
  ep.validate();
  check_intensity_table(gamma, required_table_length(ep));
  const int s = ep.pool_size;
  RateMatrix A = RateMatrix::Zero(ep.dim(), ep.dim());
  for (int d = 0; d <= s; ++d) {
    for (int ji = 0; ji <= 1; ++ji) {
      for (int jc = 0; jc <= 1; ++jc) {
        for (int jr = 0; jr <= 1; ++jr) {
          const int from = env_index(d, ji, jc, jr);
          const int c = ep.base_count + d + (ep.investor.contagious ? ji : 0) +
                        (ep.counterparty.contagious ? jc : 0) +
                        (ep.reference.contagious ? jr : 0);
          if (d < s) A(from, env_index(d + 1, ji, jc, jr)) += (s - d) * gamma_at(gamma, c);
          if (ji == 0 && ep.investor.present) {
            A(from, env_index(d, 1, jc, jr)) += party_rate(ep.investor, gamma, c);
          }
          if (jc == 0 && ep.counterparty.present) {
            A(from, env_index(d, ji, 1, jr)) += party_rate(ep.counterparty, gamma, c);
          }
          if (jr == 0 && ep.reference.present) {
            A(from, env_index(d, ji, jc, 1)) += party_rate(ep.reference, gamma, c);
          }
          A(from, from) = -A.row(from).sum();
        }
      }
    }
  }
  return A;
}

int EventTable::count_after_investor_default(int d, int jc, int jr) const {
  return episode.base_count + d + (episode.investor.contagious ? 1 : 0) +
         (episode.counterparty.contagious ? jc : 0) +
         (episode.reference.contagious ? jr : 0);
}

int EventTable::count_after_counterparty_default(int d, int ji, int jr) const {
  return episode.base_count + d + (episode.counterparty.contagious ? 1 : 0) +
         (episode.investor.contagious ? ji : 0) +
         (episode.reference.contagious ? jr : 0);
}

int EventTable::count_after_reference_default(int d, int ji, int jc) const {
  return episode.base_count + d + (episode.reference.contagious ? 1 : 0) +
         (episode.investor.contagious ? ji : 0) +
         (episode.counterparty.contagious ? jc : 0);
}

namespace {

Eigen::VectorXd by_count(const EventTable& tab, const Eigen::VectorXd& buckets,
                         int (EventTable::*counter)(int, int, int) const) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(tab.episode.base_count +
                                              tab.episode.pool_size + 4);
  for (int d = 0; d <= tab.episode.pool_size; ++d) {
    for (int a = 0; a <= 1; ++a) {
      for (int b = 0; b <= 1; ++b) {
        out[(tab.*counter)(d, a, b)] += buckets[tab.bucket_index(d, a, b)];
      }
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXd EventTable::investor_first_by_count(int interval) const {
  return by_count(*this, investor_first.at(interval),
                  &EventTable::count_after_investor_default);
}

Eigen::VectorXd EventTable::counterparty_first_by_count(int interval) const {
  return by_count(*this, counterparty_first.at(interval),
                  &EventTable::count_after_counterparty_default);
}

Eigen::VectorXd EventTable::reference_first_by_count(int interval) const {
  return by_count(*this, reference_buckets.at(interval),
                  &EventTable::count_after_reference_default);
}

double EventTable::total_mass() const {
  double total = alive.back();
  for (int r = 0; r < steps; ++r) {
    total += investor_first[r].sum() + counterparty_first[r].sum() +
             reference_buckets[r].sum();
  }
  return total;
}

EventTable event_probabilities(const EpisodeSpec& ep,
                               const std::vector<double>& gamma, int steps,
                               double dt) {
  ep.validate();
  if (steps < 1) throw std::invalid_argument("grid needs at least one interval");
  if (!(dt > 0.0)) throw std::invalid_argument("interval length must be positive");
  check_intensity_table(gamma, required_table_length(ep));
  const FirstPassageLayout lay{ep.pool_size};
  const RateMatrix A = build_first_passage_generator(ep, gamma);
  const Eigen::MatrixXd K = step_kernel(A, dt);

  EventTable tab;
  tab.episode = ep;
  tab.steps = steps;
  tab.dt = dt;
  tab.alive.assign(steps + 1, 0.0);
  tab.reference_first.assign(steps, 0.0);
  tab.investor_first.resize(steps);
  tab.counterparty_first.resize(steps);
  tab.reference_buckets.resize(steps);

  Eigen::RowVectorXd rho = Eigen::RowVectorXd::Zero(lay.dim());
  rho[lay.alive(0)] = 1.0;
  for (int r = 0; r < steps; ++r) {
    tab.alive[r] = rho.head(lay.alive_size()).sum();
    const Eigen::RowVectorXd next = rho * K;
    tab.investor_first[r] = next.segment(lay.bucket(0, 0, 0, 0), lay.block_size());
    tab.counterparty_first[r] = next.segment(lay.bucket(1, 0, 0, 0), lay.block_size());
    tab.reference_buckets[r] = next.segment(lay.bucket(2, 0, 0, 0), lay.block_size());
    tab.reference_first[r] = tab.reference_buckets[r].sum();
    rho.setZero();
    rho.head(lay.alive_size()) = next.head(lay.alive_size());
  }
  tab.alive[steps] = rho.head(lay.alive_size()).sum();
  return tab;
}

}  // namespace ccr
