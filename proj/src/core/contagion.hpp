#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ccr {

// ---------------------------------------------------------------------------
// Default-contagion Markov chain.
//
// The base chain tracks (j0, j1, j2, j3): the number of defaulted firms in a
// homogeneous systemic pool of size m, plus default indicators for the
// investor, the counterparty and the reference entity.  Each name defaults
// with intensity proportional to a common per-firm level gamma(l) that
// escalates with the total default count l = j0 + j1 + j2 + j3.  That
// escalation is the only coupling channel in the model, and the source of
// wrong-way risk: a counterparty default raises everyone else's intensity.
// ---------------------------------------------------------------------------

struct ChainState {
  int pool = 0;          // defaulted systemic firms, 0..m
  int investor = 0;      // 0 or 1
  int counterparty = 0;  // 0 or 1
  int reference = 0;     // 0 or 1
  int total() const { return pool + investor + counterparty + reference; }
};

int chain_dim(int m);                      // 8*(m+1)
int chain_index(const ChainState& s);
ChainState chain_state(int index);
std::string chain_label(const ChainState& s);  // "j0:j1:j2:j3"

struct GeneratorSpec {
  int m = 10;                            // systemic pool size
  std::vector<double> base_intensity;    // gamma(l), l = 0..(at least m+2), 1/years
  double mult_investor = 1.0;            // investor intensity / pool-firm intensity
  double mult_counterparty = 1.0;
  double mult_reference = 1.0;
  double contagion_factor = 1.5;         // gamma(l+1)/gamma(l) when the table is generated

  void validate() const;                 // throws std::invalid_argument
};

using RateMatrix = Eigen::MatrixXd;

// gamma(l) = level0 * factor^l for l = 0..count-1.
std::vector<double> intensity_ladder(double level0, double factor, int count);

// gamma(0) read off a one-year survival probability as a single exponential
// clock: gamma(0) = -ln(p).
double direct_base_intensity(double survival_1y);

// One-year survival probability of a single pool firm implied by the full
// chain started all-alive: E[(m - j0(1y)) / m].  Includes the contagion
// feedback from every other name, so it is below exp(-gamma(0)).
double pool_survival_one_year(const GeneratorSpec& spec);

// gamma(0) solved so that pool_survival_one_year equals p.  This is the
// self-consistent counterpart of direct_base_intensity: the quoted survival
// probability is honoured by the model itself rather than by an isolated
// exponential clock.
double implied_base_intensity(double survival_1y, int m, double factor,
                              double mult_investor, double mult_counterparty,
                              double mult_reference);

enum class CalibrationMode {
  Direct,   // gamma(0) = -ln(p)
  Implied,  // gamma(0) solved so the chain's own pool survival equals p
};

// User-facing model description.  The intensity table is derived from the
// quoted one-year survival probability through the selected calibration
// unless an explicit table is supplied.
struct ModelSpec {
  int m = 10;
  double survival_1y = 0.95;
  double contagion_factor = 1.5;
  CalibrationMode calibration = CalibrationMode::Implied;
  double mult_investor = 1.0;
  double mult_counterparty = 0.8;
  double mult_reference = 1.3;
  int initial_defaults = 0;             // pool defaults at inception
  std::vector<double> intensity_table;  // optional explicit gamma(l)
  bool systemic_replacements = false;   // replacement defaults feed the count

  void validate() const;
};

// gamma table of exactly the requested length: the calibrated geometric
// ladder, or the explicit table padded with its last level when it is too
// short for an extended count range.
std::vector<double> resolve_intensities(const ModelSpec& model, int length);

GeneratorSpec generator_spec(const ModelSpec& model);

// Full chain on (j0, j1, j2, j3), dimension 8*(m+1).  From a state with
// total count l < m+3: pool default at (m-j0)*gamma(l), investor flip at
// mult_investor*gamma(l), counterparty at mult_counterparty*gamma(l),
// reference at mult_reference*gamma(l).  States with l = m+3 are absorbing.
RateMatrix build_generator(const GeneratorSpec& spec);

// Chain of the total default count l on {0..m+3}, valid only when all
// multipliers are one (the homogeneous case, where l is itself Markov):
// bidiagonal with rate (m+3-l)*gamma(l).
RateMatrix build_counting_generator(const GeneratorSpec& spec);

// Close-out conventions: whose creditworthiness is assumed when the
// replacement value of the contract is computed at a default.
enum class Convention {
  A,       // both parties priced as default-free
  APrime,  // defaulting counterparty replaced by a default-free one, surviving party kept as is
  B,       // replacement counterparty pinned at the inception intensity level
  C,       // replacement counterparty tracks the count net of counterparty defaults
  CPrime,  // both replacement parties track the count net of counterparty defaults
};

const char* convention_label(Convention c);          // "a", "a_prime", ...
Convention parse_convention(const std::string& s);   // accepts labels and "a'"/"c'"

// Extended chain for systemic replacement counterparties: a basket of rank-1
// potential counterparties whose defaults feed the contagion count like any
// other name.  States (i, k, j1, j2, j3): i pool defaults, k basket defaults,
// then the three indicators; dimension 8*(m+1)*rank.  Only conventions B, C
// and CPrime are meaningful here (under A and APrime the replacement carries
// no default risk).  initial_count is the total count at contract inception,
// which convention B pins the basket intensity to.
RateMatrix build_extended_generator(const GeneratorSpec& spec, int rank,
                                    Convention convention, int initial_count = 0);

int ext_chain_dim(int m, int rank);
int ext_chain_index(int i, int k, int j1, int j2, int j3, int rank);

// Transition-probability matrix over one interval: exp(generator * dt), with
// rows renormalized to exact stochasticity after clamping roundoff negatives.
Eigen::MatrixXd step_kernel(const RateMatrix& generator, double dt);

// One kernel per interval of the grid {t_0 < t_1 < ... < t_M}; equal spacings
// share a single matrix exponential.
std::vector<Eigen::MatrixXd> step_kernels(const RateMatrix& generator,
                                          const std::vector<double>& times);

// CSV dump (row = from-state, column = to-state).  Matrices of dimension
// 8*(m+1) get "j0:j1:j2:j3" labels; anything else falls back to raw indices.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& matrix);

// ---------------------------------------------------------------------------
// Pricing episodes.
//
// Between two structural events (inception, or a default and the replacement
// that follows it) the relevant environment is a time-homogeneous chain of
// the same shape as the base model, but the three named parties may be
// absent, priced at a shifted or pinned intensity level, or excluded from the
// contagion count.  PartyDynamics captures those knobs; EpisodeSpec is one
// such environment.
// ---------------------------------------------------------------------------

struct PartyDynamics {
  bool present = true;      // absent parties never default
  double multiplier = 1.0;  // intensity relative to a pool firm
  int level_offset = 0;     // added to the running count before the gamma lookup
  int frozen_level = -1;    // >= 0 pins the gamma lookup to this level
  bool contagious = true;   // own default feeds back into the count

  static PartyDynamics absent() {
    PartyDynamics p;
    p.present = false;
    return p;
  }
};

struct EpisodeSpec {
  int pool_size = 0;   // systemic firms alive at episode start
  int base_count = 0;  // default count at episode start, as seen by gamma
  PartyDynamics investor;
  PartyDynamics counterparty;
  PartyDynamics reference;

  int dim() const { return 8 * (pool_size + 1); }
  void validate() const;
};

// State (d, j1, j2, j3) with d = new pool defaults since episode start.
int env_index(int pool_defaults, int inv, int cpty, int ref);

// Smallest intensity-table length covering every level the episode can query.
int required_table_length(const EpisodeSpec& ep);

// gamma at a count level, the last table entry extending past the end.
double level_intensity(const std::vector<double>& gamma, int level);

// A party's flip intensity at the given running count: multiplier times gamma
// at the party's own (offset or pinned) level.
double party_intensity(const PartyDynamics& party,
                       const std::vector<double>& gamma, int running_count);

// Chain of the episode environment, dimension 8*(pool_size+1).  The running
// count is base_count + d + contagious flipped indicators; each party's flip
// rate is multiplier * gamma at its own (offset or pinned) level.
RateMatrix build_environment_generator(const EpisodeSpec& ep,
                                       const std::vector<double>& gamma);

// ---------------------------------------------------------------------------
// First-to-default decomposition on a tenor grid.
//
// For each interval (t_x, t_{x+1}] and each named party: the joint
// probability that this party defaults first among the three, does so in the
// interval, and that the environment sits in a given bucket at t_{x+1}.
// A bucket is (d, a, b): new pool defaults plus the other two parties'
// indicators at the interval's right endpoint (they may flip after the
// defaulter, within the same interval).  Computed exactly on an augmented
// chain whose blocks record who defaulted first, so there is no
// interval-splitting error; total mass is conserved to machine precision.
// ---------------------------------------------------------------------------

struct EventTable {
  EpisodeSpec episode;
  int steps = 0;
  double dt = 0.0;

  std::vector<double> alive;            // [steps+1], no party default by t_x
  std::vector<double> reference_first;  // [steps], row sums of reference buckets

  // [steps] x (4*(pool_size+1)); bucket layout below.
  std::vector<Eigen::VectorXd> investor_first;      // buckets (d, cpty, ref)
  std::vector<Eigen::VectorXd> counterparty_first;  // buckets (d, inv, ref)
  std::vector<Eigen::VectorXd> reference_buckets;   // buckets (d, inv, cpty)

  int bucket_index(int d, int a, int b) const { return (d * 2 + a) * 2 + b; }
  int bucket_count() const { return 4 * (episode.pool_size + 1); }

  // Count right after an event, as seen by the intensity table: base + new
  // pool defaults + contagious flips, the defaulter included.
  int count_after_investor_default(int d, int jc, int jr) const;
  int count_after_counterparty_default(int d, int ji, int jr) const;
  int count_after_reference_default(int d, int ji, int jc) const;

  // Marginal over buckets at a fixed post-event count, index v = 0..max.
  Eigen::VectorXd investor_first_by_count(int interval) const;
  Eigen::VectorXd counterparty_first_by_count(int interval) const;
  Eigen::VectorXd reference_first_by_count(int interval) const;

  double total_mass() const;  // alive.back() + all event masses; must be 1
};

EventTable event_probabilities(const EpisodeSpec& ep,
                               const std::vector<double>& gamma, int steps,
                               double dt);

}  // namespace ccr
