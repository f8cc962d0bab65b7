#include "core/settlement.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ccr {
namespace {

double pos(double x) { return x > 0 ? x : 0.0; }
double neg(double x) { return x < 0 ? -x : 0.0; }

void check01(double r, const char* name) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
}
void check_nonneg(double x, const char* name) {
  if (!(x >= 0.0)) throw std::invalid_argument(std::string(name) + " must be nonnegative");
}

}  // namespace

void SettlementTerms::validate() const {
  check01(r1, "r1");
  check01(r2, "r2");
  check_nonneg(c1, "c1");
  check_nonneg(c2, "c2");
  check_nonneg(u1, "u1");
  check_nonneg(u2, "u2");
}

void MarginTerms::validate() const {
  check_nonneg(threshold1, "threshold1");
  check_nonneg(threshold2, "threshold2");
  check_nonneg(min_transfer1, "min_transfer1");
  check_nonneg(min_transfer2, "min_transfer2");
  check_nonneg(haircut1, "haircut1");
  check_nonneg(haircut2, "haircut2");
  check_nonneg(margin_period, "margin_period");
}

double settle_uncollateralized(double M, const SettlementTerms& t, Party defaulter) {
  if (defaulter == Party::Counterparty) return t.r2 * pos(M) - neg(M);
  return pos(M) - t.r1 * neg(M);
}

double settle_collateralized(double M, const SettlementTerms& t, Party defaulter) {
  if (defaulter == Party::Counterparty) {
    if (M >= 0) return t.c2 + t.r2 * pos(M - t.c2) - neg(M - t.c2);
    return -(t.c1 + neg(M + t.c1) - t.r2 * pos(M + t.c1));
  }
  if (M >= 0) return t.c2 + pos(M - t.c2) - t.r1 * neg(M - t.c2);
  return -(t.c1 + t.r1 * neg(M + t.c1) - pos(M + t.c1));
}

double settle_lockup(double M, const SettlementTerms& t, Party defaulter) {
  const double V = t.net_lockup();
  if (defaulter == Party::Counterparty) {
    if (M >= 0) return t.c2 - V + t.r2 * pos(M - t.c2 + V) - neg(M - t.c2 + V);
    return -(t.c1 + V - t.r2 * pos(M + t.c1 + V) + neg(M + t.c1 + V));
  }
  if (M >= 0) return t.c2 - V + pos(M - t.c2 + V) - t.r1 * neg(M - t.c2 + V);
  return -(t.c1 + V - pos(M + t.c1 + V) + t.r1 * neg(M + t.c1 + V));
}

double settle_segregated(double M, const SettlementTerms& t, Party defaulter) {
  if (defaulter == Party::Counterparty) {
    if (M >= 0) return t.c2 + t.r2 * pos(M - t.c2) - neg(M - t.c2);
    return M;  // segregation shields the investor's posted margin
  }
  if (M >= 0) return M;
  return -(t.c1 + t.r1 * neg(M + t.c1) - pos(M + t.c1));
}

double settle_lockup_segregated(double M, const SettlementTerms& t, Party defaulter) {
  const double V = t.net_lockup();
  if (defaulter == Party::Counterparty) {
    if (M >= 0) return t.c2 - V + t.r2 * pos(M - t.c2 + V) - neg(M - t.c2 + V);
    return M;
  }
  if (M >= 0) return M;
  return -(t.c1 + V - pos(M + t.c1 + V) + t.r1 * neg(M + t.c1 + V));
}

double settle(double M, const SettlementTerms& t, Party defaulter) {
  switch (t.mode) {
    case MarginMode::Uncollateralized: return settle_uncollateralized(M, t, defaulter);
    case MarginMode::Collateral: return settle_collateralized(M, t, defaulter);
    case MarginMode::LockUp: return settle_lockup(M, t, defaulter);
    case MarginMode::Segregated: return settle_segregated(M, t, defaulter);
    case MarginMode::LockUpSegregated: return settle_lockup_segregated(M, t, defaulter);
  }
  throw std::logic_error("unreachable margin mode");
}

double exposure(double M, double C) { return M - C; }

double lgd_loss(double M, const SettlementTerms& t, LgdVariant variant) {
  switch (variant) {
    case LgdVariant::Uncollateralized:
      return (1.0 - t.r2) * pos(M);
    case LgdVariant::Collateralized:
      return (1.0 - t.r2) * (M >= 0 ? pos(M - t.c2) : pos(M + t.c1));
    case LgdVariant::Segregated:
      return M >= 0 ? (1.0 - t.r2) * pos(M - t.c2) : 0.0;
  }
  throw std::logic_error("unreachable lgd variant");
}

double lgd_gain(double M, const SettlementTerms& t, LgdVariant variant) {
  switch (variant) {
    case LgdVariant::Uncollateralized:
      return (1.0 - t.r1) * neg(M);
    case LgdVariant::Collateralized:
      return (1.0 - t.r1) * (M >= 0 ? neg(M - t.c2) : neg(M + t.c1));
    case LgdVariant::Segregated:
      return M < 0 ? (1.0 - t.r1) * neg(M + t.c1) : 0.0;
  }
  throw std::logic_error("unreachable lgd variant");
}

Collateralization classify_collateralization(double E, double M, Party side) {
  if (side == Party::Investor) {
    if (E > 0 && M > 0) return Collateralization::Under;
    if (E > 0 && M < 0) return Collateralization::Over;
    return Collateralization::Neither;
  }
  if (E > 0 && M < 0) return Collateralization::Under;
  if (E < 0 && M > 0) return Collateralization::Over;
  return Collateralization::Neither;
}

std::vector<double> collateral_path(const std::vector<double>& times,
                                    const std::vector<double>& exposures,
                                    const MarginTerms& margin,
                                    double first_default, Party side) {
  if (times.size() != exposures.size())
    throw std::invalid_argument("times and exposures must have equal length");
  if (times.empty()) return {};
  margin.validate();

  const bool inv = side == Party::Investor;
  const double floor = (inv ? margin.threshold1 : margin.threshold2) +
                       (inv ? margin.min_transfer1 : margin.min_transfer2);
  const double gross = 1.0 + (inv ? margin.haircut1 : margin.haircut2);

  auto exposure_at = [&](double t) {
    if (t <= times.front()) return exposures.front();
    if (t >= times.back()) return exposures.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    size_t i = static_cast<size_t>(it - times.begin());
    double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return exposures[i - 1] + w * (exposures[i] - exposures[i - 1]);
  };

  const double frozen = gross * pos(exposure_at(first_default) - floor);
  std::vector<double> out(times.size());
  for (size_t i = 0; i < times.size(); ++i) {
    double t = times[i];
    if (t <= first_default) {
      double c = pos(exposures[i] - floor);
      out[i] = margin.diversified ? gross * c : c;
    } else if (t <= first_default + margin.margin_period) {
      out[i] = frozen;
    } else {
      out[i] = 0.0;
    }
  }
  return out;
}

}  // namespace ccr
