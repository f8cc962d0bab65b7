#include "ccr.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <string>

#include "core/runner.hpp"
#include "version.hpp"

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& message) { t_last_error = message; }

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs `body`, translating exceptions into status codes and the per-thread
// error message.
template <typename Fn>
ccr_status guarded(Fn&& body) {
  try {
    return body();
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return CCR_ERROR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    set_error(e.what());
    return CCR_ERROR_RUNTIME;
  } catch (...) {
    set_error("unknown error");
    return CCR_ERROR_RUNTIME;
  }
}

ccr::MarginMode margin_from_label(const std::string& s) {
  if (s == "uncollateralized") return ccr::MarginMode::Uncollateralized;
  if (s == "collateral") return ccr::MarginMode::Collateral;
  if (s == "lockup") return ccr::MarginMode::LockUp;
  if (s == "segregated") return ccr::MarginMode::Segregated;
  if (s == "lockup_segregated") return ccr::MarginMode::LockUpSegregated;
  throw std::invalid_argument("unknown margin mode '" + s + "'");
}

}  // namespace

struct ccr_config {
  ccr::RunConfig config;
};

struct ccr_pricer {
  ccr::RunConfig config;  // settlement knobs for policy_at
  ccr::BilateralPricer pricer;
};

extern "C" {

const char* ccr_version(void) { return CCR_VERSION; }

const char* ccr_last_error(void) { return t_last_error.c_str(); }

void ccr_string_free(char* s) { std::free(s); }

int ccr_preset_count(void) {
  return static_cast<int>(ccr::preset_names().size());
}

const char* ccr_preset_name(int index) {
  const auto& names = ccr::preset_names();
  if (index < 0 || index >= static_cast<int>(names.size())) return nullptr;
  return names[static_cast<std::size_t>(index)].c_str();
}

ccr_config* ccr_config_parse(const char* json_text) {
  ccr_config* handle = nullptr;
  guarded([&]() -> ccr_status {
    if (!json_text) throw std::invalid_argument("json_text is null");
    handle = new ccr_config{ccr::parse_run_config(json_text)};
    return CCR_OK;
  });
  return handle;
}

ccr_config* ccr_config_load(const char* path) {
  ccr_config* handle = nullptr;
  guarded([&]() -> ccr_status {
    if (!path) throw std::invalid_argument("path is null");
    handle = new ccr_config{ccr::load_run_config(path)};
    return CCR_OK;
  });
  return handle;
}

ccr_config* ccr_config_preset(const char* name) {
  ccr_config* handle = nullptr;
  guarded([&]() -> ccr_status {
    if (!name) throw std::invalid_argument("name is null");
    handle = new ccr_config{ccr::parse_run_config(ccr::preset_config(name))};
    return CCR_OK;
  });
  return handle;
}

void ccr_config_free(ccr_config* config) { delete config; }

ccr_status ccr_run_to_directory(const ccr_config* config, const char* directory,
                                int threads, char** log_out) {
  if (log_out) *log_out = nullptr;
  return guarded([&]() -> ccr_status {
    if (!config) throw std::invalid_argument("config is null");
    if (!directory) throw std::invalid_argument("directory is null");
    std::ostringstream log;
    const int code = ccr::run_to_directory(config->config, directory, threads, log);
    if (log_out) *log_out = copy_out(log.str());
    if (code != 0) {
      set_error(log.str());
      return CCR_ERROR_RUNTIME;
    }
    return CCR_OK;
  });
}

ccr_status ccr_run_csv(const ccr_config* config, int threads, char** csv_out,
                       char** manifest_out) {
  if (csv_out) *csv_out = nullptr;
  if (manifest_out) *manifest_out = nullptr;
  return guarded([&]() -> ccr_status {
    if (!config) throw std::invalid_argument("config is null");
    const ccr::RunResult result = ccr::execute_run(config->config, threads);
    if (csv_out) {
      std::ostringstream os;
      ccr::write_sweep_csv(os, result);
      *csv_out = copy_out(os.str());
    }
    if (manifest_out) {
      std::ostringstream os;
      ccr::write_manifest(os, config->config, result);
      *manifest_out = copy_out(os.str());
    }
    if (result.failed()) {
      set_error(result.error);
      return CCR_ERROR_RUNTIME;
    }
    return CCR_OK;
  });
}

ccr_status ccr_verify(const ccr_config* config, int threads, char** report_out,
                      int* all_passed_out) {
  if (report_out) *report_out = nullptr;
  if (all_passed_out) *all_passed_out = 0;
  return guarded([&]() -> ccr_status {
    if (!config) throw std::invalid_argument("config is null");
    const ccr::VerifyReport report = ccr::run_verification(config->config, threads);
    if (report_out) {
      std::ostringstream os;
      ccr::write_verify_report(os, report);
      *report_out = copy_out(os.str());
    }
    if (all_passed_out) *all_passed_out = report.all_passed() ? 1 : 0;
    return CCR_OK;
  });
}

ccr_pricer* ccr_pricer_create(const ccr_config* config, const char* convention,
                              int rank, const char* leaf) {
  ccr_pricer* handle = nullptr;
  guarded([&]() -> ccr_status {
    if (!config) throw std::invalid_argument("config is null");
    if (!convention) throw std::invalid_argument("convention is null");
    const ccr::RunConfig& rc = config->config;
    ccr::EngineConfig ec;
    ec.convention = ccr::parse_convention(convention);
    ec.closeout.rank = rank > 0 ? rank : rc.rank;
    ec.closeout.leaf = leaf ? ccr::parse_leaf_rule(leaf) : rc.leaf;
    ec.coverage = rc.coverage;
    handle = new ccr_pricer{
        rc, ccr::BilateralPricer(rc.model, rc.contract, rc.grid, ec)};
    return CCR_OK;
  });
  return handle;
}

void ccr_pricer_free(ccr_pricer* pricer) { delete pricer; }

ccr_status ccr_pricer_price(const ccr_pricer* pricer, double spread,
                            double recovery_counterparty, double* out) {
  return guarded([&]() -> ccr_status {
    if (!pricer || !out) throw std::invalid_argument("null argument");
    *out = pricer->pricer.price(spread,
                                pricer->config.policy_at(recovery_counterparty));
    return CCR_OK;
  });
}

ccr_status ccr_pricer_par_spread(const ccr_pricer* pricer,
                                 double recovery_counterparty, double* out) {
  return guarded([&]() -> ccr_status {
    if (!pricer || !out) throw std::invalid_argument("null argument");
    *out = pricer->pricer.par_spread(pricer->config.policy_at(recovery_counterparty));
    return CCR_OK;
  });
}

ccr_status ccr_pricer_cva(const ccr_pricer* pricer, double spread,
                          double recovery_counterparty, double* out) {
  return guarded([&]() -> ccr_status {
    if (!pricer || !out) throw std::invalid_argument("null argument");
    *out = pricer->pricer.cva_direct(spread,
                                     pricer->config.policy_at(recovery_counterparty));
    return CCR_OK;
  });
}

ccr_status ccr_pricer_riskfree_value(const ccr_pricer* pricer, double spread,
                                     double* out) {
  return guarded([&]() -> ccr_status {
    if (!pricer || !out) throw std::invalid_argument("null argument");
    *out = pricer->pricer.riskfree_value(spread);
    return CCR_OK;
  });
}

ccr_status ccr_pricer_riskfree_par(const ccr_pricer* pricer, double* out) {
  return guarded([&]() -> ccr_status {
    if (!pricer || !out) throw std::invalid_argument("null argument");
    *out = pricer->pricer.riskfree_par();
    return CCR_OK;
  });
}

ccr_status ccr_settle(double mark, double r1, double r2, double c1, double c2,
                      double u1, double u2, const char* margin_mode,
                      const char* defaulter, double* out) {
  return guarded([&]() -> ccr_status {
    if (!margin_mode || !defaulter || !out)
      throw std::invalid_argument("null argument");
    ccr::SettlementTerms terms;
    terms.r1 = r1;
    terms.r2 = r2;
    terms.c1 = c1;
    terms.c2 = c2;
    terms.u1 = u1;
    terms.u2 = u2;
    terms.mode = margin_from_label(margin_mode);
    terms.validate();
    ccr::Party side;
    const std::string who = defaulter;
    if (who == "investor") side = ccr::Party::Investor;
    else if (who == "counterparty") side = ccr::Party::Counterparty;
    else throw std::invalid_argument("unknown defaulter '" + who + "'");
    *out = ccr::settle(mark, terms, side);
    return CCR_OK;
  });
}

ccr_status ccr_estimate_price(const ccr_config* config, double spread,
                              double recovery_counterparty, int64_t paths,
                              uint64_t seed, int threads, double* value_out,
                              double* std_error_out) {
  return guarded([&]() -> ccr_status {
    if (!config || !value_out || !std_error_out)
      throw std::invalid_argument("null argument");
    const ccr::RunConfig& rc = config->config;
    ccr::SimConfig sim;
    sim.paths = paths;
    sim.seed = seed;
    sim.horizon = rc.grid.maturity();
    sim.threads = threads;
    const ccr::Estimate est = ccr::estimate_convention_a_price(
        rc.model, rc.contract, rc.grid, rc.policy_at(recovery_counterparty), spread,
        sim);
    *value_out = est.value;
    *std_error_out = est.std_error;
    return CCR_OK;
  });
}

}  // extern "C"
