/* C interface to the counterparty-credit-risk pricing library.
 *
 * All entry points are thread-safe.  Functions that can fail return a
 * ccr_status (or NULL for constructors); the accompanying message is kept
 * per thread and read back with ccr_last_error().  Strings returned through
 * char** out-parameters are heap copies owned by the caller; release them
 * with ccr_string_free().
 */
#ifndef CCR_H
#define CCR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ccr_status {
  CCR_OK = 0,
  CCR_ERROR_INVALID_ARGUMENT = 1, /* bad configuration or parameter */
  CCR_ERROR_RUNTIME = 2,          /* a computation failed */
  CCR_ERROR_IO = 3,               /* file could not be read or written */
} ccr_status;

const char* ccr_version(void);

/* Message of the most recent failing call on this thread; "" when none. */
const char* ccr_last_error(void);

void ccr_string_free(char* s);

/* ---------------------------------------------------------------------------
 * Run configurations.
 *
 * A configuration is a JSON document with model / contract / grid / engine
 * blocks plus optional oracle and output blocks; parsing is strict and
 * rejects unknown keys.  Built-in presets reproduce the reference tables.
 * ------------------------------------------------------------------------- */

typedef struct ccr_config ccr_config;

int ccr_preset_count(void);
const char* ccr_preset_name(int index); /* NULL out of range */

ccr_config* ccr_config_parse(const char* json_text);
ccr_config* ccr_config_load(const char* path);
ccr_config* ccr_config_preset(const char* name);
void ccr_config_free(ccr_config* config);

/* Fits every spread the configuration asks for and writes
 * <basename>.csv and <basename>.manifest.json under `directory` (created if
 * missing).  Identical configurations produce byte-identical CSVs, whatever
 * `threads` is.  A partial failure still writes both files, with a FAILED
 * marker in the CSV, and returns CCR_ERROR_RUNTIME.  `log_out` (optional)
 * receives the progress log. */
ccr_status ccr_run_to_directory(const ccr_config* config, const char* directory,
                                int threads, char** log_out);

/* Same sweep with the artifacts returned in memory instead of written out. */
ccr_status ccr_run_csv(const ccr_config* config, int threads, char** csv_out,
                       char** manifest_out);

/* Runs the verification suites (settlement identities, counting-chain
 * equivalence, Monte Carlo agreement with the lattice).  Requires the
 * configuration's oracle block.  `all_passed_out` is 1 when every check
 * passed; `report_out` (optional) receives the pass/fail report with the
 * measured tolerances. */
ccr_status ccr_verify(const ccr_config* config, int threads, char** report_out,
                      int* all_passed_out);

/* ---------------------------------------------------------------------------
 * Single-contract pricing.
 *
 * A pricer is built once per close-out convention and then evaluated at any
 * spread and counterparty recovery; the other settlement knobs (margin mode,
 * collateral fraction, lock-ups, investor recovery override) come from the
 * configuration's engine block.  `convention` is one of "a", "a_prime", "b",
 * "c", "c_prime"; rank <= 0 and leaf == NULL fall back to the configured
 * replacement-chain depth and cut-off rule ("risk_free" or "zero").
 * ------------------------------------------------------------------------- */

typedef struct ccr_pricer ccr_pricer;

ccr_pricer* ccr_pricer_create(const ccr_config* config, const char* convention,
                              int rank, const char* leaf);
void ccr_pricer_free(ccr_pricer* pricer);

/* Bilateral contract value to the investor. */
ccr_status ccr_pricer_price(const ccr_pricer* pricer, double spread,
                            double recovery_counterparty, double* out);

/* Spread at which the bilateral value crosses zero. */
ccr_status ccr_pricer_par_spread(const ccr_pricer* pricer,
                                 double recovery_counterparty, double* out);

/* Credit valuation adjustment at the given spread: default-free value minus
 * the bilateral value, evaluated directly as the expected close-out cost. */
ccr_status ccr_pricer_cva(const ccr_pricer* pricer, double spread,
                          double recovery_counterparty, double* out);

/* Default-free contract on the same model and grid. */
ccr_status ccr_pricer_riskfree_value(const ccr_pricer* pricer, double spread,
                                     double* out);
ccr_status ccr_pricer_riskfree_par(const ccr_pricer* pricer, double* out);

/* ---------------------------------------------------------------------------
 * Close-out settlement values.
 *
 * Value received by the investor when `defaulter` ("investor" or
 * "counterparty") defaults on a contract marking at `mark`, under recoveries
 * r1/r2, posted collateral c1/c2 and lock-up margins u1/u2.  `margin_mode` is
 * one of "uncollateralized", "collateral", "lockup", "segregated",
 * "lockup_segregated".
 * ------------------------------------------------------------------------- */

ccr_status ccr_settle(double mark, double r1, double r2, double c1, double c2,
                      double u1, double u2, const char* margin_mode,
                      const char* defaulter, double* out);

/* ---------------------------------------------------------------------------
 * Monte Carlo oracle.
 *
 * Pathwise estimate of the bilateral value under default-free close-out
 * marks (convention "a"), using the configuration's model, contract, grid
 * and settlement policy at the given counterparty recovery.  The estimate is
 * a pure function of (configuration, spread, paths, seed): thread count does
 * not change the result.
 * ------------------------------------------------------------------------- */

ccr_status ccr_estimate_price(const ccr_config* config, double spread,
                              double recovery_counterparty, int64_t paths,
                              uint64_t seed, int threads, double* value_out,
                              double* std_error_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CCR_H */
