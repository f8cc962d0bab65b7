#include "core/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>

#include "json.hpp"
#include "version.hpp"

namespace ccr {
namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config: " + path + ": " + what);
}

void expect_object(const json& v, const std::string& path,
                   std::initializer_list<const char*> keys) {
  if (!v.is_object()) fail(path, "expected an object");
  for (const auto& item : v.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) fail(path + "." + item.key(), "unknown key");
  }
}

const json* opt(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& member(const json& obj, const std::string& path, const char* key) {
  const json* v = opt(obj, key);
  if (!v) fail(path + "." + key, "missing");
  return *v;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

std::int64_t as_int64(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t as_uint64(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    fail(path, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_number_array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

const char* margin_label(MarginMode mode) {
  switch (mode) {
    case MarginMode::Uncollateralized: return "uncollateralized";
    case MarginMode::Collateral: return "collateral";
    case MarginMode::LockUp: return "lockup";
    case MarginMode::Segregated: return "segregated";
    case MarginMode::LockUpSegregated: return "lockup_segregated";
  }
  return "?";
}

MarginMode parse_margin(const std::string& s, const std::string& path) {
  if (s == "uncollateralized") return MarginMode::Uncollateralized;
  if (s == "collateral") return MarginMode::Collateral;
  if (s == "lockup") return MarginMode::LockUp;
  if (s == "segregated") return MarginMode::Segregated;
  if (s == "lockup_segregated") return MarginMode::LockUpSegregated;
  fail(path, "unknown margin mode '" + s + "'");
}

ModelSpec parse_model(const json& v, const std::string& path) {
  expect_object(v, path,
                {"m", "survival_1y", "contagion_factor", "calibration",
                 "multipliers", "initial_defaults", "intensity_table",
                 "systemic_replacements"});
  ModelSpec model;
  if (const json* p = opt(v, "m")) model.m = as_int(*p, path + ".m");
  if (const json* p = opt(v, "survival_1y"))
    model.survival_1y = as_number(*p, path + ".survival_1y");
  if (const json* p = opt(v, "contagion_factor"))
    model.contagion_factor = as_number(*p, path + ".contagion_factor");
  if (const json* p = opt(v, "calibration")) {
    std::string s = as_string(*p, path + ".calibration");
    if (s == "direct") model.calibration = CalibrationMode::Direct;
    else if (s == "implied") model.calibration = CalibrationMode::Implied;
    else fail(path + ".calibration", "expected 'direct' or 'implied'");
  }
  if (const json* p = opt(v, "multipliers")) {
    const std::string mp = path + ".multipliers";
    expect_object(*p, mp, {"investor", "counterparty", "reference"});
    if (const json* q = opt(*p, "investor"))
      model.mult_investor = as_number(*q, mp + ".investor");
    if (const json* q = opt(*p, "counterparty"))
      model.mult_counterparty = as_number(*q, mp + ".counterparty");
    if (const json* q = opt(*p, "reference"))
      model.mult_reference = as_number(*q, mp + ".reference");
  }
  if (const json* p = opt(v, "initial_defaults"))
    model.initial_defaults = as_int(*p, path + ".initial_defaults");
  if (const json* p = opt(v, "intensity_table"))
    model.intensity_table = as_number_array(*p, path + ".intensity_table");
  if (const json* p = opt(v, "systemic_replacements"))
    model.systemic_replacements = as_bool(*p, path + ".systemic_replacements");
  return model;
}

ContractSpec parse_contract(const json& v, const std::string& path) {
  expect_object(v, path, {"maturity", "recovery"});
  ContractSpec contract;
  if (const json* p = opt(v, "maturity"))
    contract.maturity = as_number(*p, path + ".maturity");
  if (const json* p = opt(v, "recovery"))
    contract.recovery = as_number(*p, path + ".recovery");
  return contract;
}

TenorGrid parse_grid(const json& v, const std::string& path, double maturity) {
  expect_object(v, path, {"steps", "dates"});
  const json* steps = opt(v, "steps");
  const json* dates = opt(v, "dates");
  if (!!steps == !!dates)
    fail(path, "exactly one of 'steps' and 'dates' is required");
  if (steps) {
    int n = as_int(*steps, path + ".steps");
    if (n < 1) fail(path + ".steps", "must be >= 1");
    return TenorGrid::uniform(maturity, n);
  }
  TenorGrid grid;
  grid.dates = as_number_array(*dates, path + ".dates");
  return grid;
}

void parse_engine(const json& v, const std::string& path, RunConfig& config) {
  expect_object(v, path,
                {"conventions", "rank", "leaf", "ranks", "leaves", "coverage",
                 "recovery_grid", "recovery_counterparty", "recovery_investor",
                 "include_investor_settlement", "margin", "collateral_fraction",
                 "lockup_investor", "lockup_counterparty"});
  {
    const json& cv = member(v, path, "conventions");
    if (!cv.is_array()) fail(path + ".conventions", "expected an array");
    for (std::size_t i = 0; i < cv.size(); ++i) {
      const std::string ip = path + ".conventions[" + std::to_string(i) + "]";
      std::string s = as_string(cv[i], ip);
      try {
        config.conventions.push_back(parse_convention(s));
      } catch (const std::exception&) {
        fail(ip, "unknown convention '" + s + "'");
      }
    }
  }
  if (const json* p = opt(v, "rank")) config.rank = as_int(*p, path + ".rank");
  if (const json* p = opt(v, "leaf")) {
    std::string s = as_string(*p, path + ".leaf");
    try {
      config.leaf = parse_leaf_rule(s);
    } catch (const std::exception&) {
      fail(path + ".leaf", "unknown leaf rule '" + s + "'");
    }
  }
  if (const json* p = opt(v, "ranks")) {
    if (!p->is_array()) fail(path + ".ranks", "expected an array");
    for (std::size_t i = 0; i < p->size(); ++i)
      config.ranks.push_back(
          as_int((*p)[i], path + ".ranks[" + std::to_string(i) + "]"));
  }
  if (const json* p = opt(v, "leaves")) {
    if (!p->is_array()) fail(path + ".leaves", "expected an array");
    for (std::size_t i = 0; i < p->size(); ++i) {
      const std::string ip = path + ".leaves[" + std::to_string(i) + "]";
      std::string s = as_string((*p)[i], ip);
      try {
        config.leaves.push_back(parse_leaf_rule(s));
      } catch (const std::exception&) {
        fail(ip, "unknown leaf rule '" + s + "'");
      }
    }
  }
  if (const json* p = opt(v, "coverage"))
    config.coverage = as_number(*p, path + ".coverage");
  if (const json* p = opt(v, "recovery_grid"))
    config.recovery_grid = as_number_array(*p, path + ".recovery_grid");
  if (const json* p = opt(v, "recovery_counterparty"))
    config.recovery_counterparty = as_number(*p, path + ".recovery_counterparty");
  if (const json* p = opt(v, "recovery_investor"))
    config.recovery_investor = as_number(*p, path + ".recovery_investor");
  if (const json* p = opt(v, "include_investor_settlement"))
    config.include_investor_settlement =
        as_bool(*p, path + ".include_investor_settlement");
  if (const json* p = opt(v, "margin"))
    config.margin = parse_margin(as_string(*p, path + ".margin"), path + ".margin");
  if (const json* p = opt(v, "collateral_fraction"))
    config.collateral_fraction = as_number(*p, path + ".collateral_fraction");
  if (const json* p = opt(v, "lockup_investor"))
    config.lockup_investor = as_number(*p, path + ".lockup_investor");
  if (const json* p = opt(v, "lockup_counterparty"))
    config.lockup_counterparty = as_number(*p, path + ".lockup_counterparty");
}

std::string fmt7(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.7g", x);
  return buf;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

bool chained(Convention c) {
  return c == Convention::B || c == Convention::C || c == Convention::CPrime;
}

std::string row_key_label(const RunResult& result, const SweepRow& row) {
  std::string key;
  if (!result.rank_sweep) return "r2=" + fmt7(row.recovery);
  key = "rank=" + std::to_string(row.rank);
  if (result.leaf_sweep) key = std::string("rule=") + leaf_rule_label(row.leaf) + " " + key;
  return key;
}

}  // namespace

SettlementPolicy RunConfig::policy_at(double r2) const {
  SettlementPolicy policy;
  policy.recovery_counterparty = r2;
  policy.recovery_investor = recovery_investor.value_or(r2);
  policy.margin = margin;
  policy.collateral_fraction = collateral_fraction;
  policy.lockup_investor = lockup_investor;
  policy.lockup_counterparty = lockup_counterparty;
  policy.include_investor_settlement = include_investor_settlement;
  return policy;
}

void RunConfig::validate() const {
  model.validate();
  contract.validate();
  grid.validate();
  if (conventions.empty())
    throw std::invalid_argument("config: engine.conventions: at least one convention is required");
  if (std::abs(grid.maturity() - contract.maturity) > 1e-9)
    throw std::invalid_argument(
        "config: grid maturity " + fmt7(grid.maturity()) +
        " does not match contract maturity " + fmt7(contract.maturity));
  if (rank < 1) throw std::invalid_argument("config: engine.rank: must be >= 1");
  for (int r : ranks)
    if (r < 1) throw std::invalid_argument("config: engine.ranks: entries must be >= 1");
  if (!leaves.empty() && ranks.empty())
    throw std::invalid_argument("config: engine.leaves: requires engine.ranks");
  if (!recovery_grid.empty() && !ranks.empty())
    throw std::invalid_argument("config: engine.recovery_grid: incompatible with engine.ranks");
  if (coverage < 0.5 || coverage > 1.0)
    throw std::invalid_argument("config: engine.coverage: must be in [0.5, 1]");
  auto check_recovery = [](double r, const std::string& path) {
    if (!(r >= 0.0 && r <= 1.0))
      throw std::invalid_argument("config: " + path + ": must be in [0, 1]");
  };
  for (std::size_t i = 0; i < recovery_grid.size(); ++i)
    check_recovery(recovery_grid[i], "engine.recovery_grid[" + std::to_string(i) + "]");
  check_recovery(recovery_counterparty, "engine.recovery_counterparty");
  if (recovery_investor) check_recovery(*recovery_investor, "engine.recovery_investor");
  policy_at(recovery_counterparty).validate();
  if (oracle.paths < 0)
    throw std::invalid_argument("config: oracle.paths: must be >= 0");
  if (basename.empty() || basename.find_first_of("/\\") != std::string::npos)
    throw std::invalid_argument("config: output.basename: must be a bare file name");
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }
  expect_object(root, "config",
                {"model", "contract", "grid", "engine", "oracle", "output"});

  RunConfig config;
  config.model = parse_model(member(root, "config", "model"), "model");
  config.contract = parse_contract(member(root, "config", "contract"), "contract");
  config.grid = parse_grid(member(root, "config", "grid"), "grid", config.contract.maturity);
  parse_engine(member(root, "config", "engine"), "engine", config);
  if (const json* p = opt(root, "oracle")) {
    expect_object(*p, "oracle", {"paths", "seed"});
    if (const json* q = opt(*p, "paths")) config.oracle.paths = as_int64(*q, "oracle.paths");
    if (const json* q = opt(*p, "seed")) config.oracle.seed = as_uint64(*q, "oracle.seed");
  }
  if (const json* p = opt(root, "output")) {
    expect_object(*p, "output", {"basename"});
    if (const json* q = opt(*p, "basename"))
      config.basename = as_string(*q, "output.basename");
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

namespace {
const std::pair<const char*, const char*> kPresets[] = {
#include "presets.inc"
};
}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& p : kPresets) v.push_back(p.first);
    return v;
  }();
  return names;
}

std::string preset_config(const std::string& name) {
  for (const auto& p : kPresets)
    if (name == p.first) return p.second;
  std::string known;
  for (const auto& p : kPresets) known += std::string(known.empty() ? "" : ", ") + p.first;
  throw std::invalid_argument("unknown preset '" + name + "' (available: " + known + ")");
}

RunResult execute_run(const RunConfig& config, int threads) {
  config.validate();
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();

  RunResult result;
  result.basename = config.basename;
  result.rank_sweep = config.rank_sweep();
  result.leaf_sweep = result.rank_sweep && !config.leaves.empty();
  result.conventions = config.conventions;

  struct RowPlan {
    double r2;
    int rank;
    LeafRule leaf;
  };
  std::vector<RowPlan> plan;
  if (config.rank_sweep()) {
    const std::vector<LeafRule> leaves =
        config.leaves.empty() ? std::vector<LeafRule>{config.leaf} : config.leaves;
    for (int rank : config.ranks)
      for (LeafRule leaf : leaves) plan.push_back({config.recovery_counterparty, rank, leaf});
  } else {
    const std::vector<double> grid_r2 = config.recovery_grid.empty()
                                            ? std::vector<double>{config.recovery_counterparty}
                                            : config.recovery_grid;
    for (double r2 : grid_r2) plan.push_back({r2, config.rank, config.leaf});
  }

  int max_rank = 1;
  for (const RowPlan& row : plan) max_rank = std::max(max_rank, row.rank);
  result.resolved_intensities =
      resolve_intensities(config.model, config.model.m + 4 + max_rank);

  // One pricer per distinct environment; conventions without a risky
  // replacement ignore the chain depth and the leaf rule, so they collapse
  // onto a single task.
  struct Task {
    Convention convention;
    int rank;
    LeafRule leaf;
    std::unique_ptr<BilateralPricer> pricer;
    std::string error;
  };
  std::vector<Task> tasks;
  auto task_index = [&tasks](Convention c, int rank, LeafRule leaf) {
    if (!chained(c)) {
      rank = 1;
      leaf = LeafRule::RiskFree;
    }
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i].convention == c && tasks[i].rank == rank && tasks[i].leaf == leaf)
        return i;
    tasks.push_back(Task{c, rank, leaf, nullptr, {}});
    return tasks.size() - 1;
  };
  std::vector<std::vector<std::size_t>> row_tasks(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i)
    for (Convention c : config.conventions)
      row_tasks[i].push_back(task_index(c, plan[i].rank, plan[i].leaf));

  auto pool = [threads](std::size_t jobs, const std::function<void(std::size_t)>& body) {
    std::atomic<std::size_t> cursor{0};
    auto drain = [&] {
      for (std::size_t i; (i = cursor.fetch_add(1)) < jobs;) body(i);
    };
    const int workers = static_cast<int>(std::min<std::size_t>(threads, jobs));
    if (workers <= 1) {
      drain();
      return;
    }
    std::vector<std::thread> crew;
    for (int w = 0; w < workers; ++w) crew.emplace_back(drain);
    for (std::thread& t : crew) t.join();
  };

  pool(tasks.size(), [&](std::size_t i) {
    Task& task = tasks[i];
    try {
      EngineConfig ec;
      ec.convention = task.convention;
      ec.closeout.rank = task.rank;
      ec.closeout.leaf = task.leaf;
      ec.coverage = config.coverage;
      task.pricer = std::make_unique<BilateralPricer>(config.model, config.contract,
                                                      config.grid, ec);
    } catch (const std::exception& e) {
      task.error = e.what();
    }
  });

  auto finish = [&] {
    result.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  for (const Task& task : tasks) {
    if (!task.error.empty()) {
      result.error = std::string("convention ") + convention_label(task.convention) +
                     " rank " + std::to_string(task.rank) + ": " + task.error;
      finish();
      return result;
    }
  }
  result.riskfree_par = tasks.front().pricer->riskfree_par();

  // Every (row, convention) fit is independent; the assembly below is
  // ordered, so the CSV does not depend on the thread count.
  const std::size_t width = config.conventions.size();
  std::vector<double> fitted(plan.size() * width, 0.0);
  std::vector<std::string> fit_errors(plan.size() * width);
  pool(plan.size() * width, [&](std::size_t j) {
    const std::size_t row = j / width;
    const std::size_t col = j % width;
    try {
      const BilateralPricer& pricer = *tasks[row_tasks[row][col]].pricer;
      fitted[j] = pricer.par_spread(config.policy_at(plan[row].r2));
    } catch (const std::exception& e) {
      fit_errors[j] = e.what();
    }
  });

  for (std::size_t i = 0; i < plan.size(); ++i) {
    SweepRow row;
    row.recovery = plan[i].r2;
    row.rank = plan[i].rank;
    row.leaf = plan[i].leaf;
    bool ok = true;
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t j = i * width + c;
      if (!fit_errors[j].empty()) {
        result.error = row_key_label(result, row) + " convention " +
                       convention_label(config.conventions[c]) + ": " + fit_errors[j];
        ok = false;
        break;
      }
      row.spreads.push_back(fitted[j]);
    }
    if (!ok) break;
    result.rows.push_back(std::move(row));
  }
  finish();
  return result;
}

void write_sweep_csv(std::ostream& os, const RunResult& result) {
  if (!result.rank_sweep) {
    os << "r2";
  } else if (result.leaf_sweep) {
    os << "rule,rank";
  } else {
    os << "rank";
  }
  for (Convention c : result.conventions) os << ',' << convention_label(c);
  os << ",range_abs_bp,range_rel_bp\n";

  for (const SweepRow& row : result.rows) {
    if (!result.rank_sweep) {
      os << fmt7(row.recovery);
    } else if (result.leaf_sweep) {
      os << leaf_rule_label(row.leaf) << ',' << row.rank;
    } else {
      os << row.rank;
    }
    for (double s : row.spreads) os << ',' << fmt7(s);
    const auto [lo, hi] = std::minmax_element(row.spreads.begin(), row.spreads.end());
    const double span = *hi - *lo;
    os << ',' << fmt7(span * 1e4);
    os << ',' << (*lo != 0.0 ? fmt7(span / *lo * 1e4) : "inf");
    os << '\n';
  }
  if (result.failed()) os << "FAILED," << csv_quote(result.error) << '\n';
}

void write_manifest(std::ostream& os, const RunConfig& config, const RunResult& result) {
  json engine;
  {
    json cv = json::array();
    for (Convention c : config.conventions) cv.push_back(convention_label(c));
    engine["conventions"] = cv;
    if (config.rank_sweep()) {
      engine["ranks"] = config.ranks;
      if (!config.leaves.empty()) {
        json lv = json::array();
        for (LeafRule l : config.leaves) lv.push_back(leaf_rule_label(l));
        engine["leaves"] = lv;
      } else {
        engine["leaf"] = leaf_rule_label(config.leaf);
      }
    } else {
      engine["rank"] = config.rank;
      engine["leaf"] = leaf_rule_label(config.leaf);
      if (!config.recovery_grid.empty()) engine["recovery_grid"] = config.recovery_grid;
    }
    engine["coverage"] = config.coverage;
    engine["recovery_counterparty"] = config.recovery_counterparty;
    if (config.recovery_investor) engine["recovery_investor"] = *config.recovery_investor;
    engine["include_investor_settlement"] = config.include_investor_settlement;
    engine["margin"] = margin_label(config.margin);
    engine["collateral_fraction"] = config.collateral_fraction;
    engine["lockup_investor"] = config.lockup_investor;
    engine["lockup_counterparty"] = config.lockup_counterparty;
  }

  json model;
  model["m"] = config.model.m;
  model["survival_1y"] = config.model.survival_1y;
  model["contagion_factor"] = config.model.contagion_factor;
  model["calibration"] =
      config.model.calibration == CalibrationMode::Direct ? "direct" : "implied";
  model["multipliers"] = {{"investor", config.model.mult_investor},
                          {"counterparty", config.model.mult_counterparty},
                          {"reference", config.model.mult_reference}};
  model["initial_defaults"] = config.model.initial_defaults;
  model["systemic_replacements"] = config.model.systemic_replacements;
  if (!config.model.intensity_table.empty())
    model["intensity_table"] = config.model.intensity_table;

  // The config echo parses back through parse_run_config, so a manifest is
  // enough to rerun everything in it.
  json echo;
  echo["model"] = model;
  echo["contract"] = {{"maturity", config.contract.maturity},
                      {"recovery", config.contract.recovery}};
  echo["grid"] = {{"dates", config.grid.dates}};
  echo["engine"] = engine;
  echo["oracle"] = {{"paths", config.oracle.paths}, {"seed", config.oracle.seed}};
  echo["output"] = {{"basename", config.basename}};

  json rows = json::array();
  for (const SweepRow& row : result.rows) {
    json r;
    if (!result.rank_sweep) {
      r["r2"] = row.recovery;
    } else {
      r["rank"] = row.rank;
      if (result.leaf_sweep) r["rule"] = leaf_rule_label(row.leaf);
    }
    json spreads;
    for (std::size_t c = 0; c < result.conventions.size(); ++c)
      spreads[convention_label(result.conventions[c])] = row.spreads[c];
    r["spreads"] = spreads;
    rows.push_back(r);
  }

  json manifest;
  manifest["version"] = CCR_VERSION;
  manifest["status"] = result.failed() ? "failed" : "ok";
  if (result.failed()) manifest["error"] = result.error;
  manifest["config"] = echo;
  manifest["resolved"] = {{"intensities", result.resolved_intensities},
                          {"riskfree_par", result.riskfree_par}};
  manifest["rows"] = rows;
  manifest["elapsed_seconds"] = result.elapsed_seconds;
  os << manifest.dump(2) << '\n';
}

int run_to_directory(const RunConfig& config, const std::string& directory,
                     int threads, std::ostream& log) {
  namespace fs = std::filesystem;
  RunResult result;
  try {
    fs::create_directories(directory);
    result = execute_run(config, threads);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }

  const fs::path csv_path = fs::path(directory) / (config.basename + ".csv");
  const fs::path manifest_path = fs::path(directory) / (config.basename + ".manifest.json");
  {
    std::ofstream csv(csv_path);
    if (!csv) {
      log << "error: cannot write " << csv_path.string() << '\n';
      return 1;
    }
    write_sweep_csv(csv, result);
  }
  {
    std::ofstream mf(manifest_path);
    if (!mf) {
      log << "error: cannot write " << manifest_path.string() << '\n';
      return 1;
    }
    write_manifest(mf, config, result);
  }
  log << "wrote " << csv_path.string() << '\n';
  log << "wrote " << manifest_path.string() << '\n';
  if (result.failed()) {
    log << "run FAILED after " << result.rows.size() << " rows: " << result.error << '\n';
    return 1;
  }
  log << "completed " << result.rows.size() << " rows in "
      << fmt7(result.elapsed_seconds) << "s\n";
  return 0;
}

double counting_chain_gap(const GeneratorSpec& spec, const std::vector<double>& dates) {
  return counting_chain_gap(build_generator(spec), spec, dates);
}

double counting_chain_gap(const RateMatrix& full_generator, const GeneratorSpec& spec,
                          const std::vector<double>& dates) {
  spec.validate();
  const RateMatrix counting = build_counting_generator(spec);
  const int levels = spec.m + 4;
  const int start = chain_index(ChainState{});
  double gap = 0.0;
  for (double t : dates) {
    const Eigen::MatrixXd full = step_kernel(full_generator, t);
    const Eigen::MatrixXd reduced = step_kernel(counting, t);
    Eigen::VectorXd law = Eigen::VectorXd::Zero(levels);
    for (int s = 0; s < full.cols(); ++s) law[chain_state(s).total()] += full(start, s);
    for (int l = 0; l < levels; ++l)
      gap = std::max(gap, std::abs(law[l] - reduced(0, l)));
  }
  return gap;
}

namespace {

VerifyCheck settlement_identities_check() {
  VerifyCheck check;
  check.name = "settlement-identities";
  check.bound = 1e-12;

  constexpr int kTuples = 100000;
  constexpr MarginMode kModes[] = {MarginMode::Uncollateralized, MarginMode::Collateral,
                                   MarginMode::LockUp, MarginMode::Segregated,
                                   MarginMode::LockUpSegregated};
  constexpr Party kSides[] = {Party::Investor, Party::Counterparty};

  std::mt19937 gen(12345);
  std::uniform_real_distribution<double> mark(-5.0, 5.0);
  std::uniform_real_distribution<double> recovery(0.0, 1.0);
  std::uniform_real_distribution<double> posted(0.0, 6.0);
  std::uniform_real_distribution<double> margin(0.0, 3.0);

  double measured = 0.0;
  for (int i = 0; i < kTuples; ++i) {
    SettlementTerms t;
    const double M = mark(gen);
    t.r1 = recovery(gen);
    t.r2 = recovery(gen);
    t.c1 = posted(gen);
    t.c2 = posted(gen);
    t.u1 = margin(gen);
    t.u2 = margin(gen);
    const double scale = 1.0 + std::abs(M) + t.c1 + t.c2 + t.u1 + t.u2;
    auto record = [&](double gap) { measured = std::max(measured, gap / scale); };

    // Full recovery settles at the mark, whatever the agreement.
    {
      SettlementTerms full = t;
      full.r1 = 1.0;
      full.r2 = 1.0;
      for (MarginMode mode : kModes) {
        full.mode = mode;
        for (Party side : kSides) record(std::abs(settle(M, full, side) - M));
      }
    }
    // So does a collateralized close-out with the mark fully posted.
    {
      SettlementTerms full = t;
      full.mode = MarginMode::Collateral;
      full.c1 = std::max(-M, 0.0);
      full.c2 = std::max(M, 0.0);
      for (Party side : kSides) record(std::abs(settle(M, full, side) - M));
    }
    // Equal lock-ups cancel out of the lock-up modes.
    {
      SettlementTerms eq = t;
      eq.u2 = eq.u1;
      SettlementTerms plain = eq;
      for (Party side : kSides) {
        eq.mode = MarginMode::LockUp;
        plain.mode = MarginMode::Collateral;
        record(std::abs(settle(M, eq, side) - settle(M, plain, side)));
        eq.mode = MarginMode::LockUpSegregated;
        plain.mode = MarginMode::Segregated;
        record(std::abs(settle(M, eq, side) - settle(M, plain, side)));
      }
    }
    // Zero collateral reduces the collateralized close-out to the plain one.
    {
      SettlementTerms bare = t;
      bare.c1 = 0.0;
      bare.c2 = 0.0;
      SettlementTerms plain = bare;
      for (Party side : kSides) {
        bare.mode = MarginMode::Collateral;
        plain.mode = MarginMode::Uncollateralized;
        record(std::abs(settle(M, bare, side) - settle(M, plain, side)));
      }
    }
  }
  check.measured = measured;
  check.passed = measured <= check.bound;
  check.detail = std::to_string(kTuples) + " random tuples, all margin modes";
  return check;
}

void require_uniform(const TenorGrid& grid) {
  const double dt0 = grid.dt(0);
  for (int j = 1; j < grid.steps(); ++j)
    if (std::abs(grid.dt(j) - dt0) > 1e-12)
      throw std::invalid_argument("verification requires a uniform tenor grid");
}

}  // namespace

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const VerifyCheck& c) { return c.passed; });
}

VerifyReport run_verification(const RunConfig& config, int threads) {
  config.validate();
  if (!config.oracle.enabled())
    throw std::invalid_argument("verification requires an oracle block with paths >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  require_uniform(config.grid);

  VerifyReport report;
  report.checks.push_back(settlement_identities_check());

  const std::vector<double> gamma0 = resolve_intensities(config.model, config.model.m + 4);

  {
    VerifyCheck check;
    check.name = "counting-chain-equivalence";
    check.bound = 1e-10;
    std::vector<double> dates;
    for (int j = 1; j <= 12; ++j) dates.push_back(j * config.grid.maturity() / 12.0);
    double measured = 0.0;
    for (int m : {1, 2, 3}) {
      GeneratorSpec spec;
      spec.m = m;
      spec.base_intensity = intensity_ladder(gamma0[0], config.model.contagion_factor, m + 4);
      spec.mult_investor = 1.0;
      spec.mult_counterparty = 1.0;
      spec.mult_reference = 1.0;
      spec.contagion_factor = config.model.contagion_factor;
      measured = std::max(measured, counting_chain_gap(spec, dates));
    }
    check.measured = measured;
    check.passed = measured <= check.bound;
    check.detail = "pool sizes 1-3, unit multipliers, 12 dates";
    report.checks.push_back(check);
  }

  const SimConfig sim{config.oracle.paths, config.oracle.seed, config.grid.maturity(),
                      threads};

  {
    VerifyCheck check;
    check.name = "oracle-event-frequencies";
    check.bound = 4.0;  // max |z| over the whole family of interval marginals
    const EpisodeSpec episode = inception_episode(config.model);
    const std::vector<double> gamma =
        resolve_intensities(config.model, required_table_length(episode));
    const EventFrequencies freq =
        event_frequencies(simulate(episode, gamma, sim), config.grid);
    const EventTable table =
        event_probabilities(episode, gamma, config.grid.steps(), config.grid.dt(0));
    const double n = static_cast<double>(freq.paths);
    double measured = 0.0;
    int compared = 0;
    auto push = [&](double q, double f) {
      if (n * q * (1.0 - q) < 25.0) return;  // below CLT territory
      measured = std::max(measured, std::abs(f - q) / std::sqrt(q * (1.0 - q) / n));
      ++compared;
    };
    for (int x = 0; x <= config.grid.steps(); ++x) push(table.alive[x], freq.alive[x]);
    for (int j = 0; j < config.grid.steps(); ++j) {
      push(table.investor_first[j].sum(), freq.investor_first[j]);
      push(table.counterparty_first[j].sum(), freq.counterparty_first[j]);
      push(table.reference_first[j], freq.reference_first[j]);
    }
    check.measured = measured;
    check.passed = measured <= check.bound;
    check.detail = std::to_string(compared) + " marginals at " +
                   std::to_string(freq.paths) + " paths";
    report.checks.push_back(check);
  }

  {
    VerifyCheck check;
    check.name = "oracle-riskfree-value";
    check.bound = 3.0;
    ContractSpec at_par = config.contract;
    at_par.spread = riskfree_par_spread(config.contract, config.model, config.grid);
    const double lattice = riskfree_cds_value(at_par, config.model, config.grid, 0, 0);
    const Estimate est = estimate_riskfree_value(config.model, config.contract, config.grid,
                                                 at_par.spread, sim);
    check.measured = std::abs(est.value - lattice) / est.std_error;
    check.passed = check.measured <= check.bound;
    check.detail = "default-free value at par " + fmt7(at_par.spread) + ", |z| at " +
                   std::to_string(est.paths) + " paths";
    report.checks.push_back(check);
  }

  {
    VerifyCheck check;
    check.name = "oracle-bilateral-price";
    check.bound = 3.0;
    EngineConfig ec;
    ec.convention = Convention::A;
    ec.closeout.rank = 1;
    ec.coverage = config.coverage;
    const BilateralPricer pricer(config.model, config.contract, config.grid, ec);
    const SettlementPolicy policy = config.policy_at(config.recovery_counterparty);
    const double kappa = pricer.par_spread(policy);
    const double residual = pricer.price(kappa, policy);
    const Estimate est = estimate_convention_a_price(config.model, config.contract,
                                                     config.grid, policy, kappa, sim);
    check.measured = std::abs(est.value - residual) / est.std_error;
    check.passed = check.measured <= check.bound;
    check.detail = "default-free close-out at its par " + fmt7(kappa) + ", |z| at " +
                   std::to_string(est.paths) + " paths";
    report.checks.push_back(check);
  }

  return report;
}

void write_verify_report(std::ostream& os, const VerifyReport& report) {
  int passed = 0;
  for (const VerifyCheck& check : report.checks) {
    passed += check.passed ? 1 : 0;
    os << (check.passed ? "PASS" : "FAIL") << "  " << check.name
       << "  measured=" << fmt7(check.measured) << "  bound=" << fmt7(check.bound);
    if (!check.detail.empty()) os << "  (" << check.detail << ")";
    os << '\n';
  }
  os << (report.all_passed() ? "verification passed" : "verification FAILED") << " ("
     << passed << "/" << report.checks.size() << " checks)\n";
}

}  // namespace ccr
