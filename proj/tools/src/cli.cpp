#include "vcam/cli.hpp"

#include "vcam/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace vcam::cli {

namespace {

using Setter = std::function<void(CommandConfig&, const std::string&)>;

struct KeySpec {
  std::string name;
  std::string help;
  Setter set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_integer(const std::string& key, const std::string& text, long long lo, long long hi) {
  const std::string s = trim(text);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  if (v < lo || v > hi) {
    throw ConfigError(key, "value " + s + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return v;
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a finite number, got '" + text + "'");
  }
  return v;
}

double parse_positive(const std::string& key, const std::string& text) {
  const double v = parse_real(key, text);
  if (!(v > 0.0)) throw ConfigError(key, "must be positive, got " + trim(text));
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// "3,4,5", "3..8" or a mix such as "3..5,8".
std::vector<int> parse_int_list(const std::string& key, const std::string& text, int lo, int hi) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(static_cast<int>(parse_integer(key, item, lo, hi)));
      continue;
    }
    const int a = static_cast<int>(parse_integer(key, item.substr(0, dots), lo, hi));
    const int b = static_cast<int>(parse_integer(key, item.substr(dots + 2), lo, hi));
    if (b < a) throw ConfigError(key, "empty range '" + item + "'");
    for (int v = a; v <= b; ++v) out.push_back(v);
  }
  if (out.empty()) throw ConfigError(key, "list must not be empty");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// "0.01,0.1,1" or "log:LO:HI:N" for N log-spaced points.
std::vector<double> parse_real_grid(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  std::vector<double> out;
  if (s.rfind("log:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(s.substr(4));
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw ConfigError(key, "expected log:LO:HI:N, got '" + text + "'");
    const double lo = parse_positive(key, parts[0]);
    const double hi = parse_positive(key, parts[1]);
    const int n = static_cast<int>(parse_integer(key, parts[2], 1, 100000));
    if (hi < lo) throw ConfigError(key, "log grid needs LO <= HI");
    out = log_spaced_grid(lo, hi, n);
  } else {
    for (const auto& item : split_list(s)) out.push_back(parse_positive(key, item));
  }
  if (out.empty()) throw ConfigError(key, "grid must not be empty");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> k;
    const auto add = [&k](std::string name, std::string help, Setter set) {
      k.push_back({std::move(name), std::move(help), std::move(set)});
    };
    add("input", "dataset CSV (fit, identify)", [](CommandConfig& c, const std::string& v) { c.input = trim(v); });
    add("output", "output file (directory for grids)",
        [](CommandConfig& c, const std::string& v) { c.output = trim(v); });
    add("fit", "fit artifact JSON (identify, grids)",
        [](CommandConfig& c, const std::string& v) { c.fit_path = trim(v); });
    add("grids", "fit: also write function-grid CSVs into this directory",
        [](CommandConfig& c, const std::string& v) { c.grids_dir = trim(v); });
    add("grid_points", "points per function grid (default 201)", [](CommandConfig& c, const std::string& v) {
      c.grid_points = static_cast<int>(parse_integer("grid_points", v, 2, 1000000));
    });
    add("example", "ex1 or ex2", [](CommandConfig& c, const std::string& v) {
      const std::string s = trim(v);
      if (s != "ex1" && s != "ex2") throw ConfigError("example", "expected ex1 or ex2, got '" + v + "'");
      c.scenario.example = parse_example(s);
    });
    add("T", "sample size (>= 10)", [](CommandConfig& c, const std::string& v) {
      c.scenario.length = static_cast<int>(parse_integer("T", v, 10, 100000000));
    });
    add("Q", "Monte Carlo replications", [](CommandConfig& c, const std::string& v) {
      c.scenario.replications = static_cast<int>(parse_integer("Q", v, 1, 10000000));
    });
    add("seed", "base seed", [](CommandConfig& c, const std::string& v) { c.scenario.base_seed = parse_seed("seed", v); });
    add("sigma", "noise standard deviation (>= 0)", [](CommandConfig& c, const std::string& v) {
      const double s = parse_real("sigma", v);
      if (s < 0.0) throw ConfigError("sigma", "must be >= 0");
      c.scenario.sigma = s;
    });
    add("I", "segment length, or auto for BIC selection", [](CommandConfig& c, const std::string& v) {
      if (trim(v) == "auto") {
        c.scenario.segment_length.reset();
      } else {
        c.scenario.segment_length = static_cast<int>(parse_integer("I", v, 2, 100000000));
      }
    });
    add("K", "interior knot count, or auto for BIC selection", [](CommandConfig& c, const std::string& v) {
      if (trim(v) == "auto") {
        c.scenario.interior_count.reset();
      } else {
        c.scenario.interior_count = static_cast<int>(parse_integer("K", v, 0, 1000));
      }
    });
    add("identify", "mc: run structure identification (default true for ex2)",
        [](CommandConfig& c, const std::string& v) { c.scenario.identify = parse_bool("identify", v); });
    add("comparisons", "mc: oracle and misspecified estimators (default true)",
        [](CommandConfig& c, const std::string& v) { c.scenario.comparisons = parse_bool("comparisons", v); });
    add("threads", "worker threads for mc (fallback: VCAM_THREADS)", [](CommandConfig& c, const std::string& v) {
      c.threads = static_cast<int>(parse_integer("threads", v, 1, 1024));
    });
    for (int step = 1; step <= 3; ++step) {
      const std::string name = "estimation.order_step" + std::to_string(step);
      add(name, "spline order in estimation step " + std::to_string(step), [name, step](CommandConfig& c, const std::string& v) {
        const int m = static_cast<int>(parse_integer(name, v, 1, 10));
        if (step == 1) c.scenario.estimation.order_step1 = m;
        if (step == 2) c.scenario.estimation.order_step2 = m;
        if (step == 3) c.scenario.estimation.order_step3 = m;
      });
    }
    add("estimation.K_grid", "knot counts searched by BIC, e.g. 3..8", [](CommandConfig& c, const std::string& v) {
      c.scenario.estimation.K_grid = parse_int_list("estimation.K_grid", v, 0, 1000);
    });
    add("estimation.I_grid", "segment lengths searched by BIC, e.g. 20,25,30", [](CommandConfig& c, const std::string& v) {
      c.scenario.estimation.I_grid = parse_int_list("estimation.I_grid", v, 2, 100000000);
    });
    add("estimation.anchor", "covariate value where every additive function is zero",
        [](CommandConfig& c, const std::string& v) { c.scenario.estimation.anchor = parse_real("estimation.anchor", v); });
    add("estimation.extra_rounds", "additional step II/III passes (default 0)", [](CommandConfig& c, const std::string& v) {
      c.scenario.estimation.extra_rounds = static_cast<int>(parse_integer("estimation.extra_rounds", v, 0, 100));
    });
    add("estimation.group_rank_tolerance", "relative pivot tolerance of per-group step I fits",
        [](CommandConfig& c, const std::string& v) {
          const double tol = parse_real("estimation.group_rank_tolerance", v);
          if (tol < 0.0 || tol >= 1.0) throw ConfigError("estimation.group_rank_tolerance", "must lie in [0, 1)");
          c.scenario.estimation.group_rank_tolerance = tol;
        });
    add("penalty.a", "SCAD shape constant (> 2)", [](CommandConfig& c, const std::string& v) {
      const double a = parse_real("penalty.a", v);
      if (!(a > 2.0)) throw ConfigError("penalty.a", "must be > 2");
      c.scenario.penalty.a = a;
    });
    add("penalty.lambda_grid", "stage 1 tuning grid, list or log:LO:HI:N", [](CommandConfig& c, const std::string& v) {
      c.scenario.penalty.lambda_grid = parse_real_grid("penalty.lambda_grid", v);
    });
    add("penalty.mu_grid", "stage 2 tuning grid, list or log:LO:HI:N", [](CommandConfig& c, const std::string& v) {
      c.scenario.penalty.mu_grid = parse_real_grid("penalty.mu_grid", v);
    });
    add("penalty.zero_threshold", "norms at or below this are flagged zero", [](CommandConfig& c, const std::string& v) {
      c.scenario.penalty.zero_threshold = parse_positive("penalty.zero_threshold", v);
    });
    add("penalty.lqa_floor", "denominator floor of the LQA weights", [](CommandConfig& c, const std::string& v) {
      c.scenario.penalty.lqa_floor = parse_positive("penalty.lqa_floor", v);
    });
    add("penalty.max_iter", "LQA iteration cap", [](CommandConfig& c, const std::string& v) {
      c.scenario.penalty.max_iter = static_cast<int>(parse_integer("penalty.max_iter", v, 1, 100000));
    });
    add("penalty.coef_tol", "LQA convergence tolerance", [](CommandConfig& c, const std::string& v) {
      c.scenario.penalty.coef_tol = parse_positive("penalty.coef_tol", v);
    });
    return k;
  }();
  return specs;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : key_specs()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

std::optional<Command> parse_command(const std::string& s) {
  if (s == "simulate") return Command::simulate;
  if (s == "fit") return Command::fit;
  if (s == "identify") return Command::identify;
  if (s == "mc") return Command::mc;
  if (s == "grids") return Command::grids;
  return std::nullopt;
}

/// key = value lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config", "file not found: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(io::read_file(path));
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config", path + " line " + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (!find_key(key)) {
      throw ConfigError(key, path + " line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

void require(bool ok, const std::string& key, Command command) {
  if (!ok) throw ConfigError(key, std::string("command '") + to_string(command) + "' requires --" + key);
}

void require_file(const std::string& path, const std::string& key) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError(key, "file not found: " + path);
}

void write_grids(const VcamFit& fit, const std::filesystem::path& dir, int points) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < fit.alpha.size(); ++k) {
    io::write_atomic(dir / ("alpha" + std::to_string(k) + ".csv"), io::grid_to_csv(function_grid(fit.alpha[k], points)));
  }
  for (std::size_t k = 0; k < fit.beta.size(); ++k) {
    io::write_atomic(dir / ("beta" + std::to_string(k + 1) + ".csv"),
                     io::grid_to_csv(function_grid(fit.beta[k], points)));
  }
}

int run_simulate(const CommandConfig& c, std::ostream& out) {
  const std::uint64_t stream = 1;
  RngStream rng(c.scenario.base_seed, stream);
  const SimulatedData sim = simulate(c.scenario.model(), c.scenario.length, rng);
  io::write_atomic(c.output, io::dataset_to_csv(sim.data));
  const std::string sidecar = c.output + ".truth.json";
  io::write_atomic(sidecar,
                   io::truth_to_json(sim, to_string(c.scenario.example), c.scenario.base_seed, stream).dump(2) + "\n");
  out << "wrote " << c.output << " (T=" << sim.data.length() << ", p=" << sim.data.covariate_count() << ") and "
      << sidecar << '\n';
  return 0;
}

int run_fit(const CommandConfig& c, std::ostream& out) {
  const TimeSeriesDataset data = io::read_dataset(c.input);
  VcamFit fit;
  if (c.scenario.segment_length && c.scenario.interior_count) {
    fit = fit_three_step(data, c.scenario.estimation, *c.scenario.segment_length, *c.scenario.interior_count);
  } else {
    EstimationConfig cfg = c.scenario.estimation;
    if (c.scenario.segment_length) cfg.I_grid = {*c.scenario.segment_length};
    if (c.scenario.interior_count) cfg.K_grid = {*c.scenario.interior_count};
    BicSelection sel = select_by_bic(data, cfg);
    out << "BIC over " << sel.table.size() << " admissible (I, K) pairs\n";
    fit = std::move(sel.fit);
  }
  io::write_atomic(c.output, io::fit_to_json(fit).dump(2) + "\n");
  const auto& d = fit.diagnostics;
  out << "fit: I=" << d.segment_length << " K=" << d.interior_knots << " RSS=" << io::format_double(d.rss)
      << " BIC=" << io::format_double(d.bic);
  if (d.rank_deficient_groups > 0) out << " (rank-deficient groups: " << d.rank_deficient_groups << ")";
  out << "\nwrote " << c.output << '\n';
  if (!c.grids_dir.empty()) {
    write_grids(fit, c.grids_dir, c.grid_points);
    out << "wrote function grids to " << c.grids_dir << '\n';
  }
  return 0;
}

int run_identify(const CommandConfig& c, std::ostream& out) {
  const TimeSeriesDataset data = io::read_dataset(c.input);
  const VcamFit fit = io::read_fit(c.fit_path);
  if (fit.covariate_count() != data.covariate_count()) {
    throw std::invalid_argument("fit artifact has " + std::to_string(fit.covariate_count()) +
                                " covariates but the dataset has " + std::to_string(data.covariate_count()));
  }
  const IdentificationResult r = identify(data, fit, c.scenario.penalty);
  io::write_atomic(c.output, io::identification_to_json(r, c.scenario.penalty).dump(2) + "\n");
  out << "lambda=" << io::format_double(r.lambda) << " mu=" << io::format_double(r.mu) << " d1=" << r.d1
      << " d2=" << r.d2 << '\n';
  for (std::size_t k = 0; k < r.alpha_constant.size(); ++k) {
    out << "  term " << k + 1 << ": alpha constant=" << (r.alpha_constant[k] ? "yes" : "no")
        << ", beta linear=" << (r.beta_linear[k] ? "yes" : "no") << '\n';
  }
  out << "wrote " << c.output << '\n';
  return 0;
}

int run_grids(const CommandConfig& c, std::ostream& out) {
  const VcamFit fit = io::read_fit(c.fit_path);
  write_grids(fit, c.output, c.grid_points);
  out << "wrote " << fit.alpha.size() + fit.beta.size() << " function grids to " << c.output << '\n';
  return 0;
}

int run_mc(const CommandConfig& c, std::ostream& out) {
  const MonteCarloReport report = run_monte_carlo(c.scenario, c.threads);
  const std::string table = io::report_to_table(report);
  out << table;
  if (!c.output.empty()) {
    io::write_atomic(c.output, io::report_to_csv(report));
    std::filesystem::path table_path(c.output);
    table_path.replace_extension(".txt");
    if (table_path == std::filesystem::path(c.output)) table_path += ".table";
    io::write_atomic(table_path, table);
    out << "wrote " << c.output << " and " << table_path.string() << '\n';
  }
  return 0;
}

}  // namespace

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::runtime_error(key + ": " + message), key_(std::move(key)) {}

const char* to_string(Command command) {
  switch (command) {
    case Command::simulate: return "simulate";
    case Command::fit: return "fit";
    case Command::identify: return "identify";
    case Command::mc: return "mc";
    case Command::grids: return "grids";
  }
  return "unknown";
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_specs()) out.push_back(k.name);
  return out;
}

std::string usage() {
  std::ostringstream os;
  os << "usage: vcam <simulate|fit|identify|mc|grids> [--config FILE] [--key value ...]\n\n"
        "  simulate  --example ex1|ex2 --T N --seed S --output data.csv\n"
        "  fit       --input data.csv --output fit.json [--I N --K N] [--grids DIR]\n"
        "  identify  --input data.csv --fit fit.json --output id.json\n"
        "  mc        --example ex1|ex2 --T N --Q N --seed S [--output report.csv]\n"
        "  grids     --fit fit.json --output DIR\n\nkeys:\n";
  for (const auto& k : key_specs()) {
    os << "  --" << k.name;
    for (std::size_t pad = k.name.size(); pad < 34; ++pad) os << ' ';
    os << k.help << '\n';
  }
  return os.str();
}

CommandConfig parse_config(const std::vector<std::string>& args, const std::optional<std::string>& env_threads) {
  if (args.empty()) throw ConfigError("command", "missing command (simulate, fit, identify, mc, grids)");
  const auto command = parse_command(args.front());
  if (!command) throw ConfigError("command", "unknown command '" + args.front() + "'");

  CLI::App app{"vcam"};
  app.set_help_flag();
  app.allow_extras();
  std::string config_file;
  app.add_option("--config", config_file);
  std::map<std::string, std::string> flag_values;
  for (const auto& k : key_specs()) app.add_option("--" + k.name, flag_values[k.name]);

  std::vector<std::string> rest(args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    throw ConfigError("arguments", e.what());
  }
  for (const auto& extra : app.remaining()) {
    if (extra.rfind("-", 0) == 0) {
      std::string key = extra.substr(extra.find_first_not_of('-'));
      const auto eq = key.find('=');
      if (eq != std::string::npos) key.erase(eq);
      throw ConfigError(key, "unknown key '" + key + "'");
    }
    throw ConfigError("arguments", "unexpected argument '" + extra + "'");
  }

  CommandConfig cfg;
  cfg.command = *command;
  if (env_threads && !trim(*env_threads).empty()) {
    cfg.threads = static_cast<int>(parse_integer("VCAM_THREADS", *env_threads, 1, 1024));
  }
  bool identify_given = false;
  if (app.count("--config") > 0) {
    for (const auto& [key, value] : read_config_file(config_file)) {
      find_key(key)->set(cfg, value);
      if (key == "identify") identify_given = true;
    }
  }
  for (const auto& k : key_specs()) {
    if (app.count("--" + k.name) == 0) continue;
    k.set(cfg, flag_values[k.name]);
    if (k.name == "identify") identify_given = true;
  }
  if (!identify_given) cfg.scenario.identify = cfg.scenario.example == Example::ex2;

  switch (cfg.command) {
    case Command::simulate:
      require(!cfg.output.empty(), "output", cfg.command);
      break;
    case Command::fit:
      require(!cfg.input.empty(), "input", cfg.command);
      require(!cfg.output.empty(), "output", cfg.command);
      require_file(cfg.input, "input");
      break;
    case Command::identify:
      require(!cfg.input.empty(), "input", cfg.command);
      require(!cfg.fit_path.empty(), "fit", cfg.command);
      require(!cfg.output.empty(), "output", cfg.command);
      require_file(cfg.input, "input");
      require_file(cfg.fit_path, "fit");
      break;
    case Command::grids:
      require(!cfg.fit_path.empty(), "fit", cfg.command);
      require(!cfg.output.empty(), "output", cfg.command);
      require_file(cfg.fit_path, "fit");
      break;
    case Command::mc:
      break;
  }
  try {
    cfg.scenario.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", e.what());
  }
  return cfg;
}

int run(const CommandConfig& config, std::ostream& out, std::ostream& err) {
  try {
    switch (config.command) {
      case Command::simulate: return run_simulate(config, out);
      case Command::fit: return run_fit(config, out);
      case Command::identify: return run_identify(config, out);
      case Command::mc: return run_mc(config, out);
      case Command::grids: return run_grids(config, out);
    }
  } catch (const std::exception& e) {
    err << "vcam " << to_string(config.command) << ": error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    err << usage();
    return 2;
  }
  if (args.front() == "--help" || args.front() == "-h" || args.front() == "help") {
    out << usage();
    return 0;
  }
  std::optional<std::string> env;
  if (const char* threads = std::getenv("VCAM_THREADS")) env = threads;
  CommandConfig cfg;
  try {
    cfg = parse_config(args, env);
  } catch (const ConfigError& e) {
    err << "vcam: error: " << e.what() << '\n';
    return 2;
  }
  return run(cfg, out, err);
}

}  // namespace vcam::cli
