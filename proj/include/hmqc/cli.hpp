#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmqc/blackwell.hpp"
#include "hmqc/capacity.hpp"
#include "hmqc/measure.hpp"
#include "hmqc/model.hpp"

/// \file cli.hpp
/// \brief Command-line front end. `run` is the whole program; `main` only forwards to it.

namespace hmqc::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInvalidParams = 2,
  kNotConverged = 3,
  kInconsistent = 4,
};

inline constexpr const char* kCsvHeader = "a,s,d,method,rate_bits,capacity_bits,converged,diagnostic";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that round-trips to the same double; locale independent.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Reads `--config` files as a flat JSON object whose keys are long flag
/// names without the leading dashes. Flat keys apply to the subcommand being
/// run; nested objects address a named subcommand explicitly.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root = nullptr) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string& name = opt->get_lnames().front();
      if (opt->count() > 0)
        j[name] = opt->as<std::string>();
      else if (default_also && !opt->get_default_str().empty())
        j[name] = opt->get_default_str();
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    std::vector<std::string> parents;
    if (root_ != nullptr && !root_->get_subcommands().empty()) parents.push_back(root_->get_subcommands().front()->get_name());
    collect(j, parents, items);
    return items;
  }

 private:
  const CLI::App* root_;

  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) return format_double(v.get<double>());
    return v.dump();
  }

  static void collect(const nlohmann::json& j, std::vector<std::string> parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto sub = parents;
        sub.push_back(key);
        collect(value, sub, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

/// Everything a subcommand may read from the command line or config file.
struct RunConfig {
  std::string subcommand;

  std::optional<double> a, d, s;
  std::optional<double> x0, x1, q00, q10;

  std::string method = "blackwell";
  std::size_t bins = 4096;
  double tol = 1e-10;
  long max_iter = 100000;
  int n = 16;
  int n_max = kDefaultMaxBlock;
  long steps = 1'000'000;
  long burn_in = 10'000;
  std::uint64_t seed = 42;

  std::string out;
  std::string format = "csv";
  std::string plot_script;
  bool strict = false;
  unsigned threads = 0;

  // sweep
  double a_min = kCpLowerBound, a_max = 1.0;
  int a_steps = 41;
  double s_min = 0.0, s_max = 1.0;
  int s_steps = 41;
  std::string d_rule = "max";

  // compare
  double slack = 1e-3;
};

/// Parameters after choosing between the (a, d, s) and raw forms.
struct ResolvedParams {
  ChannelParams channel;
  SymmetricParams symmetric;
  std::vector<Violation> violations;
};

inline ResolvedParams resolve_params(const RunConfig& cfg) {
  const bool sym = cfg.a || cfg.d || cfg.s;
  const bool raw = cfg.x0 || cfg.x1 || cfg.q00 || cfg.q10;
  if (sym && raw) throw UsageError("give parameters either as --a/--d/--s or as --x0/--x1/--q00/--q10, not both");
  ResolvedParams r;
  if (raw) {
    if (!(cfg.x0 && cfg.x1 && cfg.q00 && cfg.q10))
      throw UsageError("the raw parameter form needs all of --x0 --x1 --q00 --q10");
    r.channel = make_params(*cfg.x0, *cfg.x1, *cfg.q00, *cfg.q10);
    r.violations = validate(r.channel);
    r.symmetric = to_symmetric(r.channel);
    return r;
  }
  if (!cfg.a) throw UsageError("missing channel parameters: give --a (with optional --d, --s) or the raw form");
  r.symmetric = {*cfg.a, cfg.d.value_or(0.0), cfg.s.value_or(0.0)};
  r.violations = validate(r.symmetric);
  if (r.violations.empty()) r.channel = from_symmetric(r.symmetric);
  return r;
}

inline DRule parse_d_rule(const std::string& text) {
  if (text == "max") return DRule::max();
  std::string body = text;
  if (body.rfind("fixed(", 0) == 0 && body.back() == ')')
    body = body.substr(6, body.size() - 7);
  else if (body.rfind("fixed:", 0) == 0)
    body = body.substr(6);
  double v = 0.0;
  const auto res = std::from_chars(body.data(), body.data() + body.size(), v);
  if (res.ec != std::errc{} || res.ptr != body.data() + body.size())
    throw UsageError("--d-rule must be 'max' or 'fixed(<d>)', got '" + text + "'");
  return DRule::fixed(v);
}

inline MethodOptions method_options(const RunConfig& cfg) {
  const auto m = parse_method(cfg.method);
  if (!m) throw UsageError("--method must be one of blackwell, block, mc; got '" + cfg.method + "'");
  MethodOptions opt;
  opt.method = *m;
  opt.fixed_point = {cfg.bins, cfg.tol, cfg.max_iter};
  opt.monte_carlo.steps = cfg.steps;
  opt.monte_carlo.burn_in = cfg.burn_in;
  opt.monte_carlo.seed = cfg.seed;
  opt.n = cfg.n;
  opt.n_max = cfg.n_max;
  return opt;
}

/// The semicolon-separated `diagnostic` column.
inline std::string diagnostic(const RateEstimate& r) {
  std::string out;
  switch (r.method) {
    case RateMethod::fixed_point:
      out = "bins=" + std::to_string(r.bins) + ";iterations=" + std::to_string(r.iterations) +
            ";residual=" + format_double(r.residual);
      break;
    case RateMethod::block_upper:
    case RateMethod::block_lower:
      out = "n=" + std::to_string(r.n) + ";upper=" + format_double(r.upper) + ";lower=" + format_double(r.lower);
      break;
    case RateMethod::monte_carlo:
      out = "steps=" + std::to_string(r.iterations) + ";burn_in=" + std::to_string(r.burn_in) +
            ";seed=" + std::to_string(r.seed) + ";std_error=" + format_double(r.std_error);
      break;
  }
  if (!r.ergodic) out += ";reducible";
  return out;
}

inline nlohmann::json diagnostic_json(const RateEstimate& r) {
  nlohmann::json j;
  switch (r.method) {
    case RateMethod::fixed_point:
      j = {{"bins", r.bins}, {"iterations", r.iterations}, {"residual", r.residual}};
      break;
    case RateMethod::block_upper:
    case RateMethod::block_lower:
      j = {{"n", r.n}, {"upper", r.upper}, {"lower", r.lower}};
      break;
    case RateMethod::monte_carlo:
      j = {{"steps", r.iterations}, {"burn_in", r.burn_in}, {"seed", r.seed}, {"std_error", r.std_error}};
      break;
  }
  j["reducible"] = !r.ergodic;
  return j;
}

inline std::string csv_row(const SymmetricParams& p, const RateEstimate& r, double capacity,
                           const std::string& extra = {}) {
  std::string diag = diagnostic(r);
  if (!extra.empty()) diag += ";" + extra;
  return format_double(p.a) + "," + format_double(p.s) + "," + format_double(p.d) + "," +
         std::string(to_string(r.method)) + "," + format_double(r.rate) + "," + format_double(capacity) + "," +
         (r.converged ? "true" : "false") + "," + diag;
}

inline nlohmann::json json_row(const SymmetricParams& p, const RateEstimate& r, double capacity) {
  return {{"a", p.a},
          {"s", p.s},
          {"d", p.d},
          {"method", std::string(to_string(r.method))},
          {"rate_bits", r.rate},
          {"capacity_bits", capacity},
          {"converged", r.converged},
          {"diagnostic", diagnostic_json(r)}};
}

/// Writes to --out when given, else to `fallback`.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw UsageError("cannot open output file '" + path + "'");
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

/// gnuplot script drawing the (a, s, C*) surface from a sweep CSV.
inline std::string plot_script(const std::string& csv_path, int a_steps, int s_steps) {
  std::ostringstream os;
  os << "# Capacity surface from a sweep CSV; run with: gnuplot -persist <this file>\n"
     << "set datafile separator ','\n"
     << "set key off\n"
     << "set xlabel 'a'\n"
     << "set ylabel 's'\n"
     << "set zlabel 'C* (bits/use)' rotate parallel\n"
     << "set xrange [1.0/3:1]\n"
     << "set yrange [0:1]\n"
     << "set zrange [0:*]\n"
     << "set ticslevel 0\n"
     << "set hidden3d\n"
     << "set dgrid3d " << s_steps << "," << a_steps << "\n"
     << "set pm3d\n"
     << "splot '" << csv_path << "' skip 1 using 1:2:6 with lines\n";
  return os.str();
}

namespace detail {

inline void add_param_flags(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--a", cfg.a, "average no-flip probability");
  sub.add_option("--d", cfg.d, "half-difference of the no-flip probabilities");
  sub.add_option("--s", cfg.s, "switching correlation, q00 = q11 = (1 + s) / 2");
  sub.add_option("--x0", cfg.x0, "no-flip probability of sub-channel 0 (raw form)");
  sub.add_option("--x1", cfg.x1, "no-flip probability of sub-channel 1 (raw form)");
  sub.add_option("--q00", cfg.q00, "probability of staying on sub-channel 0 (raw form)");
  sub.add_option("--q10", cfg.q10, "probability of switching from sub-channel 1 to 0 (raw form)");
}

inline void add_method_flags(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--method", cfg.method, "blackwell | block | mc")->capture_default_str();
  sub.add_option("--bins", cfg.bins, "grid nodes for the fixed point")->check(CLI::Range(2ul, 1ul << 26))
      ->capture_default_str();
  sub.add_option("--tol", cfg.tol, "L1 convergence tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  sub.add_option("--max-iter", cfg.max_iter, "fixed-point iteration cap")->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub.add_option("--n", cfg.n, "block length for the block method")->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub.add_option("--n-max", cfg.n_max, "largest block length allowed")->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub.add_option("--steps", cfg.steps, "Monte-Carlo steps")->check(CLI::PositiveNumber)->capture_default_str();
  sub.add_option("--burn-in", cfg.burn_in, "Monte-Carlo burn-in steps")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub.add_option("--seed", cfg.seed, "Monte-Carlo seed")->capture_default_str();
}

inline void add_output_flags(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--out", cfg.out, "output file (default: standard output)");
  sub.add_option("--format", cfg.format, "csv | json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  sub.add_flag("--strict", cfg.strict, "exit 3 when a fixed point does not converge");
  sub.add_option("--threads", cfg.threads, "worker threads (0 = all cores)")->capture_default_str();
}

inline void check_block_limits(const RunConfig& cfg, std::ostream& err) {
  if (cfg.n_max > kHardMaxBlock)
    throw ResourceLimitError("--n-max " + std::to_string(cfg.n_max) + " exceeds the hard cap " +
                             std::to_string(kHardMaxBlock));
  if (cfg.n_max > kDefaultMaxBlock)
    err << "warning: --n-max " << cfg.n_max << " enumerates up to 2^" << cfg.n_max
        << " words; expect long runtimes and large memory use\n";
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const auto p = resolve_params(cfg);
  if (p.violations.empty()) {
    out << "ok\n";
    return kOk;
  }
  for (const auto& v : p.violations) out << v.message << "\n";
  return kInvalidParams;
}

inline int cmd_entropy_rate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto p = resolve_params(cfg);
  if (!p.violations.empty()) throw ValidationError(p.violations);
  const auto opt = method_options(cfg);
  if (opt.method == Method::block) {
    check_block_limits(cfg, err);
    check_block_length(cfg.n, cfg.n_max);
  }
  const CapacityResult r = capacity(p.channel, opt);
  const SymmetricParams shown = p.symmetric;
  Output o(cfg.out, out);
  if (cfg.format == "json") {
    *o << json_row(shown, r.rate, r.capacity).dump(2) << "\n";
  } else {
    *o << kCsvHeader << "\n" << csv_row(shown, r.rate, r.capacity) << "\n";
  }
  if (!r.rate.converged) {
    err << "warning: fixed point did not converge (residual " << format_double(r.rate.residual) << ")\n";
    if (cfg.strict) return kNotConverged;
  }
  return kOk;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.a_steps < 1 || cfg.s_steps < 1) throw UsageError("--a-steps and --s-steps must be at least 1");
  SweepSpec spec;
  spec.a_min = cfg.a_min;
  spec.a_max = cfg.a_max;
  spec.a_steps = cfg.a_steps;
  spec.s_min = cfg.s_min;
  spec.s_max = cfg.s_max;
  spec.s_steps = cfg.s_steps;
  spec.d_rule = parse_d_rule(cfg.d_rule);
  spec.method = method_options(cfg);
  spec.threads = cfg.threads;
  if (spec.method.method == Method::block) {
    check_block_limits(cfg, err);
    check_block_length(cfg.n, cfg.n_max);
  }

  const SweepResult res = sweep(spec);
  for (const auto& sk : res.skipped)
    err << "skipped a=" << format_double(sk.a) << " s=" << format_double(sk.s) << " d=" << format_double(sk.d)
        << ": " << sk.reason << "\n";

  std::size_t failures = 0;
  {
    Output o(cfg.out, out);
    if (cfg.format == "json") {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : res.rows) rows.push_back(json_row(r.params, r.rate, r.capacity));
      *o << rows.dump(2) << "\n";
    } else {
      *o << kCsvHeader << "\n";
      for (const auto& r : res.rows) *o << csv_row(r.params, r.rate, r.capacity) << "\n";
    }
  }
  for (const auto& r : res.rows) failures += r.rate.converged ? 0 : 1;

  if (!cfg.plot_script.empty()) {
    std::ofstream script(cfg.plot_script, std::ios::binary);
    if (!script) throw UsageError("cannot open plot script file '" + cfg.plot_script + "'");
    script << plot_script(cfg.out.empty() ? "sweep.csv" : cfg.out, spec.a_steps, spec.s_steps);
  }
  err << res.rows.size() << " points, " << res.skipped.size() << " skipped, " << failures << " not converged\n";
  return failures > 0 && cfg.strict ? kNotConverged : kOk;
}

inline int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto p = resolve_params(cfg);
  if (!p.violations.empty()) throw ValidationError(p.violations);
  check_block_limits(cfg, err);
  if (cfg.n < 2) throw UsageError("--n must be at least 2 for the block bounds");
  check_block_length(cfg.n, cfg.n_max);

  MethodOptions opt = method_options(cfg);
  const TracedMatrices m = build_traced_matrices(p.channel);
  const RateEstimate block = entropy_rate_block(m, cfg.n, cfg.n_max);
  RateEstimate lower = block;
  lower.method = RateMethod::block_lower;
  lower.rate = std::clamp(block.lower, 0.0, 1.0);
  const RateEstimate fp = entropy_rate_fixed_point(m, opt.fixed_point);
  const RateEstimate mc = entropy_rate_monte_carlo(m, opt.monte_carlo);

  const bool inside = fp.rate >= block.lower - cfg.slack && fp.rate <= block.upper + cfg.slack;
  const std::string verdict = inside ? "inside" : "outside";

  Output o(cfg.out, out);
  const SymmetricParams shown = p.symmetric;
  if (cfg.format == "json") {
    nlohmann::json j = nlohmann::json::object();
    j["a"] = shown.a;
    j["s"] = shown.s;
    j["d"] = shown.d;
    j["estimates"] = nlohmann::json::array({json_row(shown, block, 1.0 - block.rate),
                                            json_row(shown, lower, 1.0 - lower.rate),
                                            json_row(shown, fp, 1.0 - fp.rate),
                                            json_row(shown, mc, 1.0 - mc.rate)});
    j["slack"] = cfg.slack;
    j["verdict"] = verdict;
    *o << j.dump(2) << "\n";
  } else {
    *o << kCsvHeader << "\n";
    *o << csv_row(shown, block, 1.0 - block.rate) << "\n";
    *o << csv_row(shown, lower, 1.0 - lower.rate) << "\n";
    *o << csv_row(shown, fp, 1.0 - fp.rate, "verdict=" + verdict) << "\n";
    *o << csv_row(shown, mc, 1.0 - mc.rate) << "\n";
  }
  if (!inside) {
    err << "error: fixed-point rate " << format_double(fp.rate) << " is outside [" << format_double(block.lower)
        << ", " << format_double(block.upper) << "] +/- " << format_double(cfg.slack) << "\n";
    return kInconsistent;
  }
  if (!fp.converged && cfg.strict) return kNotConverged;
  return kOk;
}

}  // namespace detail

/// Runs the program. Data goes to `out`, logs and errors to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Entropy rate and classical capacity of a Markov-switched depolarizing channel", "hmqc"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON file of flag values; command-line flags take precedence");

  CLI::App* validate_cmd = app.add_subcommand("validate", "check channel parameters");
  detail::add_param_flags(*validate_cmd, cfg);

  CLI::App* rate_cmd = app.add_subcommand("entropy-rate", "entropy rate of the flip process");
  CLI::App* cap_cmd = app.add_subcommand("capacity", "classical product-state capacity");
  for (CLI::App* sub : {rate_cmd, cap_cmd}) {
    detail::add_param_flags(*sub, cfg);
    detail::add_method_flags(*sub, cfg);
    detail::add_output_flags(*sub, cfg);
  }

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "capacity over an (a, s) grid");
  detail::add_method_flags(*sweep_cmd, cfg);
  detail::add_output_flags(*sweep_cmd, cfg);
  sweep_cmd->add_option("--a-min", cfg.a_min)->capture_default_str();
  sweep_cmd->add_option("--a-max", cfg.a_max)->capture_default_str();
  sweep_cmd->add_option("--a-steps", cfg.a_steps)->capture_default_str();
  sweep_cmd->add_option("--s-min", cfg.s_min)->capture_default_str();
  sweep_cmd->add_option("--s-max", cfg.s_max)->capture_default_str();
  sweep_cmd->add_option("--s-steps", cfg.s_steps)->capture_default_str();
  sweep_cmd->add_option("--d-rule", cfg.d_rule, "max | fixed(<d>)")->capture_default_str();
  sweep_cmd->add_option("--plot-script", cfg.plot_script, "also write a gnuplot script for the surface");

  CLI::App* compare_cmd = app.add_subcommand("compare", "block bounds vs fixed point vs Monte Carlo");
  detail::add_param_flags(*compare_cmd, cfg);
  detail::add_method_flags(*compare_cmd, cfg);
  detail::add_output_flags(*compare_cmd, cfg);
  compare_cmd->add_option("--slack", cfg.slack, "allowed distance outside the block bounds")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (validate_cmd->parsed()) return detail::cmd_validate(cfg, out);
    if (rate_cmd->parsed() || cap_cmd->parsed()) return detail::cmd_entropy_rate(cfg, out, err);
    if (sweep_cmd->parsed()) return detail::cmd_sweep(cfg, out, err);
    if (compare_cmd->parsed()) return detail::cmd_compare(cfg, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) err << "invalid: " << v.message << "\n";
    return kInvalidParams;
  } catch (const ResourceLimitError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidParams;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidParams;
  }
  return kUsage;
}

}  // namespace hmqc::cli
