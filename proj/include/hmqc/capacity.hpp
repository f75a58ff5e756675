#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hmqc/blackwell.hpp"
#include "hmqc/measure.hpp"
#include "hmqc/model.hpp"

/// \file capacity.hpp
/// \brief Product-state capacity C* = 1 - entropy rate, and parameter sweeps.

namespace hmqc {

enum class Method { blackwell, block, monte_carlo };

[[nodiscard]] constexpr std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::blackwell:
      return "blackwell";
    case Method::block:
      return "block";
    case Method::monte_carlo:
      return "mc";
  }
  return "unknown";
}

[[nodiscard]] inline std::optional<Method> parse_method(std::string_view s) noexcept {
  if (s == "blackwell" || s == "fixed-point") return Method::blackwell;
  if (s == "block") return Method::block;
  if (s == "mc" || s == "monte-carlo") return Method::monte_carlo;
  return std::nullopt;
}

struct MethodOptions {
  Method method = Method::blackwell;
  FixedPointOptions fixed_point{};
  MonteCarloOptions monte_carlo{};
  int n = 16;  ///< block length for Method::block
  int n_max = kDefaultMaxBlock;
};

[[nodiscard]] inline RateEstimate entropy_rate(const TracedMatrices& m, const MethodOptions& opt = {}) {
  switch (opt.method) {
    case Method::blackwell:
      return entropy_rate_fixed_point(m, opt.fixed_point);
    case Method::block:
      return entropy_rate_block(m, opt.n, opt.n_max);
    case Method::monte_carlo:
      return entropy_rate_monte_carlo(m, opt.monte_carlo);
  }
  throw std::invalid_argument("unknown method");
}

struct CapacityResult {
  SymmetricParams params;
  RateEstimate rate;
  double capacity = 0.0;  ///< bits per channel use
};

[[nodiscard]] inline CapacityResult capacity(const ChannelParams& p, const MethodOptions& opt = {}) {
  CapacityResult r;
  r.params = to_symmetric(p);
  r.rate = entropy_rate(build_traced_matrices(p), opt);
  r.capacity = 1.0 - r.rate.rate;
  return r;
}

[[nodiscard]] inline CapacityResult capacity(const SymmetricParams& p, const MethodOptions& opt = {}) {
  CapacityResult r = capacity(from_symmetric(p), opt);
  r.params = p;
  return r;
}

/// How d is chosen for each average a.
struct DRule {
  enum class Kind { max, fixed };
  Kind kind = Kind::max;
  double value = 0.0;

  static DRule max() noexcept { return {}; }
  static DRule fixed(double d) noexcept { return {Kind::fixed, d}; }

  /// Largest d keeping both a + d and a - d inside [1/3, 1], i.e.
  /// min(a - 1/3, 1 - a), nudged down so the rounded sums stay valid.
  [[nodiscard]] static double max_for(double a) noexcept {
    double d = std::max(0.0, std::min(a - kCpLowerBound, 1.0 - a));
    while (d > 0.0 && (a - d < kCpLowerBound || a + d > 1.0)) d = std::nextafter(d, 0.0);
    return d;
  }

  [[nodiscard]] double operator()(double a) const noexcept { return kind == Kind::max ? max_for(a) : value; }
};

/// n points from lo to hi inclusive; a single point is lo.
[[nodiscard]] inline std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("grid needs at least one point");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    out[static_cast<std::size_t>(k)] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / (n - 1);
  if (n > 1) out.back() = hi;
  return out;
}

struct SweepSpec {
  double a_min = kCpLowerBound, a_max = 1.0;
  int a_steps = 41;
  double s_min = 0.0, s_max = 1.0;
  int s_steps = 41;
  DRule d_rule = DRule::max();
  MethodOptions method{};
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

struct SkippedPoint {
  double a = 0.0, s = 0.0, d = 0.0;
  std::string reason;
};

struct SweepResult {
  std::vector<CapacityResult> rows;  ///< a outer, s inner
  std::vector<SkippedPoint> skipped;
};

namespace detail {

/// Runs `task(i)` for i in [0, count) on up to `threads` workers.
template <typename Task>
void parallel_for(std::size_t count, unsigned threads, Task&& task) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            task(i);
          } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Capacity over the (a, s) grid. CP-invalid points are skipped and listed,
/// never clamped. Output order is the grid order whatever the thread count.
[[nodiscard]] inline SweepResult sweep(const SweepSpec& spec) {
  if (spec.a_steps < 1 || spec.s_steps < 1) throw std::invalid_argument("sweep grids must be nonempty");
  const auto as = linspace(spec.a_min, spec.a_max, spec.a_steps);
  const auto ss = linspace(spec.s_min, spec.s_max, spec.s_steps);

  SweepResult out;
  std::vector<SymmetricParams> points;
  for (double a : as) {
    for (double s : ss) {
      const SymmetricParams p{a, spec.d_rule(a), s};
      if (auto v = validate(p); !v.empty())
        out.skipped.push_back({p.a, p.s, p.d, ValidationError::describe(v)});
      else
        points.push_back(p);
    }
  }
  out.rows.resize(points.size());
  detail::parallel_for(points.size(), spec.threads,
                       [&](std::size_t i) { out.rows[i] = capacity(points[i], spec.method); });
  return out;
}

struct SensitivityRow {
  double a = 0.0, d = 0.0;
  double c_low = 0.0, c_high = 0.0;
  [[nodiscard]] double difference() const noexcept { return c_high - c_low; }
};

struct SensitivityReport {
  std::vector<SensitivityRow> rows;
  std::size_t argmax = 0;  ///< row with the largest capacity difference
};

/// C*(a, s_high) - C*(a, s_low) for every a, and where it peaks.
[[nodiscard]] inline SensitivityReport s_sensitivity(const std::vector<double>& a_grid, double s_low, double s_high,
                                                     DRule d_rule, const MethodOptions& method = {},
                                                     unsigned threads = 0) {
  if (!(s_low < s_high)) throw std::invalid_argument("s_sensitivity needs s_low < s_high");
  if (a_grid.empty()) throw std::invalid_argument("a grid must be nonempty");
  SensitivityReport rep;
  rep.rows.resize(a_grid.size());
  detail::parallel_for(a_grid.size(), threads, [&](std::size_t i) {
    const double a = a_grid[i];
    const double d = d_rule(a);
    rep.rows[i] = {a, d, capacity(SymmetricParams{a, d, s_low}, method).capacity,
                   capacity(SymmetricParams{a, d, s_high}, method).capacity};
  });
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (rep.rows[i].difference() > rep.rows[rep.argmax].difference()) rep.argmax = i;
  return rep;
}

}  // namespace hmqc
