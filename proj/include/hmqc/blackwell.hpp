#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "hmqc/measure.hpp"
#include "hmqc/model.hpp"

/// \file blackwell.hpp
/// \brief Entropy rate from the invariant measure of the belief process.
///
/// The belief p is the posterior probability that the most recent channel use
/// went through sub-channel 0. After observing symbol a it moves to
/// f_a(p) = (w e_a)_0 / Z_a(p), w = (p, 1 - p), with probability
/// Z_a(p) = w e_a 1. The law of p converges to an invariant measure phi, and
/// the entropy rate is the phi-average of the one-step emission entropy.
/// phi is found by iterating the pushforward on a grid of belief values.

namespace hmqc {

/// Posterior probability that the current hidden sub-channel is channel 0.
struct BeliefState {
  double p = 0.5;
};

class ImpossibleObservation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class RateMethod { fixed_point, monte_carlo, block_upper, block_lower };

[[nodiscard]] constexpr std::string_view to_string(RateMethod m) noexcept {
  switch (m) {
    case RateMethod::fixed_point:
      return "fixed-point";
    case RateMethod::monte_carlo:
      return "monte-carlo";
    case RateMethod::block_upper:
      return "block-upper";
    case RateMethod::block_lower:
      return "block-lower";
  }
  return "unknown";
}

/// An entropy-rate value plus whatever diagnostics its method produced.
struct RateEstimate {
  double rate = 0.0;  ///< bits per channel use
  RateMethod method = RateMethod::fixed_point;
  long iterations = 0;  ///< fixed-point iterations or Monte-Carlo steps
  bool converged = true;
  double residual = 0.0;  ///< final L1 step (fixed point) or standard error (Monte Carlo)
  bool ergodic = true;    ///< false when the switching chain is reducible

  std::size_t bins = 0;     // fixed point
  std::uint64_t seed = 0;   // Monte Carlo
  long burn_in = 0;         // Monte Carlo
  double std_error = 0.0;   // Monte Carlo, batch means
  int n = 0;                // block bounds
  double upper = 0.0;       // block bounds
  double lower = 0.0;       // block bounds
};

[[nodiscard]] inline double emission_probability(const TracedMatrices& m, BeliefState b, Symbol a) noexcept {
  const Vec2 v = Vec2{b.p, 1.0 - b.p} * m[a];
  return v[0] + v[1];
}

/// f_a(p). Throws ImpossibleObservation when Z_a(p) = 0.
[[nodiscard]] inline BeliefState belief_update(const TracedMatrices& m, BeliefState b, Symbol a) {
  const Vec2 v = Vec2{b.p, 1.0 - b.p} * m[a];
  const double z = v[0] + v[1];
  if (!(z > 0.0))
    throw ImpossibleObservation("symbol " + std::to_string(index(a)) + " has zero probability at belief " +
                                detail::fmt_num(b.p));
  return {v[0] / z};
}

/// Entropy (bits) of the next symbol given belief b.
[[nodiscard]] inline double step_entropy(const TracedMatrices& m, BeliefState b) noexcept {
  return entropy_term(emission_probability(m, b, Symbol::no_flip)) +
         entropy_term(emission_probability(m, b, Symbol::flip));
}

/// A probability measure on the belief interval carried by N equally spaced
/// nodes k / (N - 1), k = 0..N-1. The endpoints are nodes, so point masses at
/// certain beliefs are represented exactly.
class GridMeasure {
 public:
  explicit GridMeasure(std::size_t bins) : weights_(bins, 0.0) {
    if (bins < 2) throw std::invalid_argument("grid needs at least 2 nodes");
  }

  static GridMeasure uniform(std::size_t bins) {
    GridMeasure g(bins);
    for (auto& w : g.weights_) w = 1.0 / static_cast<double>(bins);
    return g;
  }

  static GridMeasure point_mass(std::size_t bins, double p) {
    GridMeasure g(bins);
    g.deposit(p, 1.0);
    return g;
  }

  [[nodiscard]] std::size_t bins() const noexcept { return weights_.size(); }
  [[nodiscard]] double node(std::size_t k) const noexcept {
    return static_cast<double>(k) / static_cast<double>(weights_.size() - 1);
  }
  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
  [[nodiscard]] double operator[](std::size_t k) const noexcept { return weights_[k]; }

  [[nodiscard]] double total() const noexcept {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }

  /// Adds `mass` at belief p, split linearly between the two nearest nodes.
  void deposit(double p, double mass) noexcept {
    const auto [k, upper_share] = locate(p);
    const double up = mass * upper_share;
    weights_[k] += mass - up;
    if (up != 0.0) weights_[k + 1] += up;
  }

  /// Lower node index and the fraction of mass that goes to the next node.
  [[nodiscard]] std::pair<std::size_t, double> locate(double p) const noexcept {
    const std::size_t last = weights_.size() - 1;
    const double t = std::clamp(p, 0.0, 1.0) * static_cast<double>(last);
    auto k = static_cast<std::size_t>(t);
    if (k >= last) return {last, 0.0};
    return {k, t - static_cast<double>(k)};
  }

  [[nodiscard]] friend double l1_distance(const GridMeasure& x, const GridMeasure& y) noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < x.weights_.size(); ++k) s += std::abs(x.weights_[k] - y.weights_[k]);
    return s;
  }

  [[nodiscard]] double integrate(const auto& f) const {
    double s = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k)
      if (weights_[k] != 0.0) s += weights_[k] * f(node(k));
    return s;
  }

  std::vector<double>& mutable_weights() noexcept { return weights_; }

 private:
  std::vector<double> weights_;
};

/// The one-step pushforward on a fixed grid, with the node images precomputed.
class TransferOperator {
 public:
  TransferOperator(const TracedMatrices& m, std::size_t bins) : bins_(bins), moves_(bins) {
    const GridMeasure layout(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const BeliefState b{layout.node(k)};
      const double z0 = emission_probability(m, b, Symbol::no_flip);
      // Symbol masses as z0 and 1 - z0 so each node's outflow sums to its weight.
      const std::array<double, 2> z{z0, 1.0 - z0};
      for (Symbol a : kSymbols) {
        Move& mv = moves_[k][index(a)];
        mv.prob = z[index(a)];
        if (!(emission_probability(m, b, a) > 0.0)) {
          // zero-probability branch: no mass is sent; keep any rounding residue at home
          mv.target = k;
          mv.share = 0.0;
          continue;
        }
        std::tie(mv.target, mv.share) = layout.locate(belief_update(m, b, a).p);
      }
    }
  }

  [[nodiscard]] std::size_t bins() const noexcept { return bins_; }

  [[nodiscard]] GridMeasure apply(const GridMeasure& g) const {
    if (g.bins() != bins_) throw std::invalid_argument("grid size mismatch");
    GridMeasure out(bins_);
    apply_into(g, out);
    return out;
  }

  void apply_into(const GridMeasure& g, GridMeasure& out) const {
    auto& w = out.mutable_weights();
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t k = 0; k < bins_; ++k) {
      const double mass = g[k];
      if (mass == 0.0) continue;
      const double m0 = mass * moves_[k][0].prob;
      const double m1 = mass - m0;
      send(w, moves_[k][0], m0);
      send(w, moves_[k][1], m1);
    }
  }

 private:
  struct Move {
    std::size_t target = 0;
    double share = 0.0;
    double prob = 0.0;
  };

  static void send(std::vector<double>& w, const Move& mv, double mass) noexcept {
    if (mass == 0.0) return;
    const double up = mass * mv.share;
    w[mv.target] += mass - up;
    if (up != 0.0) w[mv.target + 1] += up;
  }

  std::size_t bins_;
  std::vector<std::array<Move, 2>> moves_;
};

[[nodiscard]] inline GridMeasure apply_transfer_operator(const TracedMatrices& m, const GridMeasure& g) {
  return TransferOperator(m, g.bins()).apply(g);
}

struct FixedPointOptions {
  std::size_t bins = 4096;
  double tol = 1e-10;  ///< L1 distance between successive iterates
  long max_iter = 100000;
};

struct FixedPointResult {
  GridMeasure measure;
  long iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Iterates the transfer operator until successive iterates are within `tol`
/// in L1. Starts from the uniform grid measure; for a reducible switching
/// chain the invariant measure is not unique, and the start is instead the
/// point mass at the prior pi[0], which selects the ergodic mixture weighted by pi.
[[nodiscard]] inline FixedPointResult fixed_point(const TracedMatrices& m, const FixedPointOptions& opt = {}) {
  if (opt.bins < 2) throw std::invalid_argument("bins must be at least 2");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (opt.max_iter < 1) throw std::invalid_argument("max_iter must be positive");

  const TransferOperator op(m, opt.bins);
  GridMeasure current = m.pi_unique ? GridMeasure::uniform(opt.bins) : GridMeasure::point_mass(opt.bins, m.pi[0]);
  GridMeasure next(opt.bins);
  FixedPointResult r{current, 0, 0.0, false};
  for (long it = 1; it <= opt.max_iter; ++it) {
    op.apply_into(current, next);
    r.residual = l1_distance(current, next);
    std::swap(current, next);
    r.iterations = it;
    if (r.residual < opt.tol) {
      r.converged = true;
      break;
    }
  }
  r.measure = std::move(current);
  return r;
}

/// Integral of the one-step entropy against the fixed-point measure.
[[nodiscard]] inline RateEstimate entropy_rate_fixed_point(const TracedMatrices& m,
                                                          const FixedPointOptions& opt = {}) {
  const auto fp = fixed_point(m, opt);
  RateEstimate r;
  r.method = RateMethod::fixed_point;
  r.rate = std::clamp(fp.measure.integrate([&](double p) { return step_entropy(m, {p}); }), 0.0, 1.0);
  r.iterations = fp.iterations;
  r.converged = fp.converged;
  r.residual = fp.residual;
  r.ergodic = m.pi_unique;
  r.bins = opt.bins;
  return r;
}

struct MonteCarloOptions {
  long steps = 1'000'000;
  long burn_in = 10'000;
  std::uint64_t seed = 42;
  int batches = 100;  ///< batch count for the standard error
};

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
[[nodiscard]] inline double uniform01(std::mt19937_64& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Time average of the one-step entropy along one simulated belief trajectory
/// started from p = pi[0]. The standard error comes from batch means.
[[nodiscard]] inline RateEstimate entropy_rate_monte_carlo(const TracedMatrices& m,
                                                          const MonteCarloOptions& opt = {}) {
  if (opt.burn_in < 0 || opt.steps <= opt.burn_in)
    throw std::invalid_argument("Monte Carlo needs steps > burn_in >= 0");
  if (opt.batches < 2) throw std::invalid_argument("Monte Carlo needs at least 2 batches");

  std::mt19937_64 rng(opt.seed);
  const long kept = opt.steps - opt.burn_in;
  const long batch_len = std::max<long>(1, kept / opt.batches);
  std::vector<double> batch_means;
  double batch_sum = 0.0;
  long in_batch = 0;
  double total = 0.0;

  BeliefState b{m.pi[0]};
  for (long t = 0; t < opt.steps; ++t) {
    const double z0 = emission_probability(m, b, Symbol::no_flip);
    if (t >= opt.burn_in) {
      const double h = entropy_term(z0) + entropy_term(emission_probability(m, b, Symbol::flip));
      total += h;
      batch_sum += h;
      if (++in_batch == batch_len) {
        batch_means.push_back(batch_sum / static_cast<double>(batch_len));
        batch_sum = 0.0;
        in_batch = 0;
      }
    }
    const Symbol a = uniform01(rng) < z0 ? Symbol::no_flip : Symbol::flip;
    b = belief_update(m, b, a);
  }

  RateEstimate r;
  r.method = RateMethod::monte_carlo;
  r.rate = std::clamp(total / static_cast<double>(kept), 0.0, 1.0);
  r.iterations = opt.steps;
  r.seed = opt.seed;
  r.burn_in = opt.burn_in;
  r.ergodic = m.pi_unique;
  if (batch_means.size() >= 2) {
    double mean = 0.0;
    for (double x : batch_means) mean += x;
    mean /= static_cast<double>(batch_means.size());
    double var = 0.0;
    for (double x : batch_means) var += (x - mean) * (x - mean);
    var /= static_cast<double>(batch_means.size() - 1);
    r.std_error = std::sqrt(var / static_cast<double>(batch_means.size()));
  }
  r.residual = r.std_error;
  return r;
}

/// Block-entropy bounds packaged as a rate estimate; `rate` is the upper bound.
[[nodiscard]] inline RateEstimate entropy_rate_block(const TracedMatrices& m, int n,
                                                     int n_max = kDefaultMaxBlock) {
  const auto rep = entropy_rate_bounds(m, n, n_max);
  RateEstimate r;
  r.method = RateMethod::block_upper;
  r.rate = std::clamp(rep.upper, 0.0, 1.0);
  r.n = n;
  r.upper = rep.upper;
  r.lower = rep.lower;
  r.residual = rep.upper - rep.lower;
  r.ergodic = m.pi_unique;
  return r;
}

}  // namespace hmqc
