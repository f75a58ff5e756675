#pragma once

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

/// \file model.hpp
/// \brief Channel parameters and the matrices of the hidden Markov flip process.
///
/// The channel switches between two depolarizing qubit channels with a
/// two-state Markov chain. Sub-channel i leaves a qubit alone with probability
/// x_i and flips it with probability 1 - x_i. The visible process is the flip
/// pattern; the channel index is hidden.

namespace hmqc {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<Vec2, 2>;
using Vec4 = std::array<double, 4>;
using Mat4 = std::array<Vec4, 4>;

/// Lower complete-positivity bound on a no-flip probability.
inline constexpr double kCpLowerBound = 1.0 / 3.0;
/// Absolute tolerance for stochasticity checks.
inline constexpr double kStochasticTol = 1e-12;

/// Observed symbol: whether the qubit was flipped.
enum class Symbol : unsigned char { no_flip = 0, flip = 1 };

inline constexpr std::array<Symbol, 2> kSymbols{Symbol::no_flip, Symbol::flip};

constexpr int index(Symbol a) noexcept { return static_cast<int>(a); }

/// Raw channel parameters.
struct ChannelParams {
  double x0 = 1.0;  ///< no-flip probability of sub-channel 0
  double x1 = 1.0;  ///< no-flip probability of sub-channel 1
  double q00 = 1.0, q01 = 0.0, q10 = 0.0, q11 = 1.0;
  double gamma0 = 0.5, gamma1 = 0.5;

  /// Probability that sub-channel `channel` emits `a`.
  [[nodiscard]] double emission(int channel, Symbol a) const noexcept {
    const double keep = channel == 0 ? x0 : x1;
    return a == Symbol::no_flip ? keep : 1.0 - keep;
  }

  [[nodiscard]] Mat2 switching() const noexcept { return {{{q00, q01}, {q10, q11}}}; }
};

/// Average/difference/correlation form: x0 = a + d, x1 = a - d,
/// q00 = q11 = (1 + s) / 2.
struct SymmetricParams {
  double a = 1.0;
  double d = 0.0;
  double s = 0.0;
};

/// One violated parameter constraint.
struct Violation {
  std::string field;
  double value = 0.0;
  std::string message;
};

/// Thrown when parameters fail validation.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<Violation> violations)
      : std::invalid_argument(describe(violations)), violations_(std::move(violations)) {}

  [[nodiscard]] const std::vector<Violation>& violations() const noexcept { return violations_; }

  static std::string describe(const std::vector<Violation>& vs) {
    std::string out;
    for (const auto& v : vs) {
      if (!out.empty()) out += "; ";
      out += v.message;
    }
    return out;
  }

 private:
  std::vector<Violation> violations_;
};

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(6);
  os << v;
  return os.str();
}

inline void check_cp(std::vector<Violation>& out, const std::string& name, double v) {
  if (!(v >= kCpLowerBound))
    out.push_back({name, v, name + "=" + fmt_num(v) + " violates CP bound 1/3 (" + name + " < 1/3)"});
  else if (!(v <= 1.0))
    out.push_back({name, v, name + "=" + fmt_num(v) + " exceeds 1 (" + name + " > 1)"});
}

inline void check_probability(std::vector<Violation>& out, const std::string& name, double v) {
  if (!(v >= 0.0 && v <= 1.0))
    out.push_back({name, v, name + "=" + fmt_num(v) + " is not a probability"});
}

inline void check_row(std::vector<Violation>& out, const std::string& name, double lhs, double rhs) {
  const double sum = lhs + rhs;
  if (!(std::abs(sum - 1.0) <= kStochasticTol))
    out.push_back({name, sum, name + " sums to " + fmt_num(sum)});
}

}  // namespace detail

/// Every violated invariant of `p`; empty iff `p` is valid.
[[nodiscard]] inline std::vector<Violation> validate(const ChannelParams& p) {
  std::vector<Violation> out;
  detail::check_cp(out, "x0", p.x0);
  detail::check_cp(out, "x1", p.x1);
  detail::check_probability(out, "q00", p.q00);
  detail::check_probability(out, "q01", p.q01);
  detail::check_probability(out, "q10", p.q10);
  detail::check_probability(out, "q11", p.q11);
  detail::check_row(out, "row 0", p.q00, p.q01);
  detail::check_row(out, "row 1", p.q10, p.q11);
  detail::check_probability(out, "gamma0", p.gamma0);
  detail::check_probability(out, "gamma1", p.gamma1);
  detail::check_row(out, "gamma", p.gamma0, p.gamma1);
  return out;
}

[[nodiscard]] inline std::vector<Violation> validate(const SymmetricParams& p) {
  std::vector<Violation> out;
  if (!std::isfinite(p.a)) out.push_back({"a", p.a, "a is not finite"});
  if (!std::isfinite(p.d)) out.push_back({"d", p.d, "d is not finite"});
  detail::check_cp(out, "a+d", p.a + p.d);
  detail::check_cp(out, "a-d", p.a - p.d);
  if (!(p.s >= -1.0 && p.s <= 1.0))
    out.push_back({"s", p.s, "s=" + detail::fmt_num(p.s) + " outside [-1, 1]"});
  return out;
}

inline void require_valid(const ChannelParams& p) {
  if (auto v = validate(p); !v.empty()) throw ValidationError(std::move(v));
}

/// Stationary distribution of a 2x2 stochastic matrix.
struct Stationary {
  Vec2 pi{0.5, 0.5};
  bool unique = true;  ///< false when the chain is reducible (q01 = q10 = 0)
};

/// Closed form pi = (q10, q01) / (q10 + q01). A reducible chain has no unique
/// stationary law; `fallback` is returned and flagged.
[[nodiscard]] inline Stationary stationary_distribution(const Mat2& q, const Vec2& fallback = {0.5, 0.5}) {
  const double leave0 = q[0][1];
  const double leave1 = q[1][0];
  const double total = leave0 + leave1;
  if (total <= 0.0) return {fallback, false};
  return {{leave1 / total, leave0 / total}, true};
}

/// Symmetric form to raw parameters. Initial selection is uniform, which is
/// also the stationary law of the symmetric switching chain.
[[nodiscard]] inline ChannelParams from_symmetric(const SymmetricParams& p) {
  if (auto v = validate(p); !v.empty()) throw ValidationError(std::move(v));
  ChannelParams c;
  c.x0 = p.a + p.d;
  c.x1 = p.a - p.d;
  c.q00 = c.q11 = (1.0 + p.s) / 2.0;
  c.q01 = c.q10 = (1.0 - p.s) / 2.0;
  c.gamma0 = c.gamma1 = 0.5;
  return c;
}

/// Raw parameters with gamma set to the stationary law of Q (uniform when Q is reducible).
[[nodiscard]] inline ChannelParams make_params(double x0, double x1, double q00, double q10) {
  ChannelParams c;
  c.x0 = x0;
  c.x1 = x1;
  c.q00 = q00;
  c.q01 = 1.0 - q00;
  c.q10 = q10;
  c.q11 = 1.0 - q10;
  const auto st = stationary_distribution(c.switching());
  c.gamma0 = st.pi[0];
  c.gamma1 = st.pi[1];
  return c;
}

/// Inverse of `from_symmetric` for display: a, d from the no-flip
/// probabilities and s = q00 - q10, the second eigenvalue of Q.
[[nodiscard]] inline SymmetricParams to_symmetric(const ChannelParams& c) noexcept {
  return {(c.x0 + c.x1) / 2.0, (c.x0 - c.x1) / 2.0, c.q00 - c.q10};
}

/// The 4-state (channel, flip) Markov chain.
struct UnderlyingChain {
  Mat4 t{};
  Vec4 initial{};

  static constexpr int state(int channel, Symbol a) noexcept { return 2 * channel + index(a); }
};

[[nodiscard]] inline UnderlyingChain build_underlying_chain(const ChannelParams& p) {
  require_valid(p);
  const Mat2 q = p.switching();
  const Vec2 gamma{p.gamma0, p.gamma1};
  UnderlyingChain chain;
  for (int i = 0; i < 2; ++i) {
    for (Symbol j : kSymbols) {
      const int from = UnderlyingChain::state(i, j);
      chain.initial[from] = gamma[i] * p.emission(i, j);
      for (int ip = 0; ip < 2; ++ip)
        for (Symbol jp : kSymbols) chain.t[from][UnderlyingChain::state(ip, jp)] = q[i][ip] * p.emission(ip, jp);
    }
  }
  return chain;
}

/// The algebraic measure: mu(w) = pi . e[w1] ... e[wn] . 1.
struct TracedMatrices {
  std::array<Mat2, 2> e{};  ///< indexed by Symbol
  Vec2 pi{0.5, 0.5};
  bool pi_unique = true;

  [[nodiscard]] const Mat2& operator[](Symbol a) const noexcept { return e[index(a)]; }
  [[nodiscard]] Mat2 switching() const noexcept {
    Mat2 q{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) q[i][j] = e[0][i][j] + e[1][i][j];
    return q;
  }
};

namespace detail {

/// Splits q into (q x, q (1 - x)) so that the two parts add back to q
/// exactly: the larger part is a product, the smaller is the (Sterbenz-exact)
/// remainder.
inline std::array<double, 2> split_exact(double q, double x) noexcept {
  if (x >= 0.5) {
    const double keep = q * x;
    return {keep, q - keep};
  }
  const double flip = q * (1.0 - x);
  return {q - flip, flip};
}

}  // namespace detail

/// (e_a)_{i,i'} = q_{ii'} x_{i'}^a, with e0 + e1 == Q bit for bit.
/// When Q is reducible, pi falls back to gamma.
[[nodiscard]] inline TracedMatrices build_traced_matrices(const ChannelParams& p) {
  require_valid(p);
  const Mat2 q = p.switching();
  const Vec2 keep{p.x0, p.x1};
  TracedMatrices m;
  for (int i = 0; i < 2; ++i) {
    for (int ip = 0; ip < 2; ++ip) {
      const auto parts = detail::split_exact(q[i][ip], keep[ip]);
      m.e[0][i][ip] = parts[0];
      m.e[1][i][ip] = parts[1];
    }
  }
  const auto st = stationary_distribution(q, {p.gamma0, p.gamma1});
  m.pi = st.pi;
  m.pi_unique = st.unique;
  return m;
}

[[nodiscard]] inline TracedMatrices build_traced_matrices(const SymmetricParams& p) {
  return build_traced_matrices(from_symmetric(p));
}

/// Row vector times matrix.
[[nodiscard]] constexpr Vec2 operator*(const Vec2& v, const Mat2& m) noexcept {
  return {v[0] * m[0][0] + v[1] * m[1][0], v[0] * m[0][1] + v[1] * m[1][1]};
}

}  // namespace hmqc
