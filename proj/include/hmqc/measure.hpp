#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hmqc/model.hpp"

/// \file measure.hpp
/// \brief Exact word probabilities and block entropies of the flip process.
///
/// Everything here enumerates all 2^n flip patterns, so it is exponential in
/// the block length. It is the reference the fixed-point method is checked
/// against.

namespace hmqc {

/// Default largest block length accepted by the enumerators.
inline constexpr int kDefaultMaxBlock = 20;
/// Largest block length that may be requested at all.
inline constexpr int kHardMaxBlock = 26;
/// Probabilities below this are treated as zero inside logarithms.
inline constexpr double kLogFloor = 1e-300;

class ResourceLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// -p log2 p, with 0 log 0 = 0.
[[nodiscard]] inline double entropy_term(double p) noexcept {
  return p < kLogFloor ? 0.0 : -p * std::log2(p);
}

/// Binary entropy in bits.
[[nodiscard]] inline double binary_entropy(double p) noexcept { return entropy_term(p) + entropy_term(1.0 - p); }

/// A nonempty flip pattern; the first symbol is the earliest channel use.
class Word {
 public:
  Word() = default;
  explicit Word(std::vector<Symbol> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.empty()) throw std::invalid_argument("word must be nonempty");
  }

  /// Parses a string of '0' and '1' characters.
  static Word parse(std::string_view text) {
    std::vector<Symbol> out;
    out.reserve(text.size());
    for (char c : text) {
      if (c == '0')
        out.push_back(Symbol::no_flip);
      else if (c == '1')
        out.push_back(Symbol::flip);
      else
        throw std::invalid_argument("word symbols must be 0 or 1, got '" + std::string(1, c) + "'");
    }
    return Word(std::move(out));
  }

  [[nodiscard]] std::size_t size() const noexcept { return symbols_.size(); }
  [[nodiscard]] const std::vector<Symbol>& symbols() const noexcept { return symbols_; }
  [[nodiscard]] auto begin() const noexcept { return symbols_.begin(); }
  [[nodiscard]] auto end() const noexcept { return symbols_.end(); }

 private:
  std::vector<Symbol> symbols_;
};

/// Throws unless 1 <= n <= n_max <= kHardMaxBlock.
inline void check_block_length(int n, int n_max = kDefaultMaxBlock) {
  if (n_max > kHardMaxBlock)
    throw ResourceLimitError("n_max=" + std::to_string(n_max) + " exceeds the hard cap " +
                             std::to_string(kHardMaxBlock));
  if (n < 1) throw std::invalid_argument("block length must be at least 1");
  if (n > n_max)
    throw ResourceLimitError("block length n=" + std::to_string(n) + " exceeds n_max=" + std::to_string(n_max) +
                             " (2^n words)");
}

/// start . e[w1] ... e[wn] . 1
[[nodiscard]] inline double word_probability(const TracedMatrices& m, const Word& w, const Vec2& start) {
  Vec2 v = start;
  for (Symbol a : w) v = v * m[a];
  return v[0] + v[1];
}

[[nodiscard]] inline double word_probability(const TracedMatrices& m, const Word& w) {
  return word_probability(m, w, m.pi);
}

namespace detail {

template <typename Visitor>
void visit_words(const TracedMatrices& m, const Vec2& v, int depth, int n, Visitor& visit) {
  for (Symbol a : kSymbols) {
    const Vec2 next = v * m[a];
    visit(depth + 1, next);
    if (depth + 1 < n) visit_words(m, next, depth + 1, n, visit);
  }
}

}  // namespace detail

/// Depth-first walk over all words of length 1..n in lexicographic order
/// (0 before 1), calling `visit(length, v)` on every prefix, where
/// v = start . e[w1] ... e[wk] and the prefix probability is v[0] + v[1].
/// Each node costs one 2x2 product.
template <typename Visitor>
void for_each_prefix(const TracedMatrices& m, int n, const Vec2& start, Visitor&& visit) {
  detail::visit_words(m, start, 0, n, visit);
}

/// Probabilities of all 2^n words, in lexicographic order.
[[nodiscard]] inline std::vector<double> all_word_probabilities(const TracedMatrices& m, int n,
                                                                int n_max = kDefaultMaxBlock) {
  check_block_length(n, n_max);
  std::vector<double> out;
  out.reserve(std::size_t{1} << n);
  for_each_prefix(m, n, m.pi, [&](int len, const Vec2& v) {
    if (len == n) out.push_back(v[0] + v[1]);
  });
  return out;
}

/// Diagonal of the n-use output state for a computational-basis input: the
/// flip-pattern probabilities. Its von Neumann entropy is the block entropy.
[[nodiscard]] inline std::vector<double> output_spectrum(const TracedMatrices& m, int n,
                                                         int n_max = kDefaultMaxBlock) {
  return all_word_probabilities(m, n, n_max);
}

/// Block entropies H_0..H_n (bits) of the process started from `start`, in one pass.
[[nodiscard]] inline std::vector<double> block_entropies(const TracedMatrices& m, int n, const Vec2& start,
                                                         int n_max = kDefaultMaxBlock) {
  check_block_length(n, n_max);
  std::vector<double> h(static_cast<std::size_t>(n) + 1, 0.0);
  for_each_prefix(m, n, start,
                  [&](int len, const Vec2& v) { h[static_cast<std::size_t>(len)] += entropy_term(v[0] + v[1]); });
  return h;
}

/// H(X_n | X_1..X_{n-1}) for the process started from `start`, summed as
/// sum_w P(w) h(P(0 | w)) so that no large block entropies cancel.
[[nodiscard]] inline double conditional_entropy(const TracedMatrices& m, int n, const Vec2& start,
                                                int n_max = kDefaultMaxBlock) {
  check_block_length(n, n_max);
  const auto next_symbol_entropy = [&m](const Vec2& v) {
    const double total = v[0] + v[1];
    if (total < kLogFloor) return 0.0;
    const Vec2 v0 = v * m[Symbol::no_flip];
    return total * binary_entropy((v0[0] + v0[1]) / total);
  };
  if (n == 1) return next_symbol_entropy(start);
  double sum = 0.0;
  for_each_prefix(m, n - 1, start, [&](int len, const Vec2& v) {
    if (len == n - 1) sum += next_symbol_entropy(v);
  });
  return sum;
}

/// Shannon entropy of the length-n word distribution, in bits.
[[nodiscard]] inline double block_entropy(const TracedMatrices& m, int n, int n_max = kDefaultMaxBlock) {
  return block_entropies(m, n, m.pi, n_max).back();
}

/// Sandwich bounds on the entropy rate from length-n blocks.
struct BlockEntropyReport {
  int n = 0;
  double h_n = 0.0;    ///< block entropy H_n (bits)
  double upper = 0.0;  ///< H_n - H_{n-1}
  double lower = 0.0;  ///< same difference, conditioned on the initial hidden channel
};

/// upper = H(X_n | X_1..X_{n-1}) and lower = H(X_n | X_1..X_{n-1}, S_0), where
/// S_0 is the hidden channel before the first use, drawn from pi.
[[nodiscard]] inline BlockEntropyReport entropy_rate_bounds(const TracedMatrices& m, int n,
                                                            int n_max = kDefaultMaxBlock) {
  if (n < 2) throw std::invalid_argument("entropy_rate_bounds needs n >= 2");
  check_block_length(n, n_max);
  BlockEntropyReport r;
  r.n = n;
  r.h_n = block_entropy(m, n, n_max);
  r.upper = conditional_entropy(m, n, m.pi, n_max);
  for (int i = 0; i < 2; ++i) {
    if (m.pi[i] <= 0.0) continue;
    const Vec2 pinned = i == 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    r.lower += m.pi[i] * conditional_entropy(m, n, pinned, n_max);
  }
  return r;
}

}  // namespace hmqc
