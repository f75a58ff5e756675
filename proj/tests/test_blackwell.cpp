#include <catch_amalgamated.hpp>

#include <cmath>

#include "hmqc/blackwell.hpp"
#include "hmqc/capacity.hpp"
#include "oracle.hpp"

using namespace hmqc;
using Catch::Approx;

namespace {

constexpr double kH23 = 0.9182958340544896;
constexpr double kH34 = 0.8112781244591328;

TracedMatrices traced(double a, double d, double s) { return build_traced_matrices(SymmetricParams{a, d, s}); }

}  // namespace

TEST_CASE("emission probabilities", "[blackwell]") {
  CHECK(emission_probability(traced(0.8, 0.1, 0.6), {0.5}, Symbol::no_flip) == Approx(0.8));
  CHECK(emission_probability(traced(2.0 / 3.0, 1.0 / 3.0, 0.0), {1.0}, Symbol::no_flip) == Approx(2.0 / 3.0));

  oracle::ParamGenerator gen(3, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = build_traced_matrices(gen.symmetric());
    for (int k = 0; k <= 100; ++k) {
      const BeliefState b{k / 100.0};
      const double z = emission_probability(m, b, Symbol::no_flip) + emission_probability(m, b, Symbol::flip);
      CHECK(std::abs(z - 1.0) <= 1e-15);
    }
  }
}

TEST_CASE("belief update", "[blackwell]") {
  SECTION("d=0 carries no channel information") {
    const auto m = traced(0.7, 0.0, 0.4);
    for (double p : {0.0, 0.2, 0.9})
      for (Symbol a : kSymbols) CHECK(belief_update(m, {p}, a).p == Approx(p * 0.7 + (1 - p) * 0.3));
  }
  SECTION("s=0, observe no flip from p=1") {
    CHECK(belief_update(traced(2.0 / 3.0, 1.0 / 3.0, 0.0), {1.0}, Symbol::no_flip).p == Approx(0.75));
  }
  SECTION("s=1 is absorbing at p=1") {
    const auto m = traced(0.6, 0.2, 1.0);
    for (Symbol a : kSymbols) CHECK(belief_update(m, {1.0}, a).p == 1.0);
  }
  SECTION("zero-probability observation throws") {
    // sub-channel 0 never flips and we are sure we are on it
    CHECK_THROWS_AS(belief_update(traced(2.0 / 3.0, 1.0 / 3.0, 1.0), {1.0}, Symbol::flip), ImpossibleObservation);
  }
  SECTION("beliefs stay in [0, 1]") {
    oracle::ParamGenerator gen(11, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = build_traced_matrices(gen.symmetric());
      for (int k = 0; k <= 50; ++k)
        for (Symbol a : kSymbols) {
          if (emission_probability(m, {k / 50.0}, a) <= 0.0) continue;
          const double next = belief_update(m, {k / 50.0}, a).p;
          CHECK(next >= 0.0);
          CHECK(next <= 1.0);
        }
    }
  }
}

TEST_CASE("step entropy", "[blackwell]") {
  CHECK(step_entropy(traced(2.0 / 3.0, 1.0 / 3.0, 0.3), {0.5}) == Approx(kH23));
  for (double p : {0.0, 0.3, 1.0}) {
    CHECK(step_entropy(traced(1.0, 0.0, 0.3), {p}) == Approx(0.0).margin(1e-15));
    CHECK(step_entropy(traced(0.5, 0.0, 0.8), {p}) == Approx(1.0));
  }
}

TEST_CASE("grid measure", "[blackwell]") {
  GridMeasure g(5);
  CHECK(g.node(0) == 0.0);
  CHECK(g.node(4) == 1.0);
  g.deposit(0.3, 1.0);  // between nodes 0.25 and 0.5
  CHECK(g[1] == Approx(0.8));
  CHECK(g[2] == Approx(0.2));
  g.deposit(1.0, 0.5);
  CHECK(g[4] == 0.5);
  CHECK(g.total() == Approx(1.5));
  CHECK_THROWS_AS(GridMeasure(1), std::invalid_argument);
}

TEST_CASE("transfer operator", "[blackwell]") {
  SECTION("a common fixed point of both maps is left alone") {
    const auto m = traced(0.6, 0.2, 1.0);
    const auto g = GridMeasure::point_mass(64, 1.0);
    const auto out = apply_transfer_operator(m, g);
    CHECK(out[63] == Approx(1.0).margin(1e-15));
  }
  SECTION("d=0, s=0 sends everything to p = 1/2") {
    const auto m = traced(0.7, 0.0, 0.0);
    const auto odd = apply_transfer_operator(m, GridMeasure::uniform(65));
    CHECK(odd[32] == Approx(1.0).margin(1e-12));
    const auto even = apply_transfer_operator(m, GridMeasure::uniform(64));
    CHECK(even[31] + even[32] == Approx(1.0).margin(1e-12));
    CHECK(even[31] == Approx(0.5).margin(1e-12));
  }
  SECTION("mass is conserved") {
    oracle::ParamGenerator gen(17, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
      const auto m = build_traced_matrices(gen.symmetric());
      GridMeasure g = GridMeasure::uniform(257);
      for (int step = 0; step < 20; ++step) {
        g = apply_transfer_operator(m, g);
        CHECK(std::abs(g.total() - 1.0) <= 1e-12);
        for (double w : g.weights()) CHECK(w >= 0.0);
      }
    }
  }
}

TEST_CASE("fixed point", "[blackwell]") {
  SECTION("d=0 concentrates next to p = 1/2") {
    const auto fp = fixed_point(traced(0.7, 0.0, 0.5));
    REQUIRE(fp.converged);
    const auto& g = fp.measure;
    const double step = 1.0 / static_cast<double>(g.bins() - 1);
    double near = 0.0;
    for (std::size_t k = 0; k < g.bins(); ++k)
      if (std::abs(g.node(k) - 0.5) <= step) near += g[k];
    CHECK(near == Approx(1.0).margin(1e-9));
  }
  SECTION("s=0 resets the belief each step") {
    const auto fp = fixed_point(traced(0.75, 0.25, 0.0));
    CHECK(fp.converged);
    CHECK(fp.iterations <= 2);
  }
  SECTION("non-convergence is reported, not thrown") {
    const auto fp = fixed_point(traced(2.0 / 3.0, 1.0 / 3.0, 0.95), {4096, 1e-10, 2});
    CHECK_FALSE(fp.converged);
    CHECK(fp.iterations == 2);
    CHECK(fp.residual > 1e-10);
  }
  SECTION("bad options") {
    CHECK_THROWS_AS(fixed_point(traced(0.6, 0.1, 0.1), {1, 1e-10, 10}), std::invalid_argument);
    CHECK_THROWS_AS(fixed_point(traced(0.6, 0.1, 0.1), {16, 0.0, 10}), std::invalid_argument);
  }
}

TEST_CASE("fixed point converges across the parameter range", "[blackwell][property]") {
  for (double a : {0.4, 0.5, 2.0 / 3.0, 0.85}) {
    const double dmax = std::min(a - kCpLowerBound, 1.0 - a);
    for (double dfrac : {-1.0, -0.5, 0.3, 1.0}) {
      for (double s : {-0.99, -0.9, -0.5, 0.0, 0.5, 0.9, 0.99}) {
        const auto r = entropy_rate_fixed_point(traced(a, DRule::max_for(a) * dfrac, s));
        INFO("a=" << a << " dmax=" << dmax << " dfrac=" << dfrac << " s=" << s);
        CHECK(r.converged);
        CHECK(r.rate >= 0.0);
        CHECK(r.rate <= 1.0);
      }
    }
  }
}

TEST_CASE("fixed-point entropy rate", "[blackwell]") {
  CHECK(entropy_rate_fixed_point(traced(2.0 / 3.0, 0.0, 0.7)).rate == Approx(kH23).margin(1e-6));
  CHECK(entropy_rate_fixed_point(traced(0.75, 0.25, 0.0)).rate == Approx(kH34).margin(1e-6));

  SECTION("sits inside the n=16 block bounds") {
    const auto m = traced(2.0 / 3.0, 1.0 / 3.0, 0.9);
    const auto r = entropy_rate_fixed_point(m);
    const auto b = entropy_rate_bounds(m, 16);
    // grid discretization error is of order 1e-7 here, while the bounds have
    // already met to 1e-12
    CHECK(r.rate >= b.lower - 1e-6);
    CHECK(r.rate <= b.upper + 1e-6);
  }
  SECTION("s=1 gives the mixture of the two memoryless rates") {
    const auto r = entropy_rate_fixed_point(traced(2.0 / 3.0, 1.0 / 3.0, 1.0));
    CHECK_FALSE(r.ergodic);
    CHECK(r.converged);
    CHECK(r.rate == Approx((oracle::h2(1.0) + oracle::h2(1.0 / 3.0)) / 2).margin(1e-10));
  }
  SECTION("d -> -d leaves the rate unchanged") {
    oracle::ParamGenerator gen(23);
    for (int trial = 0; trial < 15; ++trial) {
      const SymmetricParams p = gen.symmetric();
      const double r1 = entropy_rate_fixed_point(build_traced_matrices(p)).rate;
      const double r2 = entropy_rate_fixed_point(build_traced_matrices(SymmetricParams{p.a, -p.d, p.s})).rate;
      CHECK(std::abs(r1 - r2) <= 1e-9);
    }
  }
}

TEST_CASE("Monte-Carlo entropy rate", "[blackwell]") {
  SECTION("independent flips") {
    const auto r = entropy_rate_monte_carlo(traced(2.0 / 3.0, 0.0, 0.5));
    CHECK(r.rate == Approx(kH23).margin(0.002));
    CHECK(r.iterations == 1'000'000);
  }
  SECTION("same seed, same bits") {
    const auto m = traced(0.6, 0.15, 0.8);
    const MonteCarloOptions opt{200'000, 1'000, 1234, 100};
    const auto r1 = entropy_rate_monte_carlo(m, opt);
    const auto r2 = entropy_rate_monte_carlo(m, opt);
    CHECK(r1.rate == r2.rate);
    CHECK(r1.std_error == r2.std_error);
    CHECK(r1.seed == 1234);
    const auto r3 = entropy_rate_monte_carlo(m, {200'000, 1'000, 1235, 100});
    CHECK(r3.rate != r1.rate);
  }
  SECTION("agrees with the fixed point within 3 standard errors") {
    const auto m = traced(2.0 / 3.0, 1.0 / 3.0, 0.9);
    const auto mc = entropy_rate_monte_carlo(m);
    const auto fp = entropy_rate_fixed_point(m);
    REQUIRE(mc.std_error > 0.0);
    CHECK(std::abs(mc.rate - fp.rate) <= 3 * mc.std_error);
  }
  SECTION("argument checks") {
    CHECK_THROWS_AS(entropy_rate_monte_carlo(traced(0.6, 0.1, 0.1), {100, 100, 1, 10}), std::invalid_argument);
    CHECK_THROWS_AS(entropy_rate_monte_carlo(traced(0.6, 0.1, 0.1), {100, -1, 1, 10}), std::invalid_argument);
  }
}

TEST_CASE("uniform01 is portable", "[blackwell]") {
  // the standard pins the 10000th output of a default-seeded mt19937_64
  std::mt19937_64 rng;
  rng.discard(9999);
  const double u = uniform01(rng);
  CHECK(u == static_cast<double>(9981545732273789042ull >> 11) * 0x1.0p-53);
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
}
