#pragma once

// Hand-rolled random generators for property tests. Every property runs a
// fixed number of cases from a fixed seed so failures reproduce; the case
// index is reported through SCOPED_TRACE.

#include <gtest/gtest.h>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng_); }
  long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  std::uint64_t seed() { return rng_(); }

  /// Polynomial coefficients of the given degree in u in [-1, 1], scaled so
  /// that the largest coefficient has magnitude `amplitude`.
  std::vector<double> polynomial(int degree, double amplitude) {
    std::vector<double> c(static_cast<std::size_t>(degree) + 1);
    double big = 0.0;
    for (auto& x : c) {
      x = normal();
      big = std::max(big, std::abs(x));
    }
    for (auto& x : c) x *= amplitude / big;
    return c;
  }

  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    for (auto& ch : s) ch = static_cast<char>(integer(0, 255));
    return s;
  }

  /// Text built from characters that a cross-section record is made of, so
  /// fuzz cases get past the first few checks.
  std::string numeric_text(std::size_t n) {
    static const std::string alphabet = "0123456789.eE+- \n\tABCXHnai";
    std::string s(n, ' ');
    for (auto& ch : s) ch = alphabet[static_cast<std::size_t>(integer(0, static_cast<long>(alphabet.size()) - 1))];
    return s;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double eval_poly(const std::vector<double>& c, double u) {
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * u + *it;
  return s;
}

/// Runs `body(g, case_index)` for `cases` cases drawn from `seed`.
template <class F>
void for_all(std::uint64_t seed, int cases, F&& body) {
  Gen g(seed);
  for (int i = 0; i < cases; ++i) {
    SCOPED_TRACE("property case " + std::to_string(i) + " (seed " + std::to_string(seed) + ")");
    body(g, i);
    if (::testing::Test::HasFatalFailure()) return;
  }
}

}  // namespace gen
