#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fractal_fp/errors.hpp"

namespace ffp {

/// Gamma function via the Lanczos approximation (g = 7, nine coefficients).
/// Relative error stays below 1e-14 on the positive axis.
inline double lanczos_gamma(double x) {
  static constexpr double kG = 7.0;
  static constexpr std::array<double, 9> kCoeff = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // reflection
    return std::numbers::pi / (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
  }
  const double z = x - 1.0;
  double acc = kCoeff[0];
  for (std::size_t i = 1; i < kCoeff.size(); ++i) acc += kCoeff[i] / (z + static_cast<double>(i));
  const double t = z + kG + 0.5;
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, z + 0.5) * std::exp(-t) * acc;
}

/// Upper incomplete gamma Γ(a, x) for a a positive multiple of 1/2, by upward
/// recursion from Γ(1/2, x) = √π erfc(√x) and Γ(1, x) = e^{-x}.
inline double upper_incomplete_gamma_half(int twice_a, double x) {
  require(twice_a >= 1, "upper_incomplete_gamma_half: a must be positive");
  double a = (twice_a % 2 == 1) ? 0.5 : 1.0;
  double value = (twice_a % 2 == 1) ? std::sqrt(std::numbers::pi) * std::erfc(std::sqrt(x))
                                    : std::exp(-x);
  while (2.0 * a < twice_a) {
    value = a * value + std::pow(x, a) * std::exp(-x);
    a += 1.0;
  }
  return value;
}

/// Pairwise (tree) summation. The reduction tree depends only on the length,
/// so results are reproducible regardless of how callers chunk work.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 16) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Finite-difference weights on arbitrary nodes (Fornberg 1988).
/// Returns w[m][j]: weight of node j for the m-th derivative at z, m = 0..max_order.
inline std::vector<std::vector<double>> fornberg_weights(double z, std::span<const double> nodes,
                                                         int max_order) {
  const std::size_t n = nodes.size();
  require(n >= 1 && max_order >= 0, "fornberg_weights: need nodes and a non-negative order");
  const auto orders = static_cast<std::size_t>(max_order) + 1;
  std::vector<std::vector<double>> c(orders, std::vector<double>(n, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t mn = std::min(i, orders - 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (std::size_t k = mn; k >= 1; --k)
          c[k][i] = c1 * (static_cast<double>(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (std::size_t k = mn; k >= 1; --k)
        c[k][j] = (c4 * c[k][j] - static_cast<double>(k) * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c;
}

/// Composite Simpson rule for f on [a, b] with an even number of intervals.
template <typename F>
double simpson(F&& f, double a, double b, std::size_t intervals) {
  require(intervals >= 2 && intervals % 2 == 0, "simpson: interval count must be even and >= 2");
  const double h = (b - a) / static_cast<double>(intervals);
  std::vector<double> terms(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) {
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    terms[i] = w * f(a + h * static_cast<double>(i));
  }
  return pairwise_sum(terms) * h / 3.0;
}

inline std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  require(lo > 0.0 && hi > lo && count >= 2, "log_spaced: need 0 < lo < hi and count >= 2");
  std::vector<double> out(count);
  const double l0 = std::log(lo);
  const double step = (std::log(hi) - l0) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::exp(l0 + step * static_cast<double>(i));
  out.back() = hi;
  return out;
}

/// Worker cap: FFP_NUM_THREADS if set and positive, else hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("FFP_NUM_THREADS")) {
    const int requested = std::atoi(env);
    if (requested > 0) return static_cast<unsigned>(requested);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is written
/// by exactly one worker, so output is independent of the worker count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(1, n / 256));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Shortest text that round-trips a double: 17 significant digits, general form.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex_digest(std::string_view bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace ffp
