#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace malss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Derive an independent sub-seed from (seed, salt) with a splitmix-style
/// finalizer, so derived streams never overlap for distinct salts.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Deterministic RNG used everywhere. mt19937_64 output is fully specified
/// by the standard; the standard *distributions* are not, so draws are
/// hand-rolled to keep results identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
  std::size_t bounded(std::size_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double unit();

  /// Standard normal via Box-Muller on unit() draws.
  double normal();

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[bounded(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Format a double with 17 significant digits (lossless round-trip).
std::string format_g17(double v);

/// Parse a double, rejecting trailing junk. Throws std::runtime_error with
/// `context` in the message on failure.
double parse_double(const std::string& token, const std::string& context);

/// Parse an integer with the same error contract.
long parse_long(const std::string& token, const std::string& context);

/// log(1 + exp(x)) without overflow for large |x|.
double log1pexp(double x);

/// 1 / (1 + exp(-u)).
double logistic(double u);

/// (log p, log(1-p)) for p = logistic(u), accurate for any |u|.
std::pair<double, double> log_logistic_pair(double u);

/// Split on a delimiter; keeps empty fields.
std::vector<std::string> split(const std::string& line, char delim);

/// Strip leading/trailing whitespace (space, tab, CR).
std::string trim(const std::string& s);

}  // namespace malss
