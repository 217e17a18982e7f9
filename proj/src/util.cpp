#include "malss/util.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace malss {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t Rng::bounded(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::bounded: n must be positive");
  // Reject the tail of the 64-bit range that does not divide evenly by n.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = next();
  } while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

double Rng::unit() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // Box-Muller; u clamped away from 0 so log stays finite.
  double u = unit();
  if (u <= 0.0) u = 0x1.0p-53;
  const double v = unit();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& token, const std::string& context) {
  const std::string t = trim(token);
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": not a number: '" + token + "'");
  }
  if (pos != t.size()) {
    throw std::runtime_error(context + ": not a number: '" + token + "'");
  }
  return v;
}

long parse_long(const std::string& token, const std::string& context) {
  const std::string t = trim(token);
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(t, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(context + ": not an integer: '" + token + "'");
  }
  if (pos != t.size()) {
    throw std::runtime_error(context + ": not an integer: '" + token + "'");
  }
  return v;
}

double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double logistic(double u) {
  if (u >= 0.0) {
    return 1.0 / (1.0 + std::exp(-u));
  }
  const double e = std::exp(u);
  return e / (1.0 + e);
}

std::pair<double, double> log_logistic_pair(double u) {
  // Sign-symmetric so neither branch ever exponentiates a positive number:
  // u >= 0: log p = -log(1+e^{-u}),    log(1-p) = -u - log(1+e^{-u})
  // u <  0: log p = u - log(1+e^{u}),  log(1-p) = -log(1+e^{u})
  if (u >= 0.0) {
    const double l = log1pexp(-u);
    return {-l, -u - l};
  }
  const double l = log1pexp(u);
  return {u - l, -l};
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

}  // namespace malss
