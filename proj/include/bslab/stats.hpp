#pragma once

// Small statistics toolkit: batch-means estimates, least-squares lines, and
// shortest round-trip number formatting for CSV output.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bslab {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // standard error
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_batches = 0;
  double burn_in = 0.0;
  double total_budget = 0.0;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Mean and standard error from independent (or approximately independent)
/// batch means.
inline Estimate estimate_from_batches(std::span<const double> batch_means, double burn_in = 0.0,
                                      double budget = 0.0) {
  if (batch_means.size() < 2) throw std::invalid_argument("need at least two batches");
  const double n = static_cast<double>(batch_means.size());
  const double mean = std::accumulate(batch_means.begin(), batch_means.end(), 0.0) / n;
  double ss = 0.0;
  for (double b : batch_means) ss += (b - mean) * (b - mean);
  const double se = std::sqrt(ss / (n - 1.0) / n);
  Estimate e;
  e.mean = mean;
  e.se = se;
  e.ci_lo = mean - kZ95 * se;
  e.ci_hi = mean + kZ95 * se;
  e.n_batches = batch_means.size();
  e.burn_in = burn_in;
  e.total_budget = budget;
  return e;
}

/// Bernoulli proportion with the binomial standard error.
inline Estimate estimate_proportion(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) throw std::invalid_argument("no trials");
  const double p = double(successes) / double(trials);
  const double se = std::sqrt(p * (1.0 - p) / double(trials));
  Estimate e;
  e.mean = p;
  e.se = se;
  e.ci_lo = p - kZ95 * se;
  e.ci_hi = p + kZ95 * se;
  e.n_batches = 0;
  e.total_budget = double(trials);
  return e;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need >= 2 paired points");
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    rss += r * r;
  }
  f.rms_residual = std::sqrt(rss / n);
  f.points = x.size();
  return f;
}

/// Exponential tail model pi(k) ~ c1 exp(-c2 k) fitted on log values.
struct TailFit {
  double c1 = 0.0;
  double c2 = 0.0;
  double c2_se = 0.0;     // 0 when no error estimate is available
  double c2_ci_lo = 0.0;
  double c2_ci_hi = 0.0;
  std::size_t k_min = 0;
  std::size_t k_max = 0;
  double rms_residual = 0.0;
  std::size_t points() const { return k_max - k_min + 1; }
};

/// Pearson correlation of two 0/1 indicator sequences.
inline double indicator_correlation(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("correlation: size mismatch");
  double sa = 0, sb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    sab += a[i] * b[i];
  }
  const double n = double(a.size());
  const double ma = sa / n, mb = sb / n;
  const double cov = sab / n - ma * mb;
  const double va = ma * (1 - ma), vb = mb * (1 - mb);
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

/// Shortest representation that round-trips, '.' decimal separator.
inline std::string fmt_num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// CSV field, quoted when it holds a separator, quote or line break.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace bslab
