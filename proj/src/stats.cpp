#include "cpgnn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cpgnn/error.hpp"

namespace cpgnn {

namespace {

constexpr int kMaxIterations = 200;
constexpr double kRelTolerance = 1e-14;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a,b) (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kRelTolerance) break;
  }
  return h;
}

// lgamma(x) minus its Stirling approximation, x >= 10.
double stirling_remainder(double x) {
  const double r = 1.0 / (x * x);
  return (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r * (1.0 / 1680.0 - r / 1188.0)))) / x;
}

// log B(a, b). Differencing lgamma directly loses ~1e-9 absolute once a + b ~ 1e6;
// for large arguments the Stirling terms are combined analytically instead.
double log_beta(double a, double b) {
  const double p = std::min(a, b);
  const double q = std::max(a, b);
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  if (p >= 10.0) {
    const double corr = stirling_remainder(p) + stirling_remainder(q) - stirling_remainder(p + q);
    return -0.5 * std::log(q) + kLogSqrt2Pi + corr + (p - 0.5) * std::log(p / (p + q)) +
           q * std::log1p(-p / (p + q));
  }
  if (q >= 10.0) {
    const double corr = stirling_remainder(q) - stirling_remainder(p + q);
    return std::lgamma(p) + corr + p - p * std::log(p + q) + (q - 0.5) * std::log1p(-p / (p + q));
  }
  return std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q);
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x, double y) {
  if (x <= 0.0) return 0.0;
  if (y <= 0.0) return 1.0;
  const double log_x = x > 0.5 ? std::log1p(-y) : std::log(x);
  const double log_y = y > 0.5 ? std::log1p(-x) : std::log(y);
  const double log_front = a * log_x + b * log_y - log_beta(a, b);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

double t_cdf(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  if (t == 0.0) return 0.5;
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double y = t2 / (df + t2);
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x, y);
  return t < 0.0 ? tail : 1.0 - tail;
}

PairedTestResult paired_t_test(std::span<const double> m0, std::span<const double> m1) {
  if (m0.size() != m1.size()) throw DataError("paired test needs equal-length samples");
  const std::size_t n = m0.size();
  if (n < 2) throw DataError("paired test needs n >= 2 pairs, got " + std::to_string(n));
  std::vector<double> d(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (!std::isfinite(m0[j]) || !std::isfinite(m1[j])) throw DataError("non-finite observation in paired test");
    d[j] = m0[j] - m1[j];
  }
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  double scale = 0.0;
  for (double v : d) scale = std::max(scale, std::abs(v));
  // Differences equal up to rounding count as constant.
  if (!(sd > 1e-12 * scale)) throw DataError("degenerate variance: all paired differences are equal");

  PairedTestResult r;
  r.n = n;
  r.df = static_cast<int>(n - 1);
  r.mean_diff = mean;
  r.sd_diff = sd;
  r.t_stat = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p_one_sided = t_cdf(r.t_stat, r.df);
  return r;
}

HopMetric parse_hop_metric(const std::string& name) {
  if (name == "ANCD" || name == "ancd") return HopMetric::Ancd;
  if (name == "ANCC" || name == "ancc") return HopMetric::Ancc;
  throw ConfigError("metric must be ANCD or ANCC, got '" + name + "'");
}

const char* to_string(HopMetric m) { return m == HopMetric::Ancd ? "ANCD" : "ANCC"; }

PairedTestResult hypothesis_test(std::span<const MetricReport> reports, HopMetric metric, unsigned k) {
  std::vector<double> m0, m1;
  m0.reserve(reports.size());
  m1.reserve(reports.size());
  for (const auto& r : reports) {
    const auto& c0 = r.at(0, k);
    const auto& c1 = r.at(1, k);
    m0.push_back(metric == HopMetric::Ancd ? c0.ancd : c0.ancc);
    m1.push_back(metric == HopMetric::Ancd ? c1.ancd : c1.ancc);
  }
  return paired_t_test(m0, m1);
}

nlohmann::json to_json(const PairedTestResult& r) {
  return {{"t_stat", r.t_stat}, {"df", r.df},           {"p_one_sided", r.p_one_sided},
          {"mean_diff", r.mean_diff}, {"sd_diff", r.sd_diff}, {"n", r.n}};
}

}  // namespace cpgnn
