#pragma once

#include <span>
#include <string>
#include <vector>

#include "cpgnn/metrics.hpp"
#include "json.hpp"

namespace cpgnn {

/// Regularized incomplete beta I_x(a, b). `y` must equal 1 - x; passing it separately
/// avoids cancellation when x is close to 1.
double regularized_incomplete_beta(double a, double b, double x, double y);

/// Lower-tail Student-t probability P(T_df <= t).
double t_cdf(double t, double df);

struct PairedTestResult {
  double t_stat = 0.0;
  int df = 0;
  double p_one_sided = 0.0;  // P(T <= t): alternative is mean(m0 - m1) < 0
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  std::size_t n = 0;
};

/// One-sided paired t-test on d_j = m0_j - m1_j against H_a: mean(d) < 0.
/// Throws DataError on mismatched/short/non-finite input or zero variance of d.
PairedTestResult paired_t_test(std::span<const double> m0, std::span<const double> m1);

enum class HopMetric { Ancd, Ancc };

HopMetric parse_hop_metric(const std::string& name);
const char* to_string(HopMetric m);

/// Paired test across datasets: M0 = class-0 metric, M1 = class-1 metric at hop bound k.
PairedTestResult hypothesis_test(std::span<const MetricReport> reports, HopMetric metric, unsigned k);

nlohmann::json to_json(const PairedTestResult& r);

}  // namespace cpgnn
