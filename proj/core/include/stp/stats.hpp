// Outlier filtering, multiple-comparison correction and descriptive
// summaries.

#ifndef STP_STATS_HPP
#define STP_STATS_HPP

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace stp {

/// Linear-interpolation sample quantile (R type 7). `p` in [0, 1]; throws
/// std::invalid_argument for an empty sample.
double quantile_type7(std::span<const double> values, double p);

/// Keep-mask for Tukey fences built from type-7 quartiles. Throws
/// std::invalid_argument when fewer than four values are given.
std::vector<bool> iqr_filter(std::span<const double> values);

struct HolmResult {
  std::vector<double> adjusted;
  std::vector<bool> reject;
};

/// Holm step-down adjustment, results in input order. Throws
/// std::invalid_argument for p outside [0, 1] or alpha outside (0, 1).
HolmResult holm_bonferroni(std::span<const double> p, double alpha = 0.05);

/// Two-sided Student t critical value, t(1 - (1 - level) / 2, df).
double t_critical(double level, std::size_t df);

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;             // n - 1 denominator
  double ci_half_width = 0.0;  // 95% t interval
};

/// Throws std::invalid_argument for fewer than two values.
Summary summarize(std::span<const double> values);

struct ConditionSummary {
  std::string key;
  std::size_t n = 0;
  /// Per-measure summaries in the order the measures were supplied.
  std::vector<std::pair<std::string, Summary>> measures;
};

/// Groups keyed by condition; each group maps measure name to values, all of
/// equal length. Output is ordered by key. A group with fewer than two
/// observations throws std::invalid_argument naming it.
using MeasureTable = std::vector<std::pair<std::string, std::vector<double>>>;
std::vector<ConditionSummary> aggregate(const std::map<std::string, MeasureTable>& groups);

}  // namespace stp

#endif  // STP_STATS_HPP
