#include "stp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace stp {

double quantile_type7(std::span<const double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must be in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<bool> iqr_filter(std::span<const double> values) {
  if (values.size() < 4) throw std::invalid_argument("iqr_filter needs at least 4 values");
  const double q1 = quantile_type7(values, 0.25);
  const double q3 = quantile_type7(values, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - 1.5 * iqr;
  const double hi = q3 + 1.5 * iqr;
  std::vector<bool> keep(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) keep[i] = values[i] >= lo && values[i] <= hi;
  return keep;
}

HolmResult holm_bonferroni(std::span<const double> p, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("p-values must be in [0, 1]");
  }
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  HolmResult r{std::vector<double>(m), std::vector<bool>(m)};
  double running = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = order[j];
    running = std::max(running, std::min(1.0, static_cast<double>(m - j) * p[i]));
    r.adjusted[i] = running;
    r.reject[i] = running <= alpha;
  }
  return r;
}

double t_critical(double level, std::size_t df) {
  if (df == 0) throw std::invalid_argument("t_critical needs df >= 1");
  const boost::math::students_t dist(static_cast<double>(df));
  return boost::math::quantile(dist, 1.0 - (1.0 - level) / 2.0);
}

Summary summarize(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("summary needs at least 2 values");
  Summary s;
  s.n = values.size();
  const double n = static_cast<double>(s.n);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (n - 1.0));
  s.ci_half_width = t_critical(0.95, s.n - 1) * s.sd / std::sqrt(n);
  return s;
}

std::vector<ConditionSummary> aggregate(const std::map<std::string, MeasureTable>& groups) {
  std::vector<ConditionSummary> out;
  for (const auto& [key, table] : groups) {
    ConditionSummary c;
    c.key = key;
    for (const auto& [name, values] : table) {
      if (values.size() < 2) {
        throw std::invalid_argument("group '" + key + "' has fewer than 2 observations");
      }
      if (c.n != 0 && values.size() != c.n) {
        throw std::invalid_argument("group '" + key + "': measures differ in length");
      }
      c.n = values.size();
      c.measures.emplace_back(name, summarize(values));
    }
    if (c.n == 0) throw std::invalid_argument("group '" + key + "' is empty");
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace stp
