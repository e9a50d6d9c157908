#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "pop/common.hpp"

namespace pop {

inline constexpr double kNiEps = 1e-8;

// Improvement over the initial-context minimum, scaled by the context value
// range. The normalizer is frozen to the initial context so the series stays
// comparable across steps; clamped below at zero.
inline std::vector<double> normalized_improvement(const std::vector<double>& context,
                                                  const std::vector<double>& best_so_far,
                                                  double eps = kNiEps) {
  POP_CHECK(!context.empty(), "normalized_improvement needs a non-empty context");
  double cmin = context[0], cmax = context[0];
  for (double v : context) {
    cmin = std::min(cmin, v);
    cmax = std::max(cmax, v);
  }
  double denom = cmax - cmin + eps;
  std::vector<double> ni(best_so_far.size());
  for (size_t t = 0; t < best_so_far.size(); t++)
    ni[t] = std::max(0.0, (cmin - best_so_far[t]) / denom);
  return ni;
}

// (best-so-far - y_min) / (y_max - y_min), clamped to [0, 1]; sampled y_max
// can be exceeded by unlucky iterates.
inline std::vector<double> normalized_regret(const std::vector<double>& best_so_far, double ymin,
                                             double ymax) {
  POP_CHECK(std::isfinite(ymin) && std::isfinite(ymax) && ymax > ymin,
            "normalized_regret needs y_max > y_min");
  std::vector<double> r(best_so_far.size());
  for (size_t t = 0; t < best_so_far.size(); t++)
    r[t] = std::clamp((best_so_far[t] - ymin) / (ymax - ymin), 0.0, 1.0);
  return r;
}

namespace detail {

inline double lbeta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double betacf(double a, double b, double x) {
  const double tiny = 1e-300, eps = 3e-15;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; m++) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

inline double inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

inline double student_t_cdf(double t, double df) {
  POP_CHECK(df > 0, "student_t_cdf needs df > 0");
  double x = df / (df + t * t);
  double p = 0.5 * detail::inc_beta(0.5 * df, 0.5, x);
  return t >= 0 ? 1.0 - p : p;
}

inline double student_t_quantile(double p, double df) {
  POP_CHECK(p > 0.0 && p < 1.0 && df > 0, "student_t_quantile needs p in (0,1) and df > 0");
  if (p == 0.5) return 0.0;
  double q = p > 0.5 ? p : 1.0 - p;
  double hi = 1.0;
  while (student_t_cdf(hi, df) < q && hi < 1e300) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200; it++) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (student_t_cdf(mid, df) < q ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  return p > 0.5 ? t : -t;
}

struct MeanCi {
  double mean = 0;
  double lo = 0, hi = 0;
  bool ci_defined = false;  // needs >= 2 samples
};

inline MeanCi mean_ci(const std::vector<double>& values, double confidence = 0.95) {
  POP_CHECK(!values.empty(), "mean_ci needs at least one value");
  MeanCi out;
  size_t n = values.size();
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  out.lo = out.hi = out.mean;
  if (n < 2) return out;
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  double tq = student_t_quantile(0.5 + 0.5 * confidence, static_cast<double>(n - 1));
  double half = tq * sd / std::sqrt(static_cast<double>(n));
  out.lo = out.mean - half;
  out.hi = out.mean + half;
  out.ci_defined = true;
  return out;
}

// Per-step mean and CI across tasks; series must be aligned.
inline std::vector<MeanCi> aggregate(const std::vector<std::vector<double>>& per_task,
                                     double confidence = 0.95) {
  POP_CHECK(!per_task.empty(), "aggregate needs at least one task");
  size_t steps = per_task[0].size();
  for (const auto& s : per_task) POP_CHECK(s.size() == steps, "aggregate: unequal series lengths");
  std::vector<MeanCi> out(steps);
  std::vector<double> col(per_task.size());
  for (size_t t = 0; t < steps; t++) {
    for (size_t k = 0; k < per_task.size(); k++) col[k] = per_task[k][t];
    out[t] = mean_ci(col, confidence);
  }
  return out;
}

// Ranks with mean-of-ties, ascending (smaller value ranks first).
inline std::vector<double> rank_with_ties(const std::vector<double>& values) {
  size_t m = values.size();
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(m);
  size_t i = 0;
  while (i < m) {
    size_t j = i;
    while (j + 1 < m && values[order[j + 1]] == values[order[i]]) j++;
    double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; k++) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

struct RankCurves {
  // [method][step] average rank over tasks, plus its standard error
  std::vector<std::vector<double>> mean, se;
};

// best[method][task][step]: best-so-far series per method on identical tasks.
inline RankCurves rank_curves(const std::vector<std::vector<std::vector<double>>>& best) {
  POP_CHECK(!best.empty() && !best[0].empty(), "rank_curves needs methods and tasks");
  size_t M = best.size(), n_tasks = best[0].size(), steps = best[0][0].size();
  for (const auto& m : best) {
    POP_CHECK(m.size() == n_tasks, "rank_curves: mismatched task sets");
    for (const auto& s : m) POP_CHECK(s.size() == steps, "rank_curves: mismatched budgets");
  }
  RankCurves out;
  out.mean.assign(M, std::vector<double>(steps, 0.0));
  out.se.assign(M, std::vector<double>(steps, 0.0));
  std::vector<double> vals(M);
  std::vector<std::vector<double>> acc(M);  // per-method ranks over tasks at one step
  for (auto& a : acc) a.resize(n_tasks);
  for (size_t t = 0; t < steps; t++) {
    for (size_t k = 0; k < n_tasks; k++) {
      for (size_t m = 0; m < M; m++) vals[m] = best[m][k][t];
      std::vector<double> r = rank_with_ties(vals);
      for (size_t m = 0; m < M; m++) acc[m][k] = r[m];
    }
    for (size_t m = 0; m < M; m++) {
      MeanCi mc = mean_ci(acc[m]);
      out.mean[m][t] = mc.mean;
      double ss = 0;
      for (double v : acc[m]) ss += (v - mc.mean) * (v - mc.mean);
      double sd = n_tasks > 1 ? std::sqrt(ss / static_cast<double>(n_tasks - 1)) : 0.0;
      out.se[m][t] = sd / std::sqrt(static_cast<double>(n_tasks));
    }
  }
  return out;
}

// Best-so-far series from a raw value sequence.
inline std::vector<double> best_so_far(const std::vector<double>& values) {
  std::vector<double> out(values.size());
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < values.size(); i++) {
    best = std::min(best, values[i]);
    out[i] = best;
  }
  return out;
}

}  // namespace pop
