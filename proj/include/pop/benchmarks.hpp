#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pop/common.hpp"
#include "pop/objective.hpp"
#include "pop/rng.hpp"

namespace pop {

struct BenchmarkFunction {
  std::string name;
  i64 D = 0;
  std::vector<double> lo, hi;
  std::string category;  // many_local | bowl | plate | valley | ridge_drop | other
  std::function<double(const double*)> f;
  std::function<void(const double*, double*)> grad;  // empty: central differences
  std::vector<double> argmin;
  double ymin = 0;
  double ymax = std::numeric_limits<double>::quiet_NaN();  // filled by the catalog
  u64 ymax_seed = 0;

  bool analytic_grad() const { return static_cast<bool>(grad); }
  bool regret_valid() const { return std::isfinite(ymax) && ymax > ymin; }
};

// Central differences with a box-scaled step, used when no analytic gradient
// is registered.
inline void benchmark_gradient(const BenchmarkFunction& b, const double* x, double* g) {
  if (b.grad) {
    b.grad(x, g);
    return;
  }
  std::vector<double> xp(x, x + b.D);
  for (i64 d = 0; d < b.D; d++) {
    double h = 6.0554544523933429e-6 * (b.hi[static_cast<size_t>(d)] - b.lo[static_cast<size_t>(d)]);
    xp[static_cast<size_t>(d)] = x[d] + h;
    double fp = b.f(xp.data());
    xp[static_cast<size_t>(d)] = x[d] - h;
    double fm = b.f(xp.data());
    xp[static_cast<size_t>(d)] = x[d];
    g[d] = (fp - fm) / (2 * h);
  }
}

inline Objective objective_of(const BenchmarkFunction& b) {
  Objective o;
  o.D = b.D;
  o.lo = b.lo;
  o.hi = b.hi;
  o.eval = [&b](const double* x) { return b.f(x); };
  o.eval_grad = [&b](const double* x, double* g) {
    benchmark_gradient(b, x, g);
    return b.f(x);
  };
  return o;
}

namespace detail {

inline double halton(u64 i, u64 base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

// Coordinate pattern search (maximization), step-halving, box-clipped.
inline double pattern_ascent(const std::function<double(const double*)>& f,
                             const std::vector<double>& lo, const std::vector<double>& hi,
                             std::vector<double>& x, i64 iters) {
  const size_t D = x.size();
  std::vector<double> step(D), cand(D);
  for (size_t d = 0; d < D; d++) step[d] = 0.05 * (hi[d] - lo[d]);
  double fx = f(x.data());
  for (i64 it = 0; it < iters; it++) {
    bool improved = false;
    for (size_t d = 0; d < D; d++)
      for (double sgn : {1.0, -1.0}) {
        cand = x;
        cand[d] = std::clamp(x[d] + sgn * step[d], lo[d], hi[d]);
        double fc = f(cand.data());
        if (fc > fx) {
          x = cand;
          fx = fc;
          improved = true;
        }
      }
    if (!improved) {
      double mx = 0;
      for (size_t d = 0; d < D; d++) {
        step[d] *= 0.5;
        mx = std::max(mx, step[d] / (hi[d] - lo[d]));
      }
      if (mx < 1e-14) break;
    }
  }
  return fx;
}

}  // namespace detail

// Domain maximum estimate: a Halton scan (>= 1e5 points) plus every box
// corner, then pattern ascent from the ten best candidates.
inline double estimate_ymax(const BenchmarkFunction& b, Rng& rng, i64 n_points = 100000) {
  static const u64 bases[6] = {2, 3, 5, 7, 11, 13};
  POP_CHECK(b.D <= 6, "estimate_ymax supports up to 6 dimensions");
  const u64 offset = static_cast<u64>(rng.randint(1 << 20)) + 1;
  std::vector<std::pair<double, std::vector<double>>> top;  // best first, <= 10
  auto consider = [&](const std::vector<double>& x) {
    double y = b.f(x.data());
    if (!std::isfinite(y)) return;
    if (top.size() < 10 || y > top.back().first) {
      top.emplace_back(y, x);
      std::sort(top.begin(), top.end(),
                [](const auto& a, const auto& c) { return a.first > c.first; });
      if (top.size() > 10) top.pop_back();
    }
  };

  std::vector<double> x(static_cast<size_t>(b.D));
  for (i64 n = 0; n < n_points; n++) {
    for (i64 d = 0; d < b.D; d++)
      x[static_cast<size_t>(d)] =
          b.lo[static_cast<size_t>(d)] +
          (b.hi[static_cast<size_t>(d)] - b.lo[static_cast<size_t>(d)]) *
              detail::halton(offset + static_cast<u64>(n), bases[d]);
    consider(x);
  }
  for (i64 mask = 0; mask < (i64{1} << b.D); mask++) {
    for (i64 d = 0; d < b.D; d++)
      x[static_cast<size_t>(d)] =
          (mask >> d) & 1 ? b.hi[static_cast<size_t>(d)] : b.lo[static_cast<size_t>(d)];
    consider(x);
  }

  double best = top.front().first;
  for (auto& [y0, x0] : top) {
    std::vector<double> xa = x0;
    best = std::max(best, detail::pattern_ascent(b.f, b.lo, b.hi, xa, 200));
  }
  return best;
}

namespace detail {

inline BenchmarkFunction bench(std::string name, std::string cat, std::vector<double> lo,
                               std::vector<double> hi, std::vector<double> argmin, double ymin,
                               std::function<double(const double*)> f,
                               std::function<void(const double*, double*)> g = {}) {
  BenchmarkFunction b;
  b.name = std::move(name);
  b.D = static_cast<i64>(lo.size());
  b.lo = std::move(lo);
  b.hi = std::move(hi);
  b.category = std::move(cat);
  b.argmin = std::move(argmin);
  b.ymin = ymin;
  b.f = std::move(f);
  b.grad = std::move(g);
  POP_CHECK(b.D >= 1 && b.hi.size() == static_cast<size_t>(b.D) &&
                b.argmin.size() == static_cast<size_t>(b.D),
            "bad benchmark definition: " + b.name);
  return b;
}

inline std::vector<BenchmarkFunction> build_catalog() {
  const double pi = 3.14159265358979323846;
  std::vector<BenchmarkFunction> v;

  // -- many local minima ----------------------------------------------------
  v.push_back(bench(
      "ackley", "many_local", {-32.768, -32.768}, {32.768, 32.768}, {0.0, 0.0}, 0.0,
      [](const double* x) {
        double s2 = x[0] * x[0] + x[1] * x[1];
        double sc = std::cos(2 * 3.14159265358979323846 * x[0]) +
                    std::cos(2 * 3.14159265358979323846 * x[1]);
        return -20.0 * std::exp(-0.2 * std::sqrt(s2 / 2)) - std::exp(sc / 2) + 20.0 +
               2.718281828459045235;
      },
      [](const double* x, double* g) {
        const double pi_ = 3.14159265358979323846;
        double s2 = x[0] * x[0] + x[1] * x[1];
        double r = std::sqrt(s2 / 2);
        double sc = std::cos(2 * pi_ * x[0]) + std::cos(2 * pi_ * x[1]);
        double e2 = std::exp(sc / 2);
        for (int d = 0; d < 2; d++) {
          double t1 = r > 0 ? 2.0 * std::exp(-0.2 * r) * x[d] / r : 0.0;
          g[d] = t1 + pi_ * e2 * std::sin(2 * pi_ * x[d]);
        }
      }));

  v.push_back(bench(
      "rastrigin", "many_local", {-5.12, -5.12}, {5.12, 5.12}, {0.0, 0.0}, 0.0,
      [](const double* x) {
        const double pi_ = 3.14159265358979323846;
        double s = 20.0;
        for (int d = 0; d < 2; d++) s += x[d] * x[d] - 10 * std::cos(2 * pi_ * x[d]);
        return s;
      },
      [](const double* x, double* g) {
        const double pi_ = 3.14159265358979323846;
        for (int d = 0; d < 2; d++) g[d] = 2 * x[d] + 20 * pi_ * std::sin(2 * pi_ * x[d]);
      }));

  v.push_back(bench(
      "griewank", "many_local", {-600, -600}, {600, 600}, {0.0, 0.0}, 0.0,
      [](const double* x) {
        double s = (x[0] * x[0] + x[1] * x[1]) / 4000.0;
        double p = std::cos(x[0]) * std::cos(x[1] / std::sqrt(2.0));
        return s - p + 1.0;
      },
      [](const double* x, double* g) {
        double c0 = std::cos(x[0]), c1 = std::cos(x[1] / std::sqrt(2.0));
        g[0] = x[0] / 2000.0 + std::sin(x[0]) * c1;
        g[1] = x[1] / 2000.0 + c0 * std::sin(x[1] / std::sqrt(2.0)) / std::sqrt(2.0);
      }));

  v.push_back(bench(
      "levy", "many_local", {-10, -10}, {10, 10}, {1.0, 1.0}, 0.0,
      [](const double* x) {
        const double pi_ = 3.14159265358979323846;
        double w0 = 1 + (x[0] - 1) / 4, w1 = 1 + (x[1] - 1) / 4;
        double s0 = std::sin(pi_ * w0);
        double mid = (w0 - 1) * (w0 - 1) *
                     (1 + 10 * std::sin(pi_ * w0 + 1) * std::sin(pi_ * w0 + 1));
        double last =
            (w1 - 1) * (w1 - 1) * (1 + std::sin(2 * pi_ * w1) * std::sin(2 * pi_ * w1));
        return s0 * s0 + mid + last;
      },
      [](const double* x, double* g) {
        const double pi_ = 3.14159265358979323846;
        double w0 = 1 + (x[0] - 1) / 4, w1 = 1 + (x[1] - 1) / 4;
        double sa = std::sin(pi_ * w0 + 1), ca = std::cos(pi_ * w0 + 1);
        g[0] = (2 * std::sin(pi_ * w0) * std::cos(pi_ * w0) * pi_ +
                2 * (w0 - 1) * (1 + 10 * sa * sa) + (w0 - 1) * (w0 - 1) * 20 * sa * ca * pi_) /
               4;
        double sb = std::sin(2 * pi_ * w1), cb = std::cos(2 * pi_ * w1);
        g[1] = (2 * (w1 - 1) * (1 + sb * sb) + (w1 - 1) * (w1 - 1) * 2 * sb * cb * 2 * pi_) / 4;
      }));

  v.push_back(bench(
      "schwefel", "many_local", {-500, -500}, {500, 500},
      {420.96874654624651, 420.96874654624651}, 2.5455132345086895e-05,
      [](const double* x) {
        double s = 418.9829 * 2;
        for (int d = 0; d < 2; d++) s -= x[d] * std::sin(std::sqrt(std::fabs(x[d])));
        return s;
      },
      [](const double* x, double* g) {
        // d/dx [x sin(sqrt|x|)] = sin(u) + (u/2) cos(u) for both signs, u = sqrt|x|
        for (int d = 0; d < 2; d++) {
          double u = std::sqrt(std::fabs(x[d]));
          g[d] = -std::sin(u) - (u / 2) * std::cos(u);
        }
      }));

  v.push_back(bench(
      "drop_wave", "many_local", {-5.12, -5.12}, {5.12, 5.12}, {0.0, 0.0}, -1.0,
      [](const double* x) {
        double u = x[0] * x[0] + x[1] * x[1];
        return -(1 + std::cos(12 * std::sqrt(u))) / (0.5 * u + 2);
      },
      [](const double* x, double* g) {
        double u = x[0] * x[0] + x[1] * x[1];
        if (u == 0) {
          g[0] = g[1] = 0;
          return;
        }
        double su = std::sqrt(u);
        double n = 1 + std::cos(12 * su), m = 0.5 * u + 2;
        double dn = -6 * std::sin(12 * su) / su;
        double dfdu = -(dn * m - n * 0.5) / (m * m);
        g[0] = dfdu * 2 * x[0];
        g[1] = dfdu * 2 * x[1];
      }));

  v.push_back(bench(  // |.| kinks: finite-difference gradient mode
      "eggholder", "many_local", {-512, -512}, {512, 512},
      {512.0, 404.23180505066529}, -959.64066272085086,
      [](const double* x) {
        double a = x[1] + 47;
        return -a * std::sin(std::sqrt(std::fabs(x[0] / 2 + a))) -
               x[0] * std::sin(std::sqrt(std::fabs(x[0] - a)));
      }));

  // -- bowl shaped ----------------------------------------------------------
  v.push_back(bench(
      "sphere", "bowl", {-5.12, -5.12}, {5.12, 5.12}, {0.0, 0.0}, 0.0,
      [](const double* x) { return x[0] * x[0] + x[1] * x[1]; },
      [](const double* x, double* g) {
        g[0] = 2 * x[0];
        g[1] = 2 * x[1];
      }));

  v.push_back(bench(
      "sum_squares", "bowl", {-10, -10}, {10, 10}, {0.0, 0.0}, 0.0,
      [](const double* x) { return x[0] * x[0] + 2 * x[1] * x[1]; },
      [](const double* x, double* g) {
        g[0] = 2 * x[0];
        g[1] = 4 * x[1];
      }));

  v.push_back(bench(
      "bohachevsky", "bowl", {-100, -100}, {100, 100}, {0.0, 0.0}, 0.0,
      [](const double* x) {
        const double pi_ = 3.14159265358979323846;
        return x[0] * x[0] + 2 * x[1] * x[1] - 0.3 * std::cos(3 * pi_ * x[0]) -
               0.4 * std::cos(4 * pi_ * x[1]) + 0.7;
      },
      [](const double* x, double* g) {
        const double pi_ = 3.14159265358979323846;
        g[0] = 2 * x[0] + 0.9 * pi_ * std::sin(3 * pi_ * x[0]);
        g[1] = 4 * x[1] + 1.6 * pi_ * std::sin(4 * pi_ * x[1]);
      }));

  // -- plate shaped ---------------------------------------------------------
  v.push_back(bench(
      "booth", "plate", {-10, -10}, {10, 10}, {1.0, 3.0}, 0.0,
      [](const double* x) {
        double a = x[0] + 2 * x[1] - 7, b = 2 * x[0] + x[1] - 5;
        return a * a + b * b;
      },
      [](const double* x, double* g) {
        double a = x[0] + 2 * x[1] - 7, b = 2 * x[0] + x[1] - 5;
        g[0] = 2 * a + 4 * b;
        g[1] = 4 * a + 2 * b;
      }));

  v.push_back(bench(
      "matyas", "plate", {-10, -10}, {10, 10}, {0.0, 0.0}, 0.0,
      [](const double* x) {
        return 0.26 * (x[0] * x[0] + x[1] * x[1]) - 0.48 * x[0] * x[1];
      },
      [](const double* x, double* g) {
        g[0] = 0.52 * x[0] - 0.48 * x[1];
        g[1] = 0.52 * x[1] - 0.48 * x[0];
      }));

  v.push_back(bench(
      "zakharov", "plate", {-5, -5}, {10, 10}, {0.0, 0.0}, 0.0,
      [](const double* x) {
        double s1 = x[0] * x[0] + x[1] * x[1];
        double s2 = 0.5 * x[0] + 1.0 * x[1];
        return s1 + s2 * s2 + s2 * s2 * s2 * s2;
      },
      [](const double* x, double* g) {
        double s2 = 0.5 * x[0] + 1.0 * x[1];
        double c = 2 * s2 + 4 * s2 * s2 * s2;
        g[0] = 2 * x[0] + c * 0.5;
        g[1] = 2 * x[1] + c * 1.0;
      }));

  v.push_back(bench(
      "mccormick", "plate", {-1.5, -3}, {4, 4}, {-0.54719755119659785, -1.5471975511965976},
      -1.9132229549810362,
      [](const double* x) {
        double d = x[0] - x[1];
        return std::sin(x[0] + x[1]) + d * d - 1.5 * x[0] + 2.5 * x[1] + 1;
      },
      [](const double* x, double* g) {
        double c = std::cos(x[0] + x[1]), d = x[0] - x[1];
        g[0] = c + 2 * d - 1.5;
        g[1] = c - 2 * d + 2.5;
      }));

  // -- valley shaped ----------------------------------------------------------
  v.push_back(bench(
      "rosenbrock", "valley", {-5, -5}, {10, 10}, {1.0, 1.0}, 0.0,
      [](const double* x) {
        double a = 1 - x[0], b = x[1] - x[0] * x[0];
        return a * a + 100 * b * b;
      },
      [](const double* x, double* g) {
        double a = 1 - x[0], b = x[1] - x[0] * x[0];
        g[0] = -2 * a - 400 * x[0] * b;
        g[1] = 200 * b;
      }));

  v.push_back(bench(
      "six_hump_camel", "valley", {-3, -2}, {3, 2}, {0.089842013683013908, -0.71265640252535922},
      -1.0316284534898774,
      [](const double* x) {
        double x2 = x[0] * x[0], y2 = x[1] * x[1];
        return (4 - 2.1 * x2 + x2 * x2 / 3) * x2 + x[0] * x[1] + (-4 + 4 * y2) * y2;
      },
      [](const double* x, double* g) {
        double x2 = x[0] * x[0], y2 = x[1] * x[1];
        g[0] = 8 * x[0] - 8.4 * x2 * x[0] + 2 * x2 * x2 * x[0] + x[1];
        g[1] = x[0] - 8 * x[1] + 16 * y2 * x[1];
      }));

  v.push_back(bench(
      "three_hump_camel", "valley", {-5, -5}, {5, 5}, {0.0, 0.0}, 0.0,
      [](const double* x) {
        double x2 = x[0] * x[0];
        return 2 * x2 - 1.05 * x2 * x2 + x2 * x2 * x2 / 6 + x[0] * x[1] + x[1] * x[1];
      },
      [](const double* x, double* g) {
        double x2 = x[0] * x[0];
        g[0] = 4 * x[0] - 4.2 * x2 * x[0] + x2 * x2 * x[0] + x[1];
        g[1] = x[0] + 2 * x[1];
      }));

  // -- steep ridges and drops -------------------------------------------------
  v.push_back(bench(
      "easom", "ridge_drop", {-100, -100}, {100, 100}, {pi, pi}, -1.0,
      [](const double* x) {
        const double pi_ = 3.14159265358979323846;
        double q = (x[0] - pi_) * (x[0] - pi_) + (x[1] - pi_) * (x[1] - pi_);
        return -std::cos(x[0]) * std::cos(x[1]) * std::exp(-q);
      },
      [](const double* x, double* g) {
        const double pi_ = 3.14159265358979323846;
        double q = (x[0] - pi_) * (x[0] - pi_) + (x[1] - pi_) * (x[1] - pi_);
        double e = std::exp(-q);
        double c0 = std::cos(x[0]), c1 = std::cos(x[1]);
        g[0] = e * (std::sin(x[0]) * c1 + 2 * (x[0] - pi_) * c0 * c1);
        g[1] = e * (c0 * std::sin(x[1]) + 2 * (x[1] - pi_) * c0 * c1);
      }));

  v.push_back(bench(
      "michalewicz", "ridge_drop", {0, 0}, {pi, pi}, {2.2029055225132717, 1.5707963267948966},
      -1.8013034100985537,
      [](const double* x) {
        const double pi_ = 3.14159265358979323846;
        double s = 0;
        for (int d = 0; d < 2; d++) {
          double u = (d + 1) * x[d] * x[d] / pi_;
          double t = std::sin(u);
          s -= std::sin(x[d]) * std::pow(t * t, 10.0);
        }
        return s;
      },
      [](const double* x, double* g) {
        const double pi_ = 3.14159265358979323846;
        for (int d = 0; d < 2; d++) {
          double u = (d + 1) * x[d] * x[d] / pi_;
          double su = std::sin(u), cu = std::cos(u);
          double p19 = std::pow(su, 19.0);
          g[d] = -(std::cos(x[d]) * p19 * su +
                   std::sin(x[d]) * 20 * p19 * cu * (2.0 * (d + 1) * x[d] / pi_));
        }
      }));

  v.push_back(bench(  // Shekel foxholes; finite-difference gradient mode
      "de_jong_5", "ridge_drop", {-65.536, -65.536}, {65.536, 65.536},
      {-31.978333702524743, -31.978333604868492}, 0.99800383779444957,
      [](const double* x) {
        static const double a[5] = {-32, -16, 0, 16, 32};
        double s = 0.002;
        for (int i = 0; i < 25; i++) {
          double dx = x[0] - a[i % 5], dy = x[1] - a[i / 5];
          s += 1.0 / (i + 1 + std::pow(dx, 6.0) + std::pow(dy, 6.0));
        }
        return 1.0 / s;
      }));

  // -- other ------------------------------------------------------------------
  v.push_back(bench(
      "branin", "other", {-5, 0}, {10, 15}, {3.1415926535897932, 2.2750000000000000},
      0.39788735772973816,
      [](const double* x) {
        const double pi_ = 3.14159265358979323846;
        double b = 5.1 / (4 * pi_ * pi_), c = 5 / pi_, s = 10, t = 1 / (8 * pi_);
        double term = x[1] - b * x[0] * x[0] + c * x[0] - 6;
        return term * term + s * (1 - t) * std::cos(x[0]) + s;
      },
      [](const double* x, double* g) {
        const double pi_ = 3.14159265358979323846;
        double b = 5.1 / (4 * pi_ * pi_), c = 5 / pi_, s = 10, t = 1 / (8 * pi_);
        double term = x[1] - b * x[0] * x[0] + c * x[0] - 6;
        g[0] = 2 * term * (-2 * b * x[0] + c) - s * (1 - t) * std::sin(x[0]);
        g[1] = 2 * term;
      }));

  v.push_back(bench(
      "beale", "other", {-4.5, -4.5}, {4.5, 4.5}, {3.0, 0.5}, 0.0,
      [](const double* x) {
        double e1 = 1.5 - x[0] + x[0] * x[1];
        double e2 = 2.25 - x[0] + x[0] * x[1] * x[1];
        double e3 = 2.625 - x[0] + x[0] * x[1] * x[1] * x[1];
        return e1 * e1 + e2 * e2 + e3 * e3;
      },
      [](const double* x, double* g) {
        double y = x[1], y2 = y * y, y3 = y2 * y;
        double e1 = 1.5 - x[0] + x[0] * y;
        double e2 = 2.25 - x[0] + x[0] * y2;
        double e3 = 2.625 - x[0] + x[0] * y3;
        g[0] = 2 * e1 * (y - 1) + 2 * e2 * (y2 - 1) + 2 * e3 * (y3 - 1);
        g[1] = 2 * e1 * x[0] + 2 * e2 * 2 * x[0] * y + 2 * e3 * 3 * x[0] * y2;
      }));

  v.push_back(bench(
      "goldstein_price", "other", {-2, -2}, {2, 2}, {0.0, -1.0}, 3.0,
      [](const double* x) {
        double u = x[0] + x[1] + 1;
        double a = 19 - 14 * x[0] + 3 * x[0] * x[0] - 14 * x[1] + 6 * x[0] * x[1] +
                   3 * x[1] * x[1];
        double vzw = 2 * x[0] - 3 * x[1];
        double b = 18 - 32 * x[0] + 12 * x[0] * x[0] + 48 * x[1] - 36 * x[0] * x[1] +
                   27 * x[1] * x[1];
        return (1 + u * u * a) * (30 + vzw * vzw * b);
      },
      [](const double* x, double* g) {
        double u = x[0] + x[1] + 1;
        double a = 19 - 14 * x[0] + 3 * x[0] * x[0] - 14 * x[1] + 6 * x[0] * x[1] +
                   3 * x[1] * x[1];
        double da = -14 + 6 * x[0] + 6 * x[1];  // same for both coordinates
        double w = 2 * x[0] - 3 * x[1];
        double b = 18 - 32 * x[0] + 12 * x[0] * x[0] + 48 * x[1] - 36 * x[0] * x[1] +
                   27 * x[1] * x[1];
        double dbx = -32 + 24 * x[0] - 36 * x[1];
        double dby = 48 - 36 * x[0] + 54 * x[1];
        double f1 = 1 + u * u * a, f2 = 30 + w * w * b;
        double f1x = 2 * u * a + u * u * da, f1y = f1x;
        double f2x = 4 * w * b + w * w * dbx;
        double f2y = -6 * w * b + w * w * dby;
        g[0] = f1x * f2 + f1 * f2x;
        g[1] = f1y * f2 + f1 * f2y;
      }));

  {
    static const double h3a[4] = {1.0, 1.2, 3.0, 3.2};
    static const double h3A[4][3] = {{3, 10, 30}, {0.1, 10, 35}, {3, 10, 30}, {0.1, 10, 35}};
    static const double h3P[4][3] = {{0.3689, 0.1170, 0.2673},
                                     {0.4699, 0.4387, 0.7470},
                                     {0.1091, 0.8732, 0.5547},
                                     {0.0381, 0.5743, 0.8828}};
    v.push_back(bench(
        "hartmann_3", "other", {0, 0, 0}, {1, 1, 1},
        {0.11458887546003117, 0.55564889487240876, 0.85254698606185575}, -3.8627797873326628,
        [](const double* x) {
          double s = 0;
          for (int i = 0; i < 4; i++) {
            double e = 0;
            for (int j = 0; j < 3; j++) e += h3A[i][j] * (x[j] - h3P[i][j]) * (x[j] - h3P[i][j]);
            s += h3a[i] * std::exp(-e);
          }
          return -s;
        },
        [](const double* x, double* g) {
          for (int j = 0; j < 3; j++) g[j] = 0;
          for (int i = 0; i < 4; i++) {
            double e = 0;
            for (int j = 0; j < 3; j++) e += h3A[i][j] * (x[j] - h3P[i][j]) * (x[j] - h3P[i][j]);
            double w = h3a[i] * std::exp(-e);
            for (int j = 0; j < 3; j++) g[j] += w * 2 * h3A[i][j] * (x[j] - h3P[i][j]);
          }
        }));
  }

  {
    static const double h6a[4] = {1.0, 1.2, 3.0, 3.2};
    static const double h6A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
    static const double h6P[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                     {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                     {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                     {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
    v.push_back(bench(
        "hartmann_6", "other", {0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1},
        {0.20168950807907104, 0.15001069, 0.47687397403953552, 0.27533243000000002,
         0.3116516155296517, 0.65730053403953559},
        -3.3223680114155152,
        [](const double* x) {
          double s = 0;
          for (int i = 0; i < 4; i++) {
            double e = 0;
            for (int j = 0; j < 6; j++) e += h6A[i][j] * (x[j] - h6P[i][j]) * (x[j] - h6P[i][j]);
            s += h6a[i] * std::exp(-e);
          }
          return -s;
        },
        [](const double* x, double* g) {
          for (int j = 0; j < 6; j++) g[j] = 0;
          for (int i = 0; i < 4; i++) {
            double e = 0;
            for (int j = 0; j < 6; j++) e += h6A[i][j] * (x[j] - h6P[i][j]) * (x[j] - h6P[i][j]);
            double w = h6a[i] * std::exp(-e);
            for (int j = 0; j < 6; j++) g[j] += w * 2 * h6A[i][j] * (x[j] - h6P[i][j]);
          }
        }));
  }

  v.push_back(bench(
      "styblinski_tang", "other", {-5, -5}, {5, 5},
      {-2.9035340276816015, -2.9035340276816015}, -78.332331407542824,
      [](const double* x) {
        double s = 0;
        for (int d = 0; d < 2; d++) {
          double x2 = x[d] * x[d];
          s += x2 * x2 - 16 * x2 + 5 * x[d];
        }
        return 0.5 * s;
      },
      [](const double* x, double* g) {
        for (int d = 0; d < 2; d++) g[d] = 0.5 * (4 * x[d] * x[d] * x[d] - 32 * x[d] + 5);
      }));

  v.push_back(bench(
      "gramacy_lee", "other", {0.5}, {2.5}, {0.54856344402236212}, -0.86901113498949978,
      [](const double* x) {
        const double pi_ = 3.14159265358979323846;
        double q = x[0] - 1;
        return std::sin(10 * pi_ * x[0]) / (2 * x[0]) + q * q * q * q;
      },
      [](const double* x, double* g) {
        const double pi_ = 3.14159265358979323846;
        double q = x[0] - 1;
        g[0] = 10 * pi_ * std::cos(10 * pi_ * x[0]) / (2 * x[0]) -
               std::sin(10 * pi_ * x[0]) / (2 * x[0] * x[0]) + 4 * q * q * q;
      }));

  return v;
}

}  // namespace detail

inline const u64 kYmaxSeed = 20260815;

// The full catalog with ymax estimates filled once under a fixed recorded
// seed. Spans all five geometry categories at native dimensionality.
inline const std::vector<BenchmarkFunction>& benchmark_catalog() {
  static const std::vector<BenchmarkFunction> cat = [] {
    std::vector<BenchmarkFunction> v = detail::build_catalog();
    for (auto& b : v) {
      Rng rng(derive_seed(kYmaxSeed, "ymax", std::hash<std::string>{}(b.name)));
      b.ymax_seed = kYmaxSeed;
      b.ymax = estimate_ymax(b, rng);
      POP_CHECK(b.ymax > b.ymin, "degenerate benchmark range: " + b.name);
    }
    return v;
  }();
  return cat;
}

inline const BenchmarkFunction& find_benchmark(const std::string& name) {
  for (const auto& b : benchmark_catalog())
    if (b.name == name) return b;
  fail("unknown benchmark: " + name);
}

inline nlohmann::json benchmark_catalog_json() {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : benchmark_catalog()) {
    nlohmann::json j;
    j["name"] = b.name;
    j["dim"] = b.D;
    j["lo"] = b.lo;
    j["hi"] = b.hi;
    j["category"] = b.category;
    j["argmin"] = b.argmin;
    j["ymin"] = b.ymin;
    j["ymax"] = b.ymax;
    j["ymax_seed"] = b.ymax_seed;
    j["gradient"] = b.analytic_grad() ? "analytic" : "central_fd";
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace pop
