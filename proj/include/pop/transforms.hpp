#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "pop/common.hpp"

namespace pop {

inline constexpr double kSigmaFloor = 1e-8;

// Online mean/variance (Welford). Variance is the population variance M2/n.
struct Welford {
  i64 n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n++;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  double var() const {
    POP_CHECK(n >= 1, "variance of empty stream");
    return m2 / static_cast<double>(n);
  }

  double sd() const { return std::max(std::sqrt(var()), kSigmaFloor); }
};

inline double z_transform(double value, const Welford& stats) {
  return (value - stats.mean) / stats.sd();
}

// State-space normalization: boundary scaling to [-V, V] followed by an
// online Z-transformation, with the matching Jacobian factor for gradients.
// x uses the fixed domain box; y uses running extrema that widen as the
// landscape is explored.
struct TransformState {
  std::vector<double> xmin, xmax;  // domain box
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  double Vx = 3.0, Vy = 3.0;
  std::vector<Welford> x_stats;  // over boundary-scaled x, per dimension
  Welford y_stats;               // over boundary-scaled y

  TransformState() = default;
  TransformState(std::vector<double> lo, std::vector<double> hi, double vx = 3.0, double vy = 3.0)
      : xmin(std::move(lo)), xmax(std::move(hi)), Vx(vx), Vy(vy),
        x_stats(xmin.size()) {
    POP_CHECK(xmin.size() == xmax.size(), "domain box dimension mismatch");
    POP_CHECK(Vx > 0 && Vy > 0, "target scales must be positive");
    for (size_t d = 0; d < xmin.size(); d++)
      POP_CHECK(xmin[d] < xmax[d], "degenerate domain bound");
  }

  i64 dim() const { return static_cast<i64>(xmin.size()); }

  double boundary_scale_x(double x, i64 d) const {
    size_t k = static_cast<size_t>(d);
    return Vx * (2.0 * (x - xmin[k]) / (xmax[k] - xmin[k]) - 1.0);
  }

  void boundary_scale_x_all(const double* x, double* out) const {
    for (i64 d = 0; d < dim(); d++) out[d] = boundary_scale_x(x[d], d);
  }

  double y_range() const { return ymax - ymin; }

  // Running-extrema scaling; flat range maps to the interval center.
  double boundary_scale_y(double y) const {
    POP_CHECK(ymin <= ymax, "boundary_scale_y before any observation");
    double r = y_range();
    if (r <= 0.0) return 0.0;
    return Vy * (2.0 * (y - ymin) / r - 1.0);
  }

  // Full forward transforms (boundary scale then Z) under current statistics.
  double transform_x(double x, i64 d) const {
    return z_transform(boundary_scale_x(x, d), x_stats[static_cast<size_t>(d)]);
  }

  double transform_y(double y) const { return z_transform(boundary_scale_y(y), y_stats); }

  double inverse_transform_x(double xt, i64 d) const {
    size_t k = static_cast<size_t>(d);
    double b = xt * x_stats[k].sd() + x_stats[k].mean;  // undo Z
    return xmin[k] + (b / Vx + 1.0) * 0.5 * (xmax[k] - xmin[k]);
  }

  // d y_tilde / d x_tilde per dimension: the Jacobian of the composed maps.
  // The factors of 2 from both boundary scalings cancel.
  double gradient_scale(i64 d) const {
    size_t k = static_cast<size_t>(d);
    double yr = std::max(y_range(), kSigmaFloor);
    return (x_stats[k].sd() / y_stats.sd()) * (Vy / Vx) * ((xmax[k] - xmin[k]) / yr);
  }

  void scale_gradient(const double* g, double* out) const {
    for (i64 d = 0; d < dim(); d++) out[d] = gradient_scale(d) * g[d];
  }

  // Widen extrema to include y, then fold the boundary-scaled observation
  // into the running statistics (under the just-widened extrema).
  void observe(const double* x, double y) {
    POP_CHECK(std::isfinite(y), "non-finite y observed");
    for (i64 d = 0; d < dim(); d++)
      POP_CHECK(std::isfinite(x[d]), "non-finite x observed");
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
    for (i64 d = 0; d < dim(); d++)
      x_stats[static_cast<size_t>(d)].add(boundary_scale_x(x[d], d));
    y_stats.add(boundary_scale_y(y));
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["xmin"] = xmin;
    j["xmax"] = xmax;
    j["ymin"] = ymin;
    j["ymax"] = ymax;
    j["Vx"] = Vx;
    j["Vy"] = Vy;
    auto ws = nlohmann::json::array();
    for (const auto& w : x_stats) ws.push_back({{"n", w.n}, {"mean", w.mean}, {"m2", w.m2}});
    j["x_stats"] = ws;
    j["y_stats"] = {{"n", y_stats.n}, {"mean", y_stats.mean}, {"m2", y_stats.m2}};
    return j;
  }

  static TransformState from_json(const nlohmann::json& j) {
    TransformState s(j.at("xmin").get<std::vector<double>>(),
                     j.at("xmax").get<std::vector<double>>(), j.at("Vx"), j.at("Vy"));
    s.ymin = j.at("ymin");
    s.ymax = j.at("ymax");
    const auto& ws = j.at("x_stats");
    POP_CHECK(ws.size() == s.x_stats.size(), "transform state dim mismatch");
    for (size_t d = 0; d < s.x_stats.size(); d++) {
      s.x_stats[d].n = ws[d].at("n");
      s.x_stats[d].mean = ws[d].at("mean");
      s.x_stats[d].m2 = ws[d].at("m2");
    }
    s.y_stats.n = j.at("y_stats").at("n");
    s.y_stats.mean = j.at("y_stats").at("mean");
    s.y_stats.m2 = j.at("y_stats").at("m2");
    return s;
  }
};

}  // namespace pop
