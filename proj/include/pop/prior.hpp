#pragma once

#include <cblas.h>

#include <cmath>
#include <vector>

#include <json.hpp>

#include "pop/blas_boot.hpp"
#include "pop/common.hpp"
#include "pop/config.hpp"
#include "pop/rng.hpp"
#include "pop/tensor.hpp"

namespace pop {

// Prior over objectives f = alpha*f_C + (1-alpha)*f_RFF: a random positive
// quadratic mixed with a random-Fourier-feature GP sample. Defaults follow
// the 2-d training setup; higher dimensions scale M to keep the RFF
// approximation honest.
struct PriorConfig {
  i64 D = 2;
  i64 M = 1000;
  double beta1_lo = 1e-8, beta1_hi = 1e-2;  // curvature
  double beta2_lo = -50.0, beta2_hi = 50.0; // quadratic center
  double alpha_lo = 0.05, alpha_hi = 0.4;   // mixture weight when not pure convex
  double ell_lo = 4.0, ell_hi = 8.0;        // RFF lengthscale
  double sigma_lo = 0.5, sigma_hi = 3.0;    // RFF output scale
  double p_convex = 0.15;
  std::vector<double> box_lo, box_hi;       // domain, default [-50, 50]^D

  void finalize() {
    if (box_lo.empty()) box_lo.assign(static_cast<size_t>(D), -50.0);
    if (box_hi.empty()) box_hi.assign(static_cast<size_t>(D), 50.0);
    validate();
  }

  void validate() const {
    POP_CHECK(D >= 1 && M >= 1, "prior needs D >= 1, M >= 1");
    POP_CHECK(beta1_lo > 0 && beta1_lo <= beta1_hi, "beta1 range invalid (must stay positive)");
    POP_CHECK(beta2_lo <= beta2_hi, "beta2 range invalid");
    POP_CHECK(alpha_lo <= alpha_hi, "alpha range invalid");
    POP_CHECK(ell_lo <= ell_hi && ell_lo > 0, "lengthscale range invalid");
    POP_CHECK(sigma_lo <= sigma_hi, "sigma range invalid");
    POP_CHECK(p_convex >= 0 && p_convex <= 1, "p_convex outside [0,1]");
    POP_CHECK(box_lo.size() == static_cast<size_t>(D) && box_hi.size() == static_cast<size_t>(D),
              "domain box dimension mismatch");
    for (i64 d = 0; d < D; d++)
      POP_CHECK(box_lo[static_cast<size_t>(d)] < box_hi[static_cast<size_t>(d)],
                "domain box lower must be < upper");
  }

  static PriorConfig from_config(const Config& c) {
    PriorConfig p;
    p.D = c.i64_("prior.D", p.D);
    p.M = c.i64_("prior.M", p.M);
    p.beta1_lo = c.f64("prior.beta1_lo", p.beta1_lo);
    p.beta1_hi = c.f64("prior.beta1_hi", p.beta1_hi);
    p.beta2_lo = c.f64("prior.beta2_lo", p.beta2_lo);
    p.beta2_hi = c.f64("prior.beta2_hi", p.beta2_hi);
    p.alpha_lo = c.f64("prior.alpha_lo", p.alpha_lo);
    p.alpha_hi = c.f64("prior.alpha_hi", p.alpha_hi);
    p.ell_lo = c.f64("prior.ell_lo", p.ell_lo);
    p.ell_hi = c.f64("prior.ell_hi", p.ell_hi);
    p.sigma_lo = c.f64("prior.sigma_lo", p.sigma_lo);
    p.sigma_hi = c.f64("prior.sigma_hi", p.sigma_hi);
    p.p_convex = c.f64("prior.p_convex", p.p_convex);
    double blo = c.f64("prior.box_lo", -50.0);
    double bhi = c.f64("prior.box_hi", 50.0);
    p.box_lo.assign(static_cast<size_t>(p.D), blo);
    p.box_hi.assign(static_cast<size_t>(p.D), bhi);
    p.finalize();
    return p;
  }
};

struct SampledFunction {
  double alpha = 1.0;
  std::vector<double> beta1, beta2;  // D
  std::vector<double> w1;            // M, ~N(0, sigma^2/M)
  Mat w2;                            // M x D, rows ~N(0, I/ell^2)
  std::vector<double> w3;            // M, ~U(0, 2pi)
  std::vector<double> box_lo, box_hi;

  i64 dim() const { return static_cast<i64>(beta1.size()); }
  i64 features() const { return static_cast<i64>(w1.size()); }

  double eval_quad(const double* x) const {
    double s = 0;
    for (size_t d = 0; d < beta1.size(); d++) {
      double z = x[d] - beta2[d];
      s += beta1[d] * z * z;
    }
    return s;
  }

  double eval_rff(const double* x) const {
    const i64 M = features(), D = dim();
    proj_.resize(static_cast<size_t>(M));
    cblas_dgemv(CblasRowMajor, CblasNoTrans, static_cast<int>(M), static_cast<int>(D), 1.0,
                w2.v.data(), static_cast<int>(D), x, 1, 0.0, proj_.data(), 1);
    double s = 0;
    for (i64 m = 0; m < M; m++)
      s += w1[static_cast<size_t>(m)] * std::cos(proj_[static_cast<size_t>(m)] + w3[static_cast<size_t>(m)]);
    return 1.4142135623730950488 * s;
  }

  double evaluate(const double* x) const {
    double f = alpha * eval_quad(x);
    if (alpha < 1.0) f += (1.0 - alpha) * eval_rff(x);
    POP_CHECK(std::isfinite(f), "non-finite objective value");
    return f;
  }

  double evaluate(const std::vector<double>& x) const { return evaluate(x.data()); }

  // value and gradient in one pass (shared trig projection)
  double eval_grad(const double* x, double* g) const {
    const i64 M = features(), D = dim();
    double f = 0;
    for (i64 d = 0; d < D; d++) {
      double z = x[d] - beta2[static_cast<size_t>(d)];
      f += alpha * beta1[static_cast<size_t>(d)] * z * z;
      g[d] = alpha * 2.0 * beta1[static_cast<size_t>(d)] * z;
    }
    if (alpha < 1.0) {
      proj_.resize(static_cast<size_t>(M));
      sinw_.resize(static_cast<size_t>(M));
      cblas_dgemv(CblasRowMajor, CblasNoTrans, static_cast<int>(M), static_cast<int>(D), 1.0,
                  w2.v.data(), static_cast<int>(D), x, 1, 0.0, proj_.data(), 1);
      const double sqrt2 = 1.4142135623730950488;
      double s = 0;
      for (i64 m = 0; m < M; m++) {
        double th = proj_[static_cast<size_t>(m)] + w3[static_cast<size_t>(m)];
        s += w1[static_cast<size_t>(m)] * std::cos(th);
        sinw_[static_cast<size_t>(m)] = w1[static_cast<size_t>(m)] * std::sin(th);
      }
      f += (1.0 - alpha) * sqrt2 * s;
      // g += (1-alpha) * (-sqrt2) * w2^T (w1 .* sin)
      cblas_dgemv(CblasRowMajor, CblasTrans, static_cast<int>(M), static_cast<int>(D),
                  -(1.0 - alpha) * sqrt2, w2.v.data(), static_cast<int>(D), sinw_.data(), 1, 1.0,
                  g, 1);
    }
    POP_CHECK(std::isfinite(f), "non-finite objective value");
    return f;
  }

  void gradient(const double* x, double* g) const { eval_grad(x, g); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["schema"] = "pop_function_v1";
    j["alpha"] = alpha;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["w1"] = w1;
    j["w2"] = w2.v;
    j["w3"] = w3;
    j["box_lo"] = box_lo;
    j["box_hi"] = box_hi;
    return j;
  }

  static SampledFunction from_json(const nlohmann::json& j) {
    POP_CHECK(j.at("schema") == "pop_function_v1", "unknown function schema");
    SampledFunction f;
    f.alpha = j.at("alpha");
    f.beta1 = j.at("beta1").get<std::vector<double>>();
    f.beta2 = j.at("beta2").get<std::vector<double>>();
    f.w1 = j.at("w1").get<std::vector<double>>();
    f.w3 = j.at("w3").get<std::vector<double>>();
    f.box_lo = j.at("box_lo").get<std::vector<double>>();
    f.box_hi = j.at("box_hi").get<std::vector<double>>();
    f.w2 = Mat(static_cast<i64>(f.w1.size()), static_cast<i64>(f.beta1.size()));
    f.w2.v = j.at("w2").get<std::vector<double>>();
    POP_CHECK(f.w2.v.size() == f.w1.size() * f.beta1.size(), "w2 size mismatch");
    return f;
  }

 private:
  // scratch shared across evaluations; SampledFunction is logically immutable
  // but evaluation is only safe concurrently with per-thread copies
  mutable std::vector<double> proj_, sinw_;
};

// Draw order is part of the format: alpha gate, alpha, beta1, beta2, w1,
// w2 (row major), w3. Changing it silently breaks seed reproducibility.
inline SampledFunction sample_function(const PriorConfig& cfg, Rng& rng) {
  cfg.validate();
  SampledFunction f;
  const size_t D = static_cast<size_t>(cfg.D), M = static_cast<size_t>(cfg.M);
  if (rng.uniform() < cfg.p_convex)
    f.alpha = 1.0;
  else
    f.alpha = rng.uniform(cfg.alpha_lo, cfg.alpha_hi);
  f.beta1.resize(D);
  f.beta2.resize(D);
  for (size_t d = 0; d < D; d++) f.beta1[d] = rng.uniform(cfg.beta1_lo, cfg.beta1_hi);
  for (size_t d = 0; d < D; d++) f.beta2[d] = rng.uniform(cfg.beta2_lo, cfg.beta2_hi);
  double ell = rng.uniform(cfg.ell_lo, cfg.ell_hi);
  double sigma = rng.uniform(cfg.sigma_lo, cfg.sigma_hi);
  f.w1.resize(M);
  double wsd = sigma / std::sqrt(static_cast<double>(cfg.M));
  for (size_t m = 0; m < M; m++) f.w1[m] = rng.normal(0.0, wsd);
  f.w2 = Mat(cfg.M, cfg.D);
  double fsd = 1.0 / ell;
  for (i64 i = 0; i < f.w2.size(); i++) f.w2.v[static_cast<size_t>(i)] = rng.normal(0.0, fsd);
  f.w3.resize(M);
  const double two_pi = 6.283185307179586476925286766559;
  for (size_t m = 0; m < M; m++) f.w3[m] = rng.uniform(0.0, two_pi);
  f.box_lo = cfg.box_lo;
  f.box_hi = cfg.box_hi;
  return f;
}

}  // namespace pop
