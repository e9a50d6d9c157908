#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pop/config.hpp"
#include "pop/env.hpp"
#include "pop/objective.hpp"
#include "pop/rng.hpp"

namespace pop {

struct BaselineConfig {
  // Adam
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  // L-BFGS
  i64 lbfgs_m = 10;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  i64 max_probes = 20;
  bool count_evaluations = false;  // probes consume budget when true
  // populations
  i64 pop_size = 20;
  i64 tournament = 3;
  double mutation_sd_frac = 0.1;  // of box width per dimension
  double de_F = 0.8, de_CR = 0.9;

  void validate() const {
    POP_CHECK(adam_eps > 0 && adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 &&
                  adam_beta2 < 1,
              "baseline: bad adam constants");
    POP_CHECK(lbfgs_m >= 1 && armijo_c1 > 0 && armijo_c1 < 1 && backtrack > 0 && backtrack < 1 &&
                  max_probes >= 1,
              "baseline: bad lbfgs constants");
    POP_CHECK(pop_size >= 4 && tournament >= 1 && tournament <= pop_size,
              "baseline: population must be >= 4 with a valid tournament size");
    POP_CHECK(mutation_sd_frac > 0 && de_F >= 0 && de_CR >= 0 && de_CR <= 1,
              "baseline: bad GA/DE constants");
  }

  static BaselineConfig from_config(const Config& c) {
    BaselineConfig b;
    b.adam_beta1 = c.f64("baseline.adam_beta1", b.adam_beta1);
    b.adam_beta2 = c.f64("baseline.adam_beta2", b.adam_beta2);
    b.adam_eps = c.f64("baseline.adam_eps", b.adam_eps);
    b.lbfgs_m = c.i64_("baseline.lbfgs_m", b.lbfgs_m);
    b.armijo_c1 = c.f64("baseline.armijo_c1", b.armijo_c1);
    b.backtrack = c.f64("baseline.backtrack", b.backtrack);
    b.max_probes = c.i64_("baseline.max_probes", b.max_probes);
    b.count_evaluations = c.flag("baseline.count_evaluations", b.count_evaluations);
    b.pop_size = c.i64_("baseline.pop_size", b.pop_size);
    b.tournament = c.i64_("baseline.tournament", b.tournament);
    b.mutation_sd_frac = c.f64("baseline.mutation_sd_frac", b.mutation_sd_frac);
    b.de_F = c.f64("baseline.de_F", b.de_F);
    b.de_CR = c.f64("baseline.de_CR", b.de_CR);
    b.validate();
    return b;
  }
};

// App. D grid shared by the sweep harness and the tuned-value tests.
inline const std::vector<double>& lr_sweep_grid() {
  static const std::vector<double> g = {0.01, 0.02, 0.03, 0.05, 0.1,  0.2,  0.3,  0.5, 1.0,
                                        2.0,  3.0,  5.0,  10.0, 20.0, 30.0, 50.0, 100.0};
  return g;
}

struct BaselineRun {
  Trajectory traj;  // context records first, then one record per evaluation
  bool failed = false;
  i64 evals = 0;  // optimization-phase objective calls (context excluded)
};

namespace detail {

inline BaselineRun start_run(const std::vector<TrajectoryRecord>& ctx, i64 T) {
  BaselineRun run;
  run.traj.c = static_cast<i64>(ctx.size());
  run.traj.T = T;
  run.traj.records = ctx;
  return run;
}

inline const TrajectoryRecord& context_argmin(const std::vector<TrajectoryRecord>& ctx) {
  POP_CHECK(!ctx.empty(), "first-order baselines need a nonempty context");
  size_t best = 0;
  for (size_t i = 1; i < ctx.size(); i++)
    if (ctx[i].y < ctx[best].y) best = i;
  return ctx[best];
}

inline void clip_box(const Objective& o, double* x) {
  for (i64 d = 0; d < o.D; d++)
    x[d] = std::clamp(x[d], o.lo[static_cast<size_t>(d)], o.hi[static_cast<size_t>(d)]);
}

// Guarded evaluations: a thrown or non-finite result reports false and the
// caller marks the run failed, mirroring the POP environment.
inline bool eval_y(const Objective& o, const double* x, double& y) {
  try {
    y = o.eval(x);
  } catch (const std::exception&) {
    return false;
  }
  return std::isfinite(y);
}

inline bool eval_yg(const Objective& o, const double* x, double& y, double* g) {
  try {
    y = o.eval_grad(x, g);
  } catch (const std::exception&) {
    return false;
  }
  if (!std::isfinite(y)) return false;
  for (i64 d = 0; d < o.D; d++)
    if (!std::isfinite(g[d])) return false;
  return true;
}

inline void push_record(BaselineRun& run, const std::vector<double>& x, double y,
                        const std::vector<double>& g, double time_frac) {
  TrajectoryRecord r;
  r.x = x;
  r.y = y;
  r.g = g.empty() ? std::vector<double>(x.size(), 0.0) : g;
  r.time_frac = time_frac;
  run.traj.records.push_back(std::move(r));
}

}  // namespace detail

// Fixed-step gradient descent from the context argmin, iterates clipped to
// the box; one evaluation per step.
inline BaselineRun gd_run(const Objective& o, const std::vector<TrajectoryRecord>& ctx, double lr,
                          i64 T) {
  POP_CHECK(lr >= 0 && T >= 1, "gd: need lr >= 0 and T >= 1");
  BaselineRun run = detail::start_run(ctx, T);
  const TrajectoryRecord& a = detail::context_argmin(ctx);
  std::vector<double> x = a.x, g = a.g, gnew(x.size());
  for (i64 t = 1; t <= T; t++) {
    for (size_t d = 0; d < x.size(); d++) x[d] -= lr * g[d];
    detail::clip_box(o, x.data());
    double y;
    if (!detail::eval_yg(o, x.data(), y, gnew.data())) {
      run.failed = true;
      return run;
    }
    run.evals++;
    g = gnew;
    detail::push_record(run, x, y, g, static_cast<double>(t) / static_cast<double>(T));
  }
  return run;
}

// Adam with bias correction, same accounting and clipping as gd_run.
inline BaselineRun adam_run(const Objective& o, const std::vector<TrajectoryRecord>& ctx,
                            double lr, i64 T, const BaselineConfig& cfg = {}) {
  POP_CHECK(lr >= 0 && T >= 1, "adam: need lr >= 0 and T >= 1");
  BaselineRun run = detail::start_run(ctx, T);
  const TrajectoryRecord& a = detail::context_argmin(ctx);
  std::vector<double> x = a.x, g = a.g, gnew(x.size());
  std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0);
  for (i64 t = 1; t <= T; t++) {
    double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
    for (size_t d = 0; d < x.size(); d++) {
      m[d] = cfg.adam_beta1 * m[d] + (1.0 - cfg.adam_beta1) * g[d];
      v[d] = cfg.adam_beta2 * v[d] + (1.0 - cfg.adam_beta2) * g[d] * g[d];
      x[d] -= lr * (m[d] / bc1) / (std::sqrt(v[d] / bc2) + cfg.adam_eps);
    }
    detail::clip_box(o, x.data());
    double y;
    if (!detail::eval_yg(o, x.data(), y, gnew.data())) {
      run.failed = true;
      return run;
    }
    run.evals++;
    g = gnew;
    detail::push_record(run, x, y, g, static_cast<double>(t) / static_cast<double>(T));
  }
  return run;
}

// L-BFGS with the m-pair two-loop recursion and an Armijo line search; lr is
// the initial trial step. A passing first trial is expanded by doubling while
// the Armijo inequality keeps holding and the value keeps dropping (plain
// backtracking stalls in curved valleys: short steps give s'y < 0 pairs that
// never update the memory). Non-descent directions fall back to steepest
// descent. Accepted iterates are clipped to the box; line-search probes are
// not (a diverging probe fails the run, which is how oversized steps surface
// as undefined results). Budget unit is iterations by default; with
// count_evaluations every objective call at a new point consumes budget.
inline BaselineRun lbfgs_run(const Objective& o, const std::vector<TrajectoryRecord>& ctx,
                             double lr, i64 T, const BaselineConfig& cfg = {}) {
  POP_CHECK(lr > 0 && T >= 1, "lbfgs: need lr > 0 and T >= 1");
  const i64 D = o.D;
  BaselineRun run = detail::start_run(ctx, T);
  const TrajectoryRecord& a = detail::context_argmin(ctx);
  std::vector<double> x = a.x, g = a.g;
  double y = a.y;
  std::vector<std::vector<double>> S, Yv;  // newest pair last
  std::vector<double> rho, alpha_hist;
  std::vector<double> d(static_cast<size_t>(D)), cand(static_cast<size_t>(D));
  std::vector<double> gnew(static_cast<size_t>(D));
  auto dot = [D](const std::vector<double>& u, const std::vector<double>& w) {
    double s = 0;
    for (i64 i = 0; i < D; i++) s += u[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
    return s;
  };

  i64 used = 0;
  while (used < T) {
    // two-loop recursion for -H*g
    d = g;
    const i64 k = static_cast<i64>(S.size());
    alpha_hist.assign(static_cast<size_t>(k), 0.0);
    for (i64 i = k - 1; i >= 0; i--) {
      double ai = rho[static_cast<size_t>(i)] * dot(S[static_cast<size_t>(i)], d);
      alpha_hist[static_cast<size_t>(i)] = ai;
      for (i64 j = 0; j < D; j++)
        d[static_cast<size_t>(j)] -= ai * Yv[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    if (k > 0) {
      double gamma = dot(S.back(), Yv.back()) / dot(Yv.back(), Yv.back());
      for (i64 j = 0; j < D; j++) d[static_cast<size_t>(j)] *= gamma;
    }
    for (i64 i = 0; i < k; i++) {
      double beta = rho[static_cast<size_t>(i)] * dot(Yv[static_cast<size_t>(i)], d);
      double ai = alpha_hist[static_cast<size_t>(i)];
      for (i64 j = 0; j < D; j++)
        d[static_cast<size_t>(j)] += (ai - beta) * S[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    for (i64 j = 0; j < D; j++) d[static_cast<size_t>(j)] = -d[static_cast<size_t>(j)];

    double gd = dot(g, d);
    if (!(gd < 0)) {  // fall back to steepest descent
      for (i64 j = 0; j < D; j++) d[static_cast<size_t>(j)] = -g[static_cast<size_t>(j)];
      gd = -dot(g, g);
    }
    // an exactly stationary point keeps re-evaluating itself until the budget
    // runs out, so every run spends the same number of iterations

    // Armijo search: backtrack on a failing first trial, expand a passing one
    double step = lr, yc = 0;
    i64 probes_left = cfg.max_probes;
    bool out_of_budget = false, run_failed = false;
    auto probe = [&](double st, double& yout) {
      // 0 evaluated, 1 budget exhausted, 2 non-finite
      if (cfg.count_evaluations && used >= T) return 1;
      for (i64 j = 0; j < D; j++)
        cand[static_cast<size_t>(j)] = x[static_cast<size_t>(j)] + st * d[static_cast<size_t>(j)];
      if (!detail::eval_y(o, cand.data(), yout)) return 2;
      run.evals++;
      probes_left--;
      if (cfg.count_evaluations) {
        used++;
        detail::push_record(run, cand, yout, {}, static_cast<double>(used) / static_cast<double>(T));
      }
      return 0;
    };
    auto armijo = [&](double st, double yv) { return yv <= y + cfg.armijo_c1 * st * gd; };

    int rc = probe(step, yc);
    if (rc == 2) {
      run.failed = true;
      return run;
    }
    if (rc == 1) break;
    if (armijo(step, yc)) {
      while (probes_left > 0) {
        double y2;
        int r2 = probe(2 * step, y2);
        if (r2 == 2) {
          run_failed = true;
          break;
        }
        if (r2 == 1) break;  // keep the already-accepted step
        if (armijo(2 * step, y2) && y2 < yc) {
          step *= 2;
          yc = y2;
        } else {
          break;
        }
      }
      if (run_failed) {
        run.failed = true;
        return run;
      }
      // cand may hold a rejected expansion probe; rebuild the accepted point
      for (i64 j = 0; j < D; j++)
        cand[static_cast<size_t>(j)] = x[static_cast<size_t>(j)] + step * d[static_cast<size_t>(j)];
    } else {
      bool accepted = false;
      while (probes_left > 0 && !accepted) {
        step *= cfg.backtrack;
        int r2 = probe(step, yc);
        if (r2 == 2) {
          run_failed = true;
          break;
        }
        if (r2 == 1) {
          out_of_budget = true;
          break;
        }
        accepted = armijo(step, yc);
      }
      if (run_failed) {
        run.failed = true;
        return run;
      }
      // when nothing passes, the smallest backtracked step is taken anyway
    }
    if (out_of_budget) break;

    // accept, clipped to the box; a clipped point needs its own evaluation
    std::vector<double> xa = cand;
    detail::clip_box(o, xa.data());
    double ya;
    bool moved_by_clip = xa != cand;
    if (moved_by_clip && cfg.count_evaluations && used >= T) break;
    if (!detail::eval_yg(o, xa.data(), ya, gnew.data())) {
      run.failed = true;
      return run;
    }
    run.evals++;
    if (!moved_by_clip) ya = yc;  // same point as the last probe
    if (cfg.count_evaluations) {
      if (moved_by_clip) {
        used++;
        detail::push_record(run, xa, ya, gnew, static_cast<double>(used) / static_cast<double>(T));
      }
      // an unclipped accept reuses the last probe's record and charge
    } else {
      used++;
      detail::push_record(run, xa, ya, gnew, static_cast<double>(used) / static_cast<double>(T));
    }

    std::vector<double> s(static_cast<size_t>(D)), yd(static_cast<size_t>(D));
    for (i64 j = 0; j < D; j++) {
      s[static_cast<size_t>(j)] = xa[static_cast<size_t>(j)] - x[static_cast<size_t>(j)];
      yd[static_cast<size_t>(j)] = gnew[static_cast<size_t>(j)] - g[static_cast<size_t>(j)];
    }
    double sy = dot(s, yd);
    if (sy > 1e-10) {
      S.push_back(std::move(s));
      Yv.push_back(std::move(yd));
      rho.push_back(1.0 / sy);
      if (static_cast<i64>(S.size()) > cfg.lbfgs_m) {
        S.erase(S.begin());
        Yv.erase(Yv.begin());
        rho.erase(rho.begin());
      }
    }
    x = xa;
    y = ya;
    g = gnew;
  }
  POP_CHECK(used <= T, "lbfgs: budget overrun");
  return run;
}

// T uniform draws over the box; derivative-free.
inline BaselineRun random_search_run(const Objective& o, Rng& rng, i64 T,
                                     const std::vector<TrajectoryRecord>& ctx = {}) {
  POP_CHECK(T >= 1, "rs: need T >= 1");
  BaselineRun run = detail::start_run(ctx, T);
  std::vector<double> x(static_cast<size_t>(o.D));
  for (i64 t = 1; t <= T; t++) {
    for (i64 d = 0; d < o.D; d++)
      x[static_cast<size_t>(d)] = rng.uniform(o.lo[static_cast<size_t>(d)], o.hi[static_cast<size_t>(d)]);
    double y;
    if (!detail::eval_y(o, x.data(), y)) {
      run.failed = true;
      return run;
    }
    run.evals++;
    detail::push_record(run, x, y, {}, static_cast<double>(t) / static_cast<double>(T));
  }
  POP_CHECK(run.evals == T, "rs: budget mismatch");
  return run;
}

// Generational GA: tournament selection, per-gene uniform crossover, Gaussian
// mutation at rate 1/D with sd a fraction of the box width, elitism of one
// (the elite carries over without re-evaluation). The budget counts every
// objective call including the initial population.
inline BaselineRun ga_run(const Objective& o, Rng& rng, const BaselineConfig& cfg, i64 T,
                          const std::vector<TrajectoryRecord>& ctx = {}) {
  cfg.validate();
  POP_CHECK(T >= 1, "ga: need T >= 1");
  const i64 D = o.D;
  const i64 P = cfg.pop_size;
  BaselineRun run = detail::start_run(ctx, T);
  std::vector<std::vector<double>> px;
  std::vector<double> py;
  const double pm = 1.0 / static_cast<double>(D);

  auto evaluate = [&](const std::vector<double>& x, double& y) {
    if (!detail::eval_y(o, x.data(), y)) {
      run.failed = true;
      return false;
    }
    run.evals++;
    detail::push_record(run, x, y, {},
                        static_cast<double>(run.evals) / static_cast<double>(T));
    return true;
  };

  for (i64 i = 0; i < P && run.evals < T; i++) {
    std::vector<double> x(static_cast<size_t>(D));
    for (i64 d = 0; d < D; d++)
      x[static_cast<size_t>(d)] = rng.uniform(o.lo[static_cast<size_t>(d)], o.hi[static_cast<size_t>(d)]);
    double y;
    if (!evaluate(x, y)) return run;
    px.push_back(std::move(x));
    py.push_back(y);
  }

  auto tournament = [&]() {
    i64 best = static_cast<i64>(rng.randint(static_cast<i64>(px.size())));
    for (i64 t = 1; t < cfg.tournament; t++) {
      i64 c = static_cast<i64>(rng.randint(static_cast<i64>(px.size())));
      if (py[static_cast<size_t>(c)] < py[static_cast<size_t>(best)]) best = c;
    }
    return best;
  };

  while (run.evals < T && static_cast<i64>(px.size()) == P) {
    size_t elite = 0;
    for (size_t i = 1; i < py.size(); i++)
      if (py[i] < py[elite]) elite = i;
    std::vector<std::vector<double>> nx{px[elite]};
    std::vector<double> ny{py[elite]};
    while (static_cast<i64>(nx.size()) < P && run.evals < T) {
      const std::vector<double>& pa = px[static_cast<size_t>(tournament())];
      const std::vector<double>& pb = px[static_cast<size_t>(tournament())];
      std::vector<double> child(static_cast<size_t>(D));
      for (i64 d = 0; d < D; d++)
        child[static_cast<size_t>(d)] =
            rng.uniform(0, 1) < 0.5 ? pa[static_cast<size_t>(d)] : pb[static_cast<size_t>(d)];
      for (i64 d = 0; d < D; d++)
        if (rng.uniform(0, 1) < pm) {
          double width = o.hi[static_cast<size_t>(d)] - o.lo[static_cast<size_t>(d)];
          child[static_cast<size_t>(d)] += cfg.mutation_sd_frac * width * rng.normal();
        }
      detail::clip_box(o, child.data());
      double y;
      if (!evaluate(child, y)) return run;
      nx.push_back(std::move(child));
      ny.push_back(y);
    }
    if (static_cast<i64>(nx.size()) < P) break;  // budget ran out mid-generation
    px = std::move(nx);
    py = std::move(ny);
  }
  POP_CHECK(run.evals <= T, "ga: budget overrun");
  return run;
}

// DE rand/1/bin with greedy selection. jrand forcing applies only when
// CR > 0 so the fully degenerate setting (F=0, CR=0) leaves the population
// bitwise stationary; draw order is fixed regardless of parameters.
inline BaselineRun de_run(const Objective& o, Rng& rng, const BaselineConfig& cfg, i64 T,
                          const std::vector<TrajectoryRecord>& ctx = {}) {
  cfg.validate();
  POP_CHECK(T >= 1, "de: need T >= 1");
  const i64 D = o.D;
  const i64 P = cfg.pop_size;
  BaselineRun run = detail::start_run(ctx, T);
  std::vector<std::vector<double>> px;
  std::vector<double> py;

  auto evaluate = [&](const std::vector<double>& x, double& y) {
    if (!detail::eval_y(o, x.data(), y)) {
      run.failed = true;
      return false;
    }
    run.evals++;
    detail::push_record(run, x, y, {},
                        static_cast<double>(run.evals) / static_cast<double>(T));
    return true;
  };

  for (i64 i = 0; i < P && run.evals < T; i++) {
    std::vector<double> x(static_cast<size_t>(D));
    for (i64 d = 0; d < D; d++)
      x[static_cast<size_t>(d)] = rng.uniform(o.lo[static_cast<size_t>(d)], o.hi[static_cast<size_t>(d)]);
    double y;
    if (!evaluate(x, y)) return run;
    px.push_back(std::move(x));
    py.push_back(y);
  }

  while (run.evals < T && static_cast<i64>(px.size()) == P) {
    for (i64 i = 0; i < P && run.evals < T; i++) {
      i64 r1, r2, r3;
      do r1 = static_cast<i64>(rng.randint(P));
      while (r1 == i);
      do r2 = static_cast<i64>(rng.randint(P));
      while (r2 == i || r2 == r1);
      do r3 = static_cast<i64>(rng.randint(P));
      while (r3 == i || r3 == r1 || r3 == r2);
      const i64 jrand = static_cast<i64>(rng.randint(D));
      std::vector<double> trial(static_cast<size_t>(D));
      for (i64 d = 0; d < D; d++) {
        double mutant = px[static_cast<size_t>(r1)][static_cast<size_t>(d)] +
                        cfg.de_F * (px[static_cast<size_t>(r2)][static_cast<size_t>(d)] -
                                    px[static_cast<size_t>(r3)][static_cast<size_t>(d)]);
        bool cross = rng.uniform(0, 1) < cfg.de_CR || (cfg.de_CR > 0 && d == jrand);
        trial[static_cast<size_t>(d)] = cross ? mutant : px[static_cast<size_t>(i)][static_cast<size_t>(d)];
      }
      detail::clip_box(o, trial.data());
      double y;
      if (!evaluate(trial, y)) return run;
      if (y <= py[static_cast<size_t>(i)]) {
        px[static_cast<size_t>(i)] = std::move(trial);
        py[static_cast<size_t>(i)] = y;
      }
    }
  }
  POP_CHECK(run.evals <= T, "de: budget overrun");
  return run;
}

inline BaselineRun baseline_run(const std::string& method, const Objective& o,
                                const std::vector<TrajectoryRecord>& ctx, double lr, i64 T,
                                const BaselineConfig& cfg, Rng& rng) {
  if (method == "gd") return gd_run(o, ctx, lr, T);
  if (method == "adam") return adam_run(o, ctx, lr, T, cfg);
  if (method == "lbfgs") return lbfgs_run(o, ctx, lr, T, cfg);
  if (method == "rs") return random_search_run(o, rng, T, ctx);
  if (method == "ga") return ga_run(o, rng, cfg, T, ctx);
  if (method == "de") return de_run(o, rng, cfg, T, ctx);
  fail("unknown baseline method: " + method);
}

}  // namespace pop
