#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "pop/baselines.hpp"
#include "pop/benchmarks.hpp"
#include "pop/csv.hpp"
#include "pop/metrics.hpp"
#include "pop/ppo.hpp"

namespace pop {

// A policy reconstructed from a checkpoint; PolicyNet is pinned in place
// because its parameter registry holds raw pointers.
struct LoadedPolicy {
  PolicyConfig cfg;
  std::unique_ptr<PolicyNet> net;
  nlohmann::json meta;
};

inline LoadedPolicy load_policy(const std::string& path) {
  std::string blob = slurp(path);
  POP_CHECK(blob.size() > 16 && blob.compare(0, 8, "POPCKPT1") == 0,
            "bad checkpoint magic: " + path);
  u64 len;
  std::memcpy(&len, blob.data() + 8, 8);
  POP_CHECK(blob.size() >= 16 + len, "truncated checkpoint header: " + path);
  auto header = nlohmann::json::parse(blob.substr(16, len));
  LoadedPolicy lp;
  lp.cfg = policy_cfg_from_json(header.at("meta").at("policy"));
  lp.net = std::make_unique<PolicyNet>(lp.cfg, /*seed=*/0);
  lp.meta = load_checkpoint(path, lp.net->params(), nullptr);
  return lp;
}

// One optimization task: an objective view plus the seed that generates its
// context (and, where known, the value range for regret).
struct EvalTask {
  std::string name;
  Objective o;
  u64 seed = 0;
  double ymin = std::numeric_limits<double>::quiet_NaN();
  double ymax = std::numeric_limits<double>::quiet_NaN();

  bool regret_defined() const { return std::isfinite(ymin) && std::isfinite(ymax) && ymax > ymin; }
};

// Keeps the sampled prior functions alive behind the task views.
struct PriorTaskSet {
  std::vector<SampledFunction> fns;
  std::vector<EvalTask> tasks;
};

inline PriorTaskSet make_prior_tasks(const PriorConfig& pc, i64 n, u64 seed) {
  POP_CHECK(n >= 1, "need at least one task");
  PriorTaskSet ts;
  Rng fr(derive_seed(seed, "eval_functions"));
  ts.fns.reserve(static_cast<size_t>(n));
  for (i64 i = 0; i < n; i++) ts.fns.push_back(sample_function(pc, fr));
  ts.tasks.reserve(static_cast<size_t>(n));
  for (i64 i = 0; i < n; i++) {
    EvalTask t;
    char buf[32];
    std::snprintf(buf, sizeof buf, "task_%04lld", static_cast<long long>(i));
    t.name = buf;
    t.o = objective_of(ts.fns[static_cast<size_t>(i)]);
    t.seed = derive_seed(seed, "task", static_cast<u64>(i));
    ts.tasks.push_back(std::move(t));
  }
  return ts;
}

// reps independent context draws per catalog function; the catalog itself is
// static so the views stay valid.
inline std::vector<EvalTask> make_bench_tasks(i64 reps, u64 seed) {
  POP_CHECK(reps >= 1, "need at least one repetition");
  std::vector<EvalTask> tasks;
  const auto& cat = benchmark_catalog();
  for (size_t fi = 0; fi < cat.size(); fi++) {
    const BenchmarkFunction& b = cat[fi];
    for (i64 r = 0; r < reps; r++) {
      EvalTask t;
      char buf[32];
      std::snprintf(buf, sizeof buf, "#%02lld", static_cast<long long>(r));
      t.name = b.name + buf;
      t.o = objective_of(b);
      t.seed = derive_seed(seed, "bench_task", static_cast<u64>(fi), static_cast<u64>(r));
      t.ymin = b.ymin;
      t.ymax = b.ymax;
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

struct MethodCurves {
  std::string method;
  std::vector<std::vector<double>> best;  // [task][c + T] best-so-far per evaluation
  std::vector<char> failed;               // non-finite objective hit
};

struct EvalReport {
  i64 c = 0, T = 0;
  std::vector<std::string> task_names;
  std::vector<std::vector<double>> context_y;  // [task][c]
  std::vector<double> ymin, ymax;              // NaN when unknown
  std::vector<MethodCurves> methods;

  i64 steps() const { return c + T; }

  const MethodCurves& method(const std::string& name) const {
    for (const auto& m : methods)
      if (m.method == name) return m;
    fail("method not in report: " + name);
  }

  std::vector<double> ni_series(size_t m, size_t task) const {
    return normalized_improvement(context_y[task], methods[m].best[task]);
  }

  std::vector<double> regret_series(size_t m, size_t task) const {
    return normalized_regret(methods[m].best[task], ymin[task], ymax[task]);
  }
};

struct EvalOptions {
  double lr_gd = 50.0;     // tuned sweep optima on the prior
  double lr_adam = 10.0;
  double lr_lbfgs = 2.0;
  i64 workers = 1;
  i64 pop_batch = 64;      // episodes per rollout call
  i64 rollout_max_rows = 32768;
  BaselineConfig baseline;

  double lr_for(const std::string& method) const {
    if (method == "gd") return lr_gd;
    if (method == "adam") return lr_adam;
    if (method == "lbfgs") return lr_lbfgs;
    return 0.0;
  }

  static EvalOptions from_config(const Config& c) {
    EvalOptions o;
    o.lr_gd = c.f64("eval.lr_gd", o.lr_gd);
    o.lr_adam = c.f64("eval.lr_adam", o.lr_adam);
    o.lr_lbfgs = c.f64("eval.lr_lbfgs", o.lr_lbfgs);
    o.pop_batch = c.i64_("eval.pop_batch", o.pop_batch);
    o.rollout_max_rows = c.i64_("eval.rollout_max_rows", o.rollout_max_rows);
    o.baseline = BaselineConfig::from_config(c);
    POP_CHECK(o.pop_batch >= 1, "eval.pop_batch must be >= 1");
    return o;
  }
};

namespace detail {

// best-so-far over a record list, padded to len with its last value so failed
// runs keep an aligned (and still monotone) series
inline std::vector<double> padded_best(const std::vector<TrajectoryRecord>& recs, i64 len) {
  POP_CHECK(!recs.empty(), "empty trajectory");
  std::vector<double> bsf;
  bsf.reserve(static_cast<size_t>(len));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : recs) {
    best = std::min(best, r.y);
    bsf.push_back(best);
  }
  while (bsf.size() < static_cast<size_t>(len)) bsf.push_back(best);
  return bsf;
}

inline void run_sharded(i64 n, i64 workers, const std::function<void(i64)>& fn) {
  if (workers <= 1) {
    for (i64 i = 0; i < n; i++) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (i64 w = 0; w < workers; w++)
    pool.emplace_back([&, w] {
      for (i64 i = w; i < n; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

// Runs every method on the shared task set: identical per-task contexts
// (sample_context_records under the task seed, which is exactly how the
// policy rollout draws them), a budget of T evaluations beyond the context,
// and per-evaluation best-so-far curves over the full c + T axis.
inline EvalReport run_eval(PolicyNet* policy, const std::vector<EvalTask>& tasks, i64 c, i64 T,
                           const std::vector<std::string>& methods, const EvalOptions& opt) {
  POP_CHECK(!tasks.empty() && c >= 1 && T >= 1, "run_eval: empty tasks or bad budget");
  const size_t n = tasks.size();

  EvalReport rep;
  rep.c = c;
  rep.T = T;
  rep.task_names.resize(n);
  rep.context_y.resize(n);
  rep.ymin.resize(n);
  rep.ymax.resize(n);

  // shared contexts, one per task, reused by every baseline
  std::vector<std::vector<TrajectoryRecord>> ctx(n);
  for (size_t i = 0; i < n; i++) {
    rep.task_names[i] = tasks[i].name;
    rep.ymin[i] = tasks[i].ymin;
    rep.ymax[i] = tasks[i].ymax;
    Rng rb(tasks[i].seed);
    ctx[i] = sample_context_records(tasks[i].o, c, rb);
    rep.context_y[i].resize(static_cast<size_t>(c));
    for (i64 j = 0; j < c; j++) rep.context_y[i][static_cast<size_t>(j)] = ctx[i][static_cast<size_t>(j)].y;
  }

  for (const std::string& method : methods) {
    MethodCurves mc;
    mc.method = method;
    mc.best.resize(n);
    mc.failed.assign(n, 0);

    if (method == "pop") {
      POP_CHECK(policy != nullptr, "pop evaluation needs a checkpoint");
      // batch rollouts over tasks of equal dimension; per-task seeds make the
      // result independent of the grouping
      std::map<i64, std::vector<size_t>> by_dim;
      for (size_t i = 0; i < n; i++) by_dim[tasks[i].o.D].push_back(i);
      for (const auto& [D, idx] : by_dim) {
        for (size_t a0 = 0; a0 < idx.size(); a0 += static_cast<size_t>(opt.pop_batch)) {
          size_t a1 = std::min(idx.size(), a0 + static_cast<size_t>(opt.pop_batch));
          std::vector<Objective> fs;
          std::vector<u64> seeds;
          for (size_t k = a0; k < a1; k++) {
            fs.push_back(tasks[idx[k]].o);
            seeds.push_back(tasks[idx[k]].seed);
          }
          RolloutResult rr = rollout(*policy, fs, T, c, RewardSpec{}, seeds,
                                     opt.rollout_max_rows, /*deterministic=*/true,
                                     /*store_transitions=*/false);
          for (size_t k = a0; k < a1; k++) {
            const Episode& ep = rr.episodes[k - a0];
            mc.best[idx[k]] = detail::padded_best(ep.traj.records, c + T);
            mc.failed[idx[k]] = rr.batch.failed[k - a0];
          }
        }
      }
    } else {
      detail::run_sharded(static_cast<i64>(n), opt.workers, [&](i64 ii) {
        size_t i = static_cast<size_t>(ii);
        Rng mr(derive_seed(tasks[i].seed, "method", fnv1a64(method)));
        BaselineRun run =
            baseline_run(method, tasks[i].o, ctx[i], opt.lr_for(method), T, opt.baseline, mr);
        mc.best[i] = detail::padded_best(run.traj.records, c + T);
        mc.failed[i] = run.failed ? 1 : 0;
      });
    }
    rep.methods.push_back(std::move(mc));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// report export

inline std::string csv_opt(double x) {
  return std::isfinite(x) ? fmt17(x) : std::string();
}

// mean NI with CI per (method, step) over non-failed tasks
inline void write_ni_curves(const EvalReport& rep, const std::string& path) {
  CsvWriter w(path, {"method", "step", "mean", "ci_low", "ci_high", "n"}, "pop_ni_curves_v1");
  for (size_t m = 0; m < rep.methods.size(); m++) {
    std::vector<std::vector<double>> series;
    for (size_t i = 0; i < rep.task_names.size(); i++)
      if (!rep.methods[m].failed[i]) series.push_back(rep.ni_series(m, i));
    i64 nrow = static_cast<i64>(series.size());
    for (i64 t = 0; t < rep.steps(); t++) {
      std::string mean, lo, hi;
      if (nrow >= 1) {
        std::vector<double> col(series.size());
        for (size_t k = 0; k < series.size(); k++) col[k] = series[k][static_cast<size_t>(t)];
        MeanCi mc = mean_ci(col);
        mean = fmt17(mc.mean);
        if (mc.ci_defined) {
          lo = fmt17(mc.lo);
          hi = fmt17(mc.hi);
        }
      }
      w.row({rep.methods[m].method, std::to_string(t + 1), mean, lo, hi, std::to_string(nrow)});
    }
  }
}

// mean regret with CI per (method, step) over non-failed tasks with a valid range
inline void write_regret_curves(const EvalReport& rep, const std::string& path) {
  CsvWriter w(path, {"method", "step", "mean", "ci_low", "ci_high", "n"},
              "pop_regret_curves_v1");
  for (size_t m = 0; m < rep.methods.size(); m++) {
    std::vector<std::vector<double>> series;
    for (size_t i = 0; i < rep.task_names.size(); i++) {
      bool valid = std::isfinite(rep.ymin[i]) && std::isfinite(rep.ymax[i]) &&
                   rep.ymax[i] > rep.ymin[i];
      if (valid && !rep.methods[m].failed[i]) series.push_back(rep.regret_series(m, i));
    }
    i64 nrow = static_cast<i64>(series.size());
    for (i64 t = 0; t < rep.steps(); t++) {
      std::string mean, lo, hi;
      if (nrow >= 1) {
        std::vector<double> col(series.size());
        for (size_t k = 0; k < series.size(); k++) col[k] = series[k][static_cast<size_t>(t)];
        MeanCi mc = mean_ci(col);
        mean = fmt17(mc.mean);
        if (mc.ci_defined) {
          lo = fmt17(mc.lo);
          hi = fmt17(mc.hi);
        }
      }
      w.row({rep.methods[m].method, std::to_string(t + 1), mean, lo, hi, std::to_string(nrow)});
    }
  }
}

// average rank per (method, step) over the tasks every method completed
inline void write_rank_curves(const EvalReport& rep, const std::string& path) {
  CsvWriter w(path, {"method", "step", "mean_rank", "se", "n"}, "pop_rank_curves_v1");
  std::vector<size_t> ok;
  for (size_t i = 0; i < rep.task_names.size(); i++) {
    bool all_ok = true;
    for (const auto& m : rep.methods) all_ok = all_ok && !m.failed[i];
    if (all_ok) ok.push_back(i);
  }
  if (ok.empty()) return;
  std::vector<std::vector<std::vector<double>>> best(rep.methods.size());
  for (size_t m = 0; m < rep.methods.size(); m++) {
    best[m].reserve(ok.size());
    for (size_t i : ok) best[m].push_back(rep.methods[m].best[i]);
  }
  RankCurves rc = rank_curves(best);
  for (size_t m = 0; m < rep.methods.size(); m++)
    for (i64 t = 0; t < rep.steps(); t++)
      w.row({rep.methods[m].method, std::to_string(t + 1),
             fmt17(rc.mean[m][static_cast<size_t>(t)]), fmt17(rc.se[m][static_cast<size_t>(t)]),
             std::to_string(ok.size())});
}

// one row per (method, task): the final state of the run
inline void write_task_table(const EvalReport& rep, const std::string& path) {
  CsvWriter w(path, {"method", "task", "final_best", "final_ni", "final_regret", "failed"},
              "pop_eval_tasks_v1");
  for (size_t m = 0; m < rep.methods.size(); m++)
    for (size_t i = 0; i < rep.task_names.size(); i++) {
      double fb = rep.methods[m].best[i].back();
      double ni = rep.ni_series(m, i).back();
      std::string regret;
      if (std::isfinite(rep.ymin[i]) && std::isfinite(rep.ymax[i]) && rep.ymax[i] > rep.ymin[i])
        regret = fmt17(rep.regret_series(m, i).back());
      bool failed = rep.methods[m].failed[i];
      w.row({rep.methods[m].method, rep.task_names[i], fmt17(fb),
             failed ? std::string() : fmt17(ni), failed ? std::string() : regret,
             std::to_string(failed ? 1 : 0)});
    }
}

// ---------------------------------------------------------------------------
// learning-rate sweep

struct SweepRow {
  double lr = 0;
  double mean_ni = std::numeric_limits<double>::quiet_NaN();  // NaN: undefined (failures)
  MeanCi ci;
  i64 n_failed = 0;
  i64 n_tasks = 0;
};

// Final NI per grid value on a fixed task set. A failed run leaves the task's
// NI undefined, which poisons the row's mean to NaN: rows are rendered as
// undefined rather than silently averaging over the survivors.
inline std::vector<SweepRow> sweep_lr_run(const std::string& method,
                                          const std::vector<double>& grid,
                                          const std::vector<EvalTask>& tasks, i64 c, i64 T,
                                          const EvalOptions& opt) {
  POP_CHECK(method == "gd" || method == "adam" || method == "lbfgs",
            "sweep-lr supports gd, adam, lbfgs");
  POP_CHECK(!tasks.empty() && !grid.empty(), "sweep-lr: empty tasks or grid");
  const size_t n = tasks.size();

  std::vector<std::vector<TrajectoryRecord>> ctx(n);
  std::vector<std::vector<double>> ctx_y(n);
  for (size_t i = 0; i < n; i++) {
    Rng rb(tasks[i].seed);
    ctx[i] = sample_context_records(tasks[i].o, c, rb);
    for (const auto& r : ctx[i]) ctx_y[i].push_back(r.y);
  }

  std::vector<SweepRow> rows;
  for (double lr : grid) {
    SweepRow row;
    row.lr = lr;
    row.n_tasks = static_cast<i64>(n);
    std::vector<double> finals(n);
    std::vector<char> failed(n, 0);
    detail::run_sharded(static_cast<i64>(n), opt.workers, [&](i64 ii) {
      size_t i = static_cast<size_t>(ii);
      Rng mr(derive_seed(tasks[i].seed, "method", fnv1a64(method)));
      BaselineRun run = baseline_run(method, tasks[i].o, ctx[i], lr, T, opt.baseline, mr);
      if (run.failed) {
        failed[i] = 1;
        finals[i] = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      auto bsf = detail::padded_best(run.traj.records, c + T);
      finals[i] = normalized_improvement(ctx_y[i], {bsf.back()})[0];
    });
    for (char f : failed) row.n_failed += f;
    double s = 0;
    for (double v : finals) s += v;  // NaN propagates by design
    row.mean_ni = s / static_cast<double>(n);
    if (row.n_failed == 0) row.ci = mean_ci(finals);
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep(const std::vector<SweepRow>& rows, const std::string& method,
                        const std::string& path) {
  CsvWriter w(path, {"method", "lr", "mean_ni", "ci_low", "ci_high", "n_failed", "n_tasks"},
              "pop_lr_sweep_v1");
  for (const auto& r : rows)
    w.row({method, fmt17(r.lr), csv_opt(r.mean_ni),
           r.ci.ci_defined ? fmt17(r.ci.lo) : std::string(),
           r.ci.ci_defined ? fmt17(r.ci.hi) : std::string(), std::to_string(r.n_failed),
           std::to_string(r.n_tasks)});
}

}  // namespace pop
