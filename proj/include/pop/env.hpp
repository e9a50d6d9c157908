#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "pop/common.hpp"
#include "pop/objective.hpp"
#include "pop/prior.hpp"
#include "pop/rng.hpp"
#include "pop/transforms.hpp"

namespace pop {

enum class RewardKind { Current, GlobalImp, GlobalImpClipped, Smape, Mix };

struct RewardSpec {
  RewardKind kind = RewardKind::GlobalImpClipped;
  double mix_alpha = 0.5;

  static RewardSpec parse(const std::string& s) {
    RewardSpec r;
    if (s == "current") r.kind = RewardKind::Current;
    else if (s == "global_imp") r.kind = RewardKind::GlobalImp;
    else if (s == "global_imp_clipped") r.kind = RewardKind::GlobalImpClipped;
    else if (s == "smape") r.kind = RewardKind::Smape;
    else if (s.rfind("mix", 0) == 0) {
      r.kind = RewardKind::Mix;
      if (s.size() > 4 && s[3] == ':') r.mix_alpha = parse_f64(s.substr(4));
      POP_CHECK(r.mix_alpha >= 0 && r.mix_alpha <= 1, "mix alpha outside [0,1]");
    } else
      fail("unknown reward kind: " + s + " (want current|global_imp|global_imp_clipped|smape|mix[:a])");
    return r;
  }

  std::string name() const {
    switch (kind) {
      case RewardKind::Current: return "current";
      case RewardKind::GlobalImp: return "global_imp";
      case RewardKind::GlobalImpClipped: return "global_imp_clipped";
      case RewardKind::Smape: return "smape";
      case RewardKind::Mix: return "mix:" + fmt17(mix_alpha);
    }
    return "?";
  }
};

// All five reward formulations on transformed values. yt is the new value,
// yprev the value at the iterate the step left from, ybest the running best
// before this step.
inline double compute_reward(const RewardSpec& spec, double yt, double yprev, double ybest) {
  switch (spec.kind) {
    case RewardKind::Current:
      return yt;
    case RewardKind::GlobalImp:
      return ybest - yt;
    case RewardKind::GlobalImpClipped:
      return std::max(0.0, ybest - yt);
    case RewardKind::Smape: {
      double denom = std::abs(ybest) + std::abs(yt);
      if (denom == 0.0) return 0.0;
      return std::max(0.0, 2.0 * std::max(0.0, ybest - yt) / denom);
    }
    case RewardKind::Mix:
      return spec.mix_alpha * std::max(0.0, ybest - yt) +
             (1.0 - spec.mix_alpha) * (yprev - yt);
  }
  return 0.0;
}

struct TrajectoryRecord {
  std::vector<double> x;
  double y = 0;
  std::vector<double> g;
  double time_frac = 0;  // 0 for context, t/T after step t
};

struct Trajectory {
  i64 c = 0, T = 0;
  std::vector<TrajectoryRecord> records;

  i64 length() const { return static_cast<i64>(records.size()); }
};

struct TransformedRecord {
  std::vector<double> xt;
  double yt = 0;
  std::vector<double> gt;
  double time_frac = 0;
};

// Recompute every record's transformed view under the current statistics.
// Raw records are the source of truth; this is the "re-transform" of the
// whole history after each observation.
inline std::vector<TransformedRecord> retransform(const Trajectory& traj,
                                                  const TransformState& st) {
  std::vector<TransformedRecord> out(traj.records.size());
  const i64 D = st.dim();
  for (size_t i = 0; i < traj.records.size(); i++) {
    const auto& r = traj.records[i];
    auto& o = out[i];
    o.xt.resize(static_cast<size_t>(D));
    o.gt.resize(static_cast<size_t>(D));
    for (i64 d = 0; d < D; d++) o.xt[static_cast<size_t>(d)] = st.transform_x(r.x[static_cast<size_t>(d)], d);
    o.yt = st.transform_y(r.y);
    st.scale_gradient(r.g.data(), o.gt.data());
    o.time_frac = r.time_frac;
  }
  return out;
}

struct Episode {
  Objective f;
  Trajectory traj;
  TransformState state;
  std::vector<double> xcur, gcur;  // raw current iterate and its gradient
  double ycur = 0;                 // f(xcur)
  double ybest = 0;                // raw running best
  i64 steps_done = 0;
  bool failed = false;

  i64 dim() const { return f.D; }
  bool done() const { return failed || steps_done >= traj.T; }
};

// Uniform draws over the box, evaluated with gradients, recorded at time 0.
// The shared draw order (point-major, dimension-minor) is what lets every
// method receive bitwise-identical context sets from one seed.
inline std::vector<TrajectoryRecord> sample_context_records(const Objective& f, i64 c, Rng& rng) {
  std::vector<TrajectoryRecord> recs;
  recs.reserve(static_cast<size_t>(c));
  const i64 D = f.D;
  for (i64 i = 0; i < c; i++) {
    TrajectoryRecord r;
    r.x.resize(static_cast<size_t>(D));
    r.g.resize(static_cast<size_t>(D));
    for (i64 d = 0; d < D; d++)
      r.x[static_cast<size_t>(d)] =
          rng.uniform(f.lo[static_cast<size_t>(d)], f.hi[static_cast<size_t>(d)]);
    r.y = f.eval_grad(r.x.data(), r.g.data());
    r.time_frac = 0.0;
    recs.push_back(std::move(r));
  }
  return recs;
}

// Record c context points, fold them into the transform statistics, and start
// at the argmin.
inline Episode init_context(const Objective& f, i64 c, i64 T, Rng& rng) {
  POP_CHECK(c >= 1 && T >= 1, "need c >= 1 and T >= 1");
  Episode ep;
  ep.f = f;
  ep.traj.c = c;
  ep.traj.T = T;
  ep.state = TransformState(f.lo, f.hi);
  ep.traj.records = sample_context_records(f, c, rng);
  i64 best = 0;
  for (i64 i = 0; i < c; i++) {
    const auto& r = ep.traj.records[static_cast<size_t>(i)];
    ep.state.observe(r.x.data(), r.y);
    if (r.y < ep.traj.records[static_cast<size_t>(best)].y) best = i;
  }
  const auto& b = ep.traj.records[static_cast<size_t>(best)];
  ep.xcur = b.x;
  ep.gcur = b.g;
  ep.ycur = b.y;
  ep.ybest = b.y;
  return ep;
}

inline Episode init_context(const SampledFunction& f, i64 c, i64 T, Rng& rng) {
  return init_context(objective_of(f), c, T, rng);
}

struct StepResult {
  double reward = 0;
  double y_raw = 0;
  bool failed = false;
};

// One POP update: move in transformed space with per-coordinate step sizes,
// map back, evaluate, reward under the pre-observation statistics snapshot,
// then fold the new observation into the statistics.
//
// freeze_stats skips the statistics update (used by telescoping-reward
// oracles where the transform must stay fixed over the whole episode).
inline StepResult step(Episode& ep, const double* eta, const RewardSpec& reward,
                       bool freeze_stats = false) {
  POP_CHECK(!ep.failed, "step on a failed episode");
  POP_CHECK(ep.steps_done < ep.traj.T, "episode budget exhausted");
  const i64 D = ep.dim();
  for (i64 d = 0; d < D; d++)
    POP_CHECK(std::isfinite(eta[d]) && eta[d] >= 0.0, "step sizes must be finite and >= 0");

  // y-values the action was chosen under (pre-observation snapshot)
  const double ybest_t = ep.state.transform_y(ep.ybest);
  const double yprev_t = ep.state.transform_y(ep.ycur);

  std::vector<double> xnew(static_cast<size_t>(D));
  bool bad = false;
  for (i64 d = 0; d < D; d++) {
    double xt = ep.state.transform_x(ep.xcur[static_cast<size_t>(d)], d);
    double gt = ep.state.gradient_scale(d) * ep.gcur[static_cast<size_t>(d)];
    double xt_new = xt - eta[d] * gt;
    double x = ep.state.inverse_transform_x(xt_new, d);
    if (!std::isfinite(x)) bad = true;
    xnew[static_cast<size_t>(d)] = x;
  }

  StepResult res;
  std::vector<double> gnew(static_cast<size_t>(D));
  double ynew = 0;
  if (!bad) {
    try {
      ynew = ep.f.eval_grad(xnew.data(), gnew.data());
    } catch (const std::exception&) {
      bad = true;
    }
    if (!bad)
      for (i64 d = 0; d < D; d++)
        if (!std::isfinite(gnew[static_cast<size_t>(d)])) bad = true;
  }
  if (bad) {
    ep.failed = true;
    res.failed = true;
    res.reward = 0.0;
    return res;
  }

  res.y_raw = ynew;
  res.reward = compute_reward(reward, ep.state.transform_y(ynew), yprev_t, ybest_t);

  if (!freeze_stats) ep.state.observe(xnew.data(), ynew);
  ep.steps_done++;
  TrajectoryRecord r;
  r.x = xnew;
  r.y = ynew;
  r.g = gnew;
  r.time_frac = static_cast<double>(ep.steps_done) / static_cast<double>(ep.traj.T);
  ep.traj.records.push_back(std::move(r));
  ep.ybest = std::min(ep.ybest, ynew);
  ep.xcur = std::move(xnew);
  ep.gcur = std::move(gnew);
  ep.ycur = ynew;
  return res;
}

// Token sequence for one coordinate stream: (x_d, y, g_d, time) per record,
// all in transformed units under the episode's current statistics. Appends
// rows [pos, pos+len) into a preallocated [*, 4] matrix.
inline void coordinate_view(const Episode& ep, i64 d, Mat& tokens, i64 pos) {
  const i64 L = ep.traj.length();
  POP_CHECK(pos + L <= tokens.r && tokens.c == 4, "token buffer too small");
  const double gs = ep.state.gradient_scale(d);
  for (i64 i = 0; i < L; i++) {
    const auto& r = ep.traj.records[static_cast<size_t>(i)];
    double* row = tokens.row(pos + i);
    row[0] = ep.state.transform_x(r.x[static_cast<size_t>(d)], d);
    row[1] = ep.state.transform_y(r.y);
    row[2] = gs * r.g[static_cast<size_t>(d)];
    row[3] = r.time_frac;
  }
}

// Single-episode driver. `act` fills eta (length D) given the episode and the
// upcoming step index (0-based); used by eval paths and tests. Training uses
// its own batched lockstep rollout.
template <class ActFn>
inline Episode run_episode(const SampledFunction& f, ActFn&& act, i64 T, i64 c, Rng& rng,
                           const RewardSpec& reward, std::vector<double>* rewards_out = nullptr,
                           bool freeze_stats = false) {
  Episode ep = init_context(f, c, T, rng);
  std::vector<double> eta(static_cast<size_t>(f.dim()));
  for (i64 t = 0; t < T && !ep.done(); t++) {
    act(ep, t, eta.data());
    StepResult r = step(ep, eta.data(), reward, freeze_stats);
    if (rewards_out) rewards_out->push_back(r.reward);
  }
  return ep;
}

// Debug/plot export: one JSON object per record, raw plus transformed fields.
inline std::string trajectory_jsonl(const Episode& ep) {
  auto tr = retransform(ep.traj, ep.state);
  std::string out;
  for (size_t i = 0; i < tr.size(); i++) {
    const auto& r = ep.traj.records[i];
    nlohmann::json j;
    j["i"] = i;
    j["x"] = r.x;
    j["y"] = r.y;
    j["g"] = r.g;
    j["time_frac"] = r.time_frac;
    j["xt"] = tr[i].xt;
    j["yt"] = tr[i].yt;
    j["gt"] = tr[i].gt;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace pop
