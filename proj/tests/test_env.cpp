#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pop/env.hpp"

using namespace pop;

namespace {
SampledFunction default_function(u64 seed) {
  PriorConfig cfg;
  cfg.finalize();
  Rng rng(seed);
  return sample_function(cfg, rng);
}
}  // namespace

TEST_CASE("reward formulas match the stated examples") {
  RewardSpec cur{RewardKind::Current, 0};
  RewardSpec gi{RewardKind::GlobalImp, 0};
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  RewardSpec sm{RewardKind::Smape, 0};
  RewardSpec mix{RewardKind::Mix, 0.2};

  REQUIRE(compute_reward(cur, -1.25, 0, 0) == -1.25);
  REQUIRE(compute_reward(gi, 0.5, 0, 1.0) == 0.5);
  REQUIRE(compute_reward(gi, 1.5, 0, 1.0) == -0.5);
  REQUIRE(compute_reward(gic, 1.5, 0, 1.0) == 0.0);
  REQUIRE(compute_reward(gic, 0.25, 0, 0.75) == 0.5);
  // smape: ybest 1, yt 0.5 -> 2*0.5/1.5
  REQUIRE(compute_reward(sm, 0.5, 0, 1.0) == Catch::Approx(2.0 / 3.0));
  REQUIRE(compute_reward(sm, 0.0, 0, 0.0) == 0.0);       // zero denominator rule
  REQUIRE(compute_reward(sm, 2.0, 0, 1.0) == 0.0);       // worse value clips to 0
  // mix: yprev 2, yt 1, ybest 0, alpha .2 -> .2*0 + .8*1
  REQUIRE(compute_reward(mix, 1.0, 2.0, 0.0) == Catch::Approx(0.8));
}

TEST_CASE("reward spec parses and names round-trip") {
  REQUIRE(RewardSpec::parse("current").kind == RewardKind::Current);
  REQUIRE(RewardSpec::parse("global_imp").kind == RewardKind::GlobalImp);
  REQUIRE(RewardSpec::parse("global_imp_clipped").kind == RewardKind::GlobalImpClipped);
  REQUIRE(RewardSpec::parse("smape").kind == RewardKind::Smape);
  auto m = RewardSpec::parse("mix:0.3");
  REQUIRE(m.kind == RewardKind::Mix);
  REQUIRE(m.mix_alpha == 0.3);
  REQUIRE_THROWS(RewardSpec::parse("bogus"));
  REQUIRE(RewardSpec::parse(m.name()).mix_alpha == 0.3);
}

TEST_CASE("init_context seeds trajectory, stats, and the argmin start") {
  auto f = default_function(1);
  Rng rng(2);
  Episode ep = init_context(f, 10, 40, rng);
  REQUIRE(ep.traj.length() == 10);
  double best = 1e300;
  for (const auto& r : ep.traj.records) {
    REQUIRE(r.time_frac == 0.0);
    REQUIRE(r.x[0] >= -50.0);
    REQUIRE(r.x[0] < 50.0);
    REQUIRE(r.y == f.evaluate(r.x));
    best = std::min(best, r.y);
  }
  REQUIRE(ep.ycur == best);
  REQUIRE(ep.ybest == best);
  REQUIRE(ep.ycur == f.evaluate(ep.xcur));
  REQUIRE(ep.state.y_stats.n == 10);
  REQUIRE(ep.state.x_stats[0].n == 10);
}

TEST_CASE("zero step sizes keep the iterate and earn zero clipped reward") {
  auto f = default_function(3);
  Rng rng(4);
  Episode ep = init_context(f, 10, 5, rng);
  auto x0 = ep.xcur;
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  double eta[2] = {0.0, 0.0};
  double total = 0;
  for (int t = 0; t < 5; t++) total += step(ep, eta, gic).reward;
  REQUIRE(total == 0.0);
  REQUIRE(std::abs(ep.xcur[0] - x0[0]) < 1e-9);  // inverse(forward(x)) round trip
  REQUIRE(std::abs(ep.xcur[1] - x0[1]) < 1e-9);
  REQUIRE(ep.steps_done == 5);
  REQUIRE(ep.done());
}

TEST_CASE("step moves in transformed space along the scaled gradient") {
  auto f = default_function(5);
  Rng rng(6);
  Episode ep = init_context(f, 10, 40, rng);
  // predict the next iterate by hand, then compare
  double eta[2] = {0.05, 0.2};
  std::vector<double> want(2);
  for (i64 d = 0; d < 2; d++) {
    double xt = ep.state.transform_x(ep.xcur[static_cast<size_t>(d)], d);
    double gt = ep.state.gradient_scale(d) * ep.gcur[static_cast<size_t>(d)];
    want[static_cast<size_t>(d)] = ep.state.inverse_transform_x(xt - eta[d] * gt, d);
  }
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  step(ep, eta, gic);
  REQUIRE(ep.xcur[0] == Catch::Approx(want[0]).margin(1e-12));
  REQUIRE(ep.xcur[1] == Catch::Approx(want[1]).margin(1e-12));
  REQUIRE(ep.traj.records.back().y == f.evaluate(ep.xcur));
  REQUIRE(ep.traj.records.back().time_frac == Catch::Approx(1.0 / 40.0));
}

TEST_CASE("episodes are bit-reproducible for a fixed seed and policy") {
  auto f = default_function(7);
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  auto act = [](const Episode& e, i64 t, double* eta) {
    eta[0] = 0.1 + 0.01 * static_cast<double>(t % 3);
    eta[1] = 0.05 + 1e-4 * e.ycur;  // state-dependent but deterministic
    eta[1] = std::abs(eta[1]);
  };
  std::vector<double> r1, r2;
  Rng a(42), b(42);
  Episode e1 = run_episode(f, act, 40, 10, a, gic, &r1);
  Episode e2 = run_episode(f, act, 40, 10, b, gic, &r2);
  REQUIRE(r1 == r2);
  REQUIRE(e1.xcur == e2.xcur);
  REQUIRE(e1.ybest == e2.ybest);
  REQUIRE(e1.traj.length() == 50);
}

TEST_CASE("best-so-far never increases and clipped reward flags new minima") {
  auto f = default_function(8);
  Rng rng(9), act_rng(10);
  Episode ep = init_context(f, 10, 40, rng);
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  double prev_best = ep.ybest;
  for (int t = 0; t < 40; t++) {
    double eta[2] = {act_rng.uniform(0, 2.0), act_rng.uniform(0, 2.0)};
    double ybest_before = ep.ybest;
    StepResult r = step(ep, eta, gic);
    REQUIRE(ep.ybest <= prev_best);
    prev_best = ep.ybest;
    REQUIRE(r.reward >= 0.0);
    bool new_min = r.y_raw < ybest_before;
    REQUIRE((r.reward > 0.0) == new_min);
  }
}

TEST_CASE("telescoping: frozen-stats clipped rewards sum to best-value drop") {
  auto f = default_function(11);
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  Rng act_rng(12);
  auto act = [&](const Episode&, i64, double* eta) {
    eta[0] = act_rng.uniform(0, 3.0);
    eta[1] = act_rng.uniform(0, 3.0);
  };
  std::vector<double> rewards;
  Rng rng(13);
  Episode ep = run_episode(f, act, 40, 10, rng, gic, &rewards, /*freeze_stats=*/true);
  double total = 0;
  for (double r : rewards) total += r;
  // under frozen statistics the transform is fixed and monotone, so the sum
  // telescopes to (transformed context best) - (transformed final best)
  double ybest0 = 1e300;
  for (i64 i = 0; i < ep.traj.c; i++) ybest0 = std::min(ybest0, ep.traj.records[static_cast<size_t>(i)].y);
  double want = ep.state.transform_y(ybest0) - ep.state.transform_y(ep.ybest);
  REQUIRE(total == Catch::Approx(want).margin(1e-9));
  REQUIRE(total > 0.0);  // random steps on this function do find improvements
}

TEST_CASE("retransform recomputes views and is idempotent under fixed stats") {
  auto f = default_function(14);
  Rng rng(15), act_rng(16);
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  auto act = [&](const Episode&, i64, double* eta) {
    eta[0] = act_rng.uniform(0, 1.0);
    eta[1] = act_rng.uniform(0, 1.0);
  };
  Episode ep = run_episode(f, act, 10, 10, rng, gic);
  auto tr1 = retransform(ep.traj, ep.state);
  auto tr2 = retransform(ep.traj, ep.state);
  REQUIRE(tr1.size() == 20);
  for (size_t i = 0; i < tr1.size(); i++) {
    REQUIRE(tr1[i].xt == tr2[i].xt);
    REQUIRE(tr1[i].yt == tr2[i].yt);
    REQUIRE(tr1[i].gt == tr2[i].gt);
    // from-scratch forward transform agrees
    const auto& r = ep.traj.records[i];
    for (i64 d = 0; d < 2; d++) {
      REQUIRE(tr1[i].xt[static_cast<size_t>(d)] == ep.state.transform_x(r.x[static_cast<size_t>(d)], d));
      REQUIRE(tr1[i].gt[static_cast<size_t>(d)] ==
              ep.state.gradient_scale(d) * r.g[static_cast<size_t>(d)]);
    }
    REQUIRE(tr1[i].yt == ep.state.transform_y(r.y));
  }
}

TEST_CASE("widening an extremum pulls old endpoint images inside (-Vy, Vy)") {
  TransformState s({0}, {1});
  double x = 0.5;
  s.observe(&x, 1.0);
  s.observe(&x, 3.0);
  REQUIRE(s.boundary_scale_y(1.0) == -3.0);
  REQUIRE(s.boundary_scale_y(3.0) == 3.0);
  s.observe(&x, 0.0);   // widen below
  s.observe(&x, 10.0);  // widen above
  REQUIRE(s.boundary_scale_y(1.0) > -3.0);
  REQUIRE(s.boundary_scale_y(3.0) < 3.0);
  REQUIRE(std::abs(s.boundary_scale_y(1.0)) < 3.0);
  REQUIRE(std::abs(s.boundary_scale_y(3.0)) < 3.0);
}

TEST_CASE("coordinate views share scalar channels and match the trajectory") {
  auto f = default_function(17);
  Rng rng(18), act_rng(19);
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  auto act = [&](const Episode&, i64, double* eta) {
    eta[0] = act_rng.uniform(0, 1.0);
    eta[1] = act_rng.uniform(0, 1.0);
  };
  Episode ep = run_episode(f, act, 7, 10, rng, gic);
  const i64 L = ep.traj.length();
  Mat v0(L, 4), v1(L, 4);
  coordinate_view(ep, 0, v0, 0);
  coordinate_view(ep, 1, v1, 0);
  auto tr = retransform(ep.traj, ep.state);
  for (i64 i = 0; i < L; i++) {
    REQUIRE(v0.at(i, 1) == v1.at(i, 1));  // shared y channel
    REQUIRE(v0.at(i, 3) == v1.at(i, 3));  // shared time channel
    REQUIRE(v0.at(i, 0) == tr[static_cast<size_t>(i)].xt[0]);
    REQUIRE(v1.at(i, 0) == tr[static_cast<size_t>(i)].xt[1]);
    REQUIRE(v0.at(i, 2) == tr[static_cast<size_t>(i)].gt[0]);
    REQUIRE(v0.at(i, 1) == tr[static_cast<size_t>(i)].yt);
    REQUIRE(v0.at(i, 3) == ep.traj.records[static_cast<size_t>(i)].time_frac);
  }
}

TEST_CASE("non-finite evaluation marks the episode failed with zero reward") {
  auto f = default_function(20);
  Rng rng(21);
  Episode ep = init_context(f, 10, 40, rng);
  ep.gcur[0] = 1e160;  // force an absurd transformed jump
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  double eta[2] = {1.0, 1.0};
  StepResult r = step(ep, eta, gic);
  REQUIRE(r.failed);
  REQUIRE(r.reward == 0.0);
  REQUIRE(ep.failed);
  REQUIRE(ep.done());
  REQUIRE_THROWS(step(ep, eta, gic));
}

TEST_CASE("step rejects negative or non-finite step sizes") {
  auto f = default_function(22);
  Rng rng(23);
  Episode ep = init_context(f, 10, 40, rng);
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  double bad1[2] = {-0.1, 0.1};
  REQUIRE_THROWS(step(ep, bad1, gic));
  double bad2[2] = {std::nan(""), 0.1};
  REQUIRE_THROWS(step(ep, bad2, gic));
}

TEST_CASE("trajectory jsonl dump parses and mirrors raw records") {
  auto f = default_function(24);
  Rng rng(25), act_rng(26);
  RewardSpec gic{RewardKind::GlobalImpClipped, 0};
  auto act = [&](const Episode&, i64, double* eta) {
    eta[0] = act_rng.uniform(0, 1.0);
    eta[1] = act_rng.uniform(0, 1.0);
  };
  Episode ep = run_episode(f, act, 3, 4, rng, gic);
  auto lines = split(trajectory_jsonl(ep), '\n');
  REQUIRE(lines.back().empty());
  lines.pop_back();
  REQUIRE(lines.size() == 7);
  for (size_t i = 0; i < lines.size(); i++) {
    auto j = nlohmann::json::parse(lines[i]);
    REQUIRE(j.at("i") == i);
    REQUIRE(j.at("y").get<double>() == ep.traj.records[i].y);
    REQUIRE(j.at("x").get<std::vector<double>>() == ep.traj.records[i].x);
    REQUIRE(j.contains("yt"));
    REQUIRE(j.contains("gt"));
  }
}
