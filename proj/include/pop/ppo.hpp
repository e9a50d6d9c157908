#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "pop/config.hpp"
#include "pop/csv.hpp"
#include "pop/env.hpp"
#include "pop/metrics.hpp"
#include "pop/policy.hpp"
#include "pop/prior.hpp"
#include "pop/rng.hpp"
#include "pop/tensor.hpp"

namespace pop {

struct TrainConfig {
  i64 batch_functions = 64;
  i64 total_iterations = 2000;
  i64 resample_every = 8;
  i64 T = 40;
  i64 c = 10;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double weight_decay = 1e-4;
  i64 warmup_actor = 300;
  i64 warmup_critic = 10;
  double clip_ratio = 0.1;
  double gae_gamma = 1.0;
  double gae_lambda = 1.0;
  i64 update_epochs = 4;
  i64 minibatch_size = 4096;
  double grad_clip_norm = 0.5;
  double kl_stop = 0.01;
  double kl_coef_init = 0.1;
  double kl_target = 0.01;
  bool advantage_norm = true;
  u64 seed = 1;
  std::string reward = "global_imp_clipped";
  i64 val_every = 100;
  i64 val_tasks = 64;
  i64 checkpoint_every = 500;
  i64 moving_avg_window = 100;
  // memory ceilings for packed forwards; these change chunking, never results
  i64 rollout_max_rows = 32768;
  i64 update_max_rows = 8192;

  void validate() const {
    POP_CHECK(batch_functions >= 1 && total_iterations >= 0 && resample_every >= 1,
              "train: batch/iteration counts must be positive");
    POP_CHECK(T >= 1 && c >= 1, "train: T and c must be >= 1");
    POP_CHECK(actor_lr > 0 && critic_lr > 0 && weight_decay >= 0, "train: bad learning rates");
    POP_CHECK(warmup_actor >= 0 && warmup_critic >= 0, "train: warmups must be >= 0");
    POP_CHECK(clip_ratio > 0 && clip_ratio < 1, "train: clip_ratio must be in (0,1)");
    POP_CHECK(gae_gamma >= 0 && gae_gamma <= 1 && gae_lambda >= 0 && gae_lambda <= 1,
              "train: gamma/lambda must be in [0,1]");
    POP_CHECK(update_epochs >= 1 && minibatch_size >= 1, "train: epochs/minibatch must be >= 1");
    POP_CHECK(grad_clip_norm > 0, "train: grad_clip_norm must be positive");
    POP_CHECK(kl_stop > 0 && kl_coef_init > 0 && kl_target > 0, "train: KL knobs must be positive");
    POP_CHECK(val_every >= 1 && val_tasks >= 1 && checkpoint_every >= 1 && moving_avg_window >= 1,
              "train: cadences must be >= 1");
    POP_CHECK(rollout_max_rows >= 256 && update_max_rows >= 256, "train: row budgets too small");
    RewardSpec::parse(reward);  // throws on unknown tag
  }

  static TrainConfig from_config(const Config& c) {
    TrainConfig t;
    t.batch_functions = c.i64_("train.batch_functions", t.batch_functions);
    t.total_iterations = c.i64_("train.total_iterations", t.total_iterations);
    t.resample_every = c.i64_("train.resample_every", t.resample_every);
    t.T = c.i64_("train.T", t.T);
    t.c = c.i64_("train.c", t.c);
    t.actor_lr = c.f64("train.actor_lr", t.actor_lr);
    t.critic_lr = c.f64("train.critic_lr", t.critic_lr);
    t.weight_decay = c.f64("train.weight_decay", t.weight_decay);
    t.warmup_actor = c.i64_("train.warmup_actor", t.warmup_actor);
    t.warmup_critic = c.i64_("train.warmup_critic", t.warmup_critic);
    t.clip_ratio = c.f64("train.clip_ratio", t.clip_ratio);
    t.gae_gamma = c.f64("train.gamma", t.gae_gamma);
    t.gae_lambda = c.f64("train.lambda", t.gae_lambda);
    t.update_epochs = c.i64_("train.update_epochs", t.update_epochs);
    t.minibatch_size = c.i64_("train.minibatch_size", t.minibatch_size);
    t.grad_clip_norm = c.f64("train.grad_clip_norm", t.grad_clip_norm);
    t.kl_stop = c.f64("train.kl_stop", t.kl_stop);
    t.kl_coef_init = c.f64("train.kl_coef_init", t.kl_coef_init);
    t.kl_target = c.f64("train.kl_target", t.kl_target);
    t.advantage_norm = c.flag("train.advantage_norm", t.advantage_norm);
    t.seed = static_cast<u64>(c.i64_("seed", static_cast<i64>(t.seed)));
    t.reward = c.str("train.reward", t.reward);
    t.val_every = c.i64_("train.val_every", t.val_every);
    t.val_tasks = c.i64_("train.val_tasks", t.val_tasks);
    t.checkpoint_every = c.i64_("train.checkpoint_every", t.checkpoint_every);
    t.moving_avg_window = c.i64_("train.moving_avg_window", t.moving_avg_window);
    t.rollout_max_rows = c.i64_("train.rollout_max_rows", t.rollout_max_rows);
    t.update_max_rows = c.i64_("train.update_max_rows", t.update_max_rows);
    t.validate();
    return t;
  }
};

// One coordinate-stream decision: the token history the policy saw, what it
// did, and what came of it.
struct Transition {
  Mat tokens;            // [L, 4] snapshot under decision-time statistics
  double u = 0;          // pre-exponentiation action
  double mu_old = 0;     // policy mean at collection (for exact KL)
  double logp_old = 0;   // log-prob at collection
  double reward = 0;
  double value = 0;      // critic estimate at collection
  double ret = 0;        // filled by compute_returns_and_advantages
  double adv = 0;
};

struct TransitionBatch {
  i64 B = 0, D = 0, T = 0, c = 0;
  double sigma_old = 0;  // action stddev at collection
  // stream (b, d) lives at index b*D + d; failures truncate a stream early
  std::vector<std::vector<Transition>> streams;
  std::vector<char> failed;            // per episode
  std::vector<double> episode_reward;  // raw reward sums per episode

  i64 transitions() const {
    i64 n = 0;
    for (const auto& s : streams) n += static_cast<i64>(s.size());
    return n;
  }
};

// Batched lockstep rollout: every live episode advances one step per policy
// forward. Actions come from per-episode RNG streams derived from
// episode_seed_base, so results are independent of batch composition and of
// the row-budget chunking.
struct RolloutResult {
  TransitionBatch batch;
  std::vector<Episode> episodes;
};

inline RolloutResult rollout(PolicyNet& policy, const std::vector<Objective>& fs, i64 T,
                             i64 c, const RewardSpec& reward,
                             const std::vector<u64>& episode_seeds, i64 max_rows = 32768,
                             bool deterministic = false, bool store_transitions = true) {
  POP_CHECK(!fs.empty(), "rollout needs at least one function");
  const i64 B = static_cast<i64>(fs.size());
  const i64 D = fs[0].D;
  for (const auto& f : fs) POP_CHECK(f.D == D, "rollout: mixed dimensions");
  POP_CHECK(episode_seeds.size() == fs.size(), "rollout: one seed per episode");

  RolloutResult out;
  TransitionBatch& batch = out.batch;
  batch.B = B;
  batch.D = D;
  batch.T = T;
  batch.c = c;
  batch.sigma_old = policy.sigma();
  batch.failed.assign(static_cast<size_t>(B), 0);
  batch.episode_reward.assign(static_cast<size_t>(B), 0.0);
  if (store_transitions) batch.streams.resize(static_cast<size_t>(B * D));

  std::vector<Rng> rngs;
  rngs.reserve(static_cast<size_t>(B));
  out.episodes.reserve(static_cast<size_t>(B));
  for (i64 b = 0; b < B; b++) {
    rngs.emplace_back(episode_seeds[static_cast<size_t>(b)]);
    out.episodes.push_back(
        init_context(fs[static_cast<size_t>(b)], c, T, rngs[static_cast<size_t>(b)]));
  }

  std::vector<i64> active;
  std::vector<double> mu, value, eta(static_cast<size_t>(D));
  for (i64 t = 0; t < T; t++) {
    active.clear();
    for (i64 b = 0; b < B; b++)
      if (!out.episodes[static_cast<size_t>(b)].done()) active.push_back(b);
    if (active.empty()) break;

    const i64 len = c + t;  // live episodes share the same history length
    const i64 rows_per_ep = D * len;
    const i64 eps_per_chunk = std::max<i64>(1, max_rows / rows_per_ep);
    for (size_t a0 = 0; a0 < active.size(); a0 += static_cast<size_t>(eps_per_chunk)) {
      const size_t a1 = std::min(active.size(), a0 + static_cast<size_t>(eps_per_chunk));
      const i64 n_ep = static_cast<i64>(a1 - a0);
      Mat tokens(n_ep * rows_per_ep, 4);
      std::vector<i64> offsets(static_cast<size_t>(n_ep * D) + 1, 0);
      for (i64 e = 0; e < n_ep; e++) {
        const Episode& ep = out.episodes[static_cast<size_t>(active[a0 + static_cast<size_t>(e)])];
        for (i64 d = 0; d < D; d++) {
          i64 s = e * D + d;
          coordinate_view(ep, d, tokens, s * len);
          offsets[static_cast<size_t>(s) + 1] = (s + 1) * len;
        }
      }
      policy.outputs(std::move(tokens), offsets, mu, value);

      for (i64 e = 0; e < n_ep; e++) {
        const i64 b = active[a0 + static_cast<size_t>(e)];
        Episode& ep = out.episodes[static_cast<size_t>(b)];
        Rng& rng = rngs[static_cast<size_t>(b)];
        for (i64 d = 0; d < D; d++) {
          const size_t s = static_cast<size_t>(e * D + d);
          PolicyNet::Action act = policy.sample_action(mu[s], rng, deterministic);
          eta[static_cast<size_t>(d)] = act.step_size;
          if (store_transitions) {
            Transition tr;
            tr.tokens = Mat(len, 4);
            // re-derive the stream's rows rather than keeping the moved matrix
            coordinate_view(ep, d, tr.tokens, 0);
            tr.u = act.u;
            tr.mu_old = mu[s];
            tr.logp_old = act.log_prob;
            tr.value = value[s];
            batch.streams[static_cast<size_t>(b * D + d)].push_back(std::move(tr));
          }
        }
        StepResult res = step(ep, eta.data(), reward);
        batch.episode_reward[static_cast<size_t>(b)] += res.reward;
        if (res.failed) batch.failed[static_cast<size_t>(b)] = 1;
        if (store_transitions)
          for (i64 d = 0; d < D; d++)
            batch.streams[static_cast<size_t>(b * D + d)].back().reward = res.reward;
      }
    }
  }
  return out;
}

inline RolloutResult rollout(PolicyNet& policy, const std::vector<Objective>& fs, i64 T,
                             i64 c, const RewardSpec& reward, u64 episode_seed_base,
                             i64 max_rows = 32768, bool deterministic = false,
                             bool store_transitions = true) {
  std::vector<u64> seeds(fs.size());
  for (size_t b = 0; b < fs.size(); b++)
    seeds[b] = derive_seed(episode_seed_base, "episode", static_cast<u64>(b));
  return rollout(policy, fs, T, c, reward, seeds, max_rows, deterministic, store_transitions);
}

inline RolloutResult rollout(PolicyNet& policy, const std::vector<SampledFunction>& fs, i64 T,
                             i64 c, const RewardSpec& reward, u64 episode_seed_base,
                             i64 max_rows = 32768, bool deterministic = false,
                             bool store_transitions = true) {
  return rollout(policy, objectives_of(fs), T, c, reward, episode_seed_base, max_rows,
                 deterministic, store_transitions);
}

// GAE over each stream with terminal bootstrap 0. With gamma = lambda = 1 the
// advantage reduces to the undiscounted suffix sum minus the value baseline.
// When return_scale is given it first absorbs this batch's raw returns, then
// rewards are divided by the running sd so the critic regresses a bounded
// target; a global scale keeps normalized rewards suffix-summable.
inline void compute_returns_and_advantages(TransitionBatch& batch, double gamma, double lambda,
                                           Welford* return_scale = nullptr) {
  double scale = 1.0;
  if (return_scale) {
    for (const auto& stream : batch.streams) {
      double g = 0.0;
      std::vector<double> rets(stream.size());
      for (size_t t = stream.size(); t-- > 0;) {
        g = stream[t].reward + gamma * g;
        rets[t] = g;
      }
      for (double r : rets) return_scale->add(r);
    }
    if (return_scale->n >= 2) scale = return_scale->sd();
  }
  for (auto& stream : batch.streams) {
    double gae = 0.0, vnext = 0.0;
    for (size_t t = stream.size(); t-- > 0;) {
      Transition& tr = stream[t];
      double delta = tr.reward / scale + gamma * vnext - tr.value;
      gae = delta + gamma * lambda * gae;
      tr.adv = gae;
      tr.ret = tr.adv + tr.value;
      vnext = tr.value;
      POP_CHECK(std::isfinite(tr.adv) && std::isfinite(tr.ret),
                "non-finite advantage or return");
    }
  }
}

struct UpdateDiagnostics {
  i64 epochs_run = 0;
  double kl = 0;             // mean exact KL over the last completed epoch
  double clip_fraction = 0;  // |ratio - 1| > clip over all processed samples
  double policy_loss = 0;    // clipped surrogate, last epoch
  double value_loss = 0;     // critic MSE, last epoch
  double grad_norm = 0;      // pre-clip norm of the last optimizer step
  double kl_coef = 0;        // penalty coefficient after adaptation
};

// Closed-form KL(N(mu_o, s_o) || N(mu_n, s_n)); the penalty and the early-stop
// test both use it (the paper names neither estimator).
inline double gauss_kl(double mu_o, double s_o, double mu_n, double s_n) {
  double dm = mu_o - mu_n;
  return std::log(s_n / s_o) + (s_o * s_o + dm * dm) / (2.0 * s_n * s_n) - 0.5;
}

struct MinibatchStats {
  double pg = 0, v = 0, kl = 0;  // per-sample means
  i64 clip_hits = 0;
};

// Accumulates d[clipped surrogate + kl_coef*KL + value MSE]/dtheta for one
// minibatch into Param::g (mean over the minibatch). The per-sample pieces
// are seeded by hand into the mu/value output nodes; the clipped-min, ratio
// and KL terms stay outside the tape. Splitting into row-budgeted chunks
// only bounds memory: grads add up and each row's forward is independent of
// its batch neighbors.
inline MinibatchStats ppo_minibatch_grads(PolicyNet& policy,
                                          const std::vector<const Transition*>& flat,
                                          const i64* mb, i64 n_mb,
                                          const std::vector<double>& adv_std, double s_old,
                                          double kl_coef, double clip_ratio, i64 max_rows) {
  MinibatchStats st;
  const double s_new = policy.sigma();
  const double var_new = s_new * s_new;
  const double inv_n = 1.0 / static_cast<double>(n_mb);
  double dlogstd_sum = 0;
  std::vector<i64> chunk;

  i64 i = 0;
  while (i < n_mb) {
    chunk.clear();
    i64 rows = 0;
    while (i < n_mb) {
      const i64 fi = mb[i];
      const i64 r = flat[static_cast<size_t>(fi)]->tokens.r;
      if (!chunk.empty() && rows + r > max_rows) break;
      chunk.push_back(fi);
      rows += r;
      i++;
    }
    Mat tokens(rows, 4);
    std::vector<i64> offsets(chunk.size() + 1, 0);
    i64 pos = 0;
    for (size_t s = 0; s < chunk.size(); s++) {
      const Mat& tk = flat[static_cast<size_t>(chunk[s])]->tokens;
      std::copy(tk.v.begin(), tk.v.end(), tokens.v.begin() + pos * 4);
      pos += tk.r;
      offsets[s + 1] = pos;
    }
    Tape tape;
    PolicyNet::Forward fw = policy.build(tape, std::move(tokens), offsets);
    const Mat& mu = tape.val(fw.mu);
    const Mat& val = tape.val(fw.value);
    Mat& dmu = tape.grad(fw.mu);
    Mat& dval = tape.grad(fw.value);

    for (size_t s = 0; s < chunk.size(); s++) {
      const Transition* tr = flat[static_cast<size_t>(chunk[s])];
      const double adv = adv_std[static_cast<size_t>(chunk[s])];
      const double mu_n = mu.at(static_cast<i64>(s), 0);
      const double v = val.at(static_cast<i64>(s), 0);
      const double lp_new = gauss_log_prob(tr->u, mu_n, s_new);
      const double ratio = std::exp(lp_new - tr->logp_old);
      const double surr1 = ratio * adv;
      const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio);
      const double surr2 = clipped * adv;
      const bool use_unclipped = surr1 <= surr2;
      st.pg += -std::min(surr1, surr2);
      if (std::fabs(ratio - 1.0) > clip_ratio) st.clip_hits++;

      st.kl += gauss_kl(tr->mu_old, s_old, mu_n, s_new);
      const double verr = v - tr->ret;
      st.v += verr * verr;

      const double dlp_dmu = (tr->u - mu_n) / var_new;
      const double dlp_dls = (tr->u - mu_n) * (tr->u - mu_n) / var_new - 1.0;
      double g_mu = 0, g_ls = 0;
      if (use_unclipped) {
        g_mu += -adv * ratio * dlp_dmu;
        g_ls += -adv * ratio * dlp_dls;
      }
      const double dm = tr->mu_old - mu_n;
      g_mu += kl_coef * (mu_n - tr->mu_old) / var_new;
      g_ls += kl_coef * (1.0 - (s_old * s_old + dm * dm) / var_new);

      dmu.at(static_cast<i64>(s), 0) = g_mu * inv_n;
      dval.at(static_cast<i64>(s), 0) = 2.0 * verr * inv_n;
      dlogstd_sum += g_ls * inv_n;
    }
    tape.backward();
  }
  policy.log_std_param().g.v[0] += dlogstd_sum * policy.dlogstd_draw();
  st.pg *= inv_n;
  st.v *= inv_n;
  st.kl *= inv_n;
  return st;
}

inline UpdateDiagnostics ppo_update(PolicyNet& policy, const TransitionBatch& batch,
                                    const TrainConfig& cfg, AdamW& opt, double& kl_coef,
                                    Rng& rng) {
  std::vector<const Transition*> flat;
  flat.reserve(static_cast<size_t>(batch.transitions()));
  for (const auto& stream : batch.streams)
    for (const auto& tr : stream) flat.push_back(&tr);
  POP_CHECK(!flat.empty(), "ppo_update on an empty batch");
  const i64 n_total = static_cast<i64>(flat.size());
  const i64 mb_size = std::min<i64>(cfg.minibatch_size, n_total);

  UpdateDiagnostics diag;
  i64 clip_hits = 0, samples_seen = 0;
  std::vector<i64> idx(flat.size());
  std::iota(idx.begin(), idx.end(), i64{0});
  std::vector<double> adv_std(flat.size());

  for (i64 epoch = 0; epoch < cfg.update_epochs; epoch++) {
    rng.shuffle(idx);
    double ep_kl = 0, ep_pg = 0, ep_v = 0;
    i64 ep_n = 0;
    for (i64 mb0 = 0; mb0 < n_total; mb0 += mb_size) {
      const i64 mb1 = std::min(n_total, mb0 + mb_size);
      const i64 n_mb = mb1 - mb0;
      const i64* mb = idx.data() + mb0;

      if (cfg.advantage_norm) {
        double mean = 0;
        for (i64 i = 0; i < n_mb; i++) mean += flat[static_cast<size_t>(mb[i])]->adv;
        mean /= static_cast<double>(n_mb);
        double ss = 0;
        for (i64 i = 0; i < n_mb; i++) {
          double d = flat[static_cast<size_t>(mb[i])]->adv - mean;
          ss += d * d;
        }
        double sd = std::sqrt(ss / static_cast<double>(n_mb));
        for (i64 i = 0; i < n_mb; i++) {
          size_t k = static_cast<size_t>(mb[i]);
          adv_std[k] = (flat[k]->adv - mean) / (sd + 1e-8);
        }
      } else {
        for (i64 i = 0; i < n_mb; i++) {
          size_t k = static_cast<size_t>(mb[i]);
          adv_std[k] = flat[k]->adv;
        }
      }

      opt.zero_grad();
      MinibatchStats st = ppo_minibatch_grads(policy, flat, mb, n_mb, adv_std, batch.sigma_old,
                                              kl_coef, cfg.clip_ratio, cfg.update_max_rows);
      if (!std::isfinite(st.pg) || !std::isfinite(st.v) || !std::isfinite(st.kl))
        fail("ppo_update: non-finite loss (policy " + fmt17(st.pg) + ", value " + fmt17(st.v) +
             ", kl " + fmt17(st.kl) + ")");

      diag.grad_norm = opt.clip_grad_norm(cfg.grad_clip_norm);
      opt.step();

      ep_pg += st.pg * static_cast<double>(n_mb);
      ep_v += st.v * static_cast<double>(n_mb);
      ep_kl += st.kl * static_cast<double>(n_mb);
      ep_n += n_mb;
      clip_hits += st.clip_hits;
      samples_seen += n_mb;
    }
    diag.epochs_run++;
    diag.kl = ep_kl / static_cast<double>(ep_n);
    diag.policy_loss = ep_pg / static_cast<double>(ep_n);
    diag.value_loss = ep_v / static_cast<double>(ep_n);
    if (diag.kl > cfg.kl_stop) break;
  }

  diag.clip_fraction =
      samples_seen > 0 ? static_cast<double>(clip_hits) / static_cast<double>(samples_seen) : 0.0;
  if (diag.kl > 1.5 * cfg.kl_target)
    kl_coef *= 2.0;
  else if (diag.kl < cfg.kl_target / 1.5)
    kl_coef *= 0.5;
  diag.kl_coef = kl_coef;
  return diag;
}

// Mean final normalized improvement of the deterministic policy over a fixed
// task set; comparable across calls because contexts reuse the same seeds.
inline double validation_ni(PolicyNet& policy, const std::vector<SampledFunction>& fs, i64 T,
                            i64 c, const RewardSpec& reward, u64 seed_base, i64 max_rows) {
  RolloutResult rr =
      rollout(policy, fs, T, c, reward, seed_base, max_rows, /*deterministic=*/true,
              /*store_transitions=*/false);
  double sum = 0;
  for (const Episode& ep : rr.episodes) {
    std::vector<double> ctx(static_cast<size_t>(ep.traj.c));
    for (i64 i = 0; i < ep.traj.c; i++) ctx[static_cast<size_t>(i)] = ep.traj.records[static_cast<size_t>(i)].y;
    sum += normalized_improvement(ctx, {ep.ybest})[0];
  }
  return sum / static_cast<double>(rr.episodes.size());
}

inline nlohmann::json policy_cfg_json(const PolicyConfig& p) {
  return {{"token_features", p.token_features},
          {"embed_dim", p.embed_dim},
          {"blocks", p.blocks},
          {"heads", p.heads},
          {"ff_expansion", p.ff_expansion},
          {"shared_dim", p.shared_dim},
          {"head_hidden", p.head_hidden},
          {"logstd_lo", p.logstd_lo},
          {"logstd_hi", p.logstd_hi},
          {"dropout", p.dropout}};
}

inline PolicyConfig policy_cfg_from_json(const nlohmann::json& j) {
  PolicyConfig p;
  p.token_features = j.at("token_features");
  p.embed_dim = j.at("embed_dim");
  p.blocks = j.at("blocks");
  p.heads = j.at("heads");
  p.ff_expansion = j.at("ff_expansion");
  p.shared_dim = j.at("shared_dim");
  p.head_hidden = j.at("head_hidden");
  p.logstd_lo = j.at("logstd_lo");
  p.logstd_hi = j.at("logstd_hi");
  p.dropout = j.at("dropout");
  p.validate();
  return p;
}

struct TrainResult {
  std::vector<std::string> artifacts;  // files written, in write order
  std::string init_checkpoint;
  std::string final_checkpoint;  // empty for a zero-iteration run
  double final_val_ni = std::numeric_limits<double>::quiet_NaN();
};

class Trainer {
 public:
  TrainConfig cfg;
  PriorConfig prior;
  PolicyConfig net_cfg;
  PolicyNet policy;
  AdamW opt;
  double kl_coef;
  Welford return_scale;
  RewardSpec reward;

  Trainer(const TrainConfig& tc, const PriorConfig& pc, const PolicyConfig& yc)
      : cfg(tc),
        prior(pc),
        net_cfg(yc),
        policy(yc, tc.seed),
        opt(policy.params(),
            {AdamW::Group{tc.actor_lr, tc.weight_decay, tc.warmup_actor, 0},
             AdamW::Group{tc.critic_lr, tc.weight_decay, tc.warmup_critic, 0}}),
        kl_coef(tc.kl_coef_init),
        reward(RewardSpec::parse(tc.reward)) {
    cfg.validate();
    prior.validate();
    POP_CHECK(cfg.minibatch_size <= cfg.batch_functions * prior.D * cfg.T,
              "train: minibatch_size exceeds the transitions of one iteration");
  }

  nlohmann::json checkpoint_meta(i64 iteration) const {
    nlohmann::json m;
    m["iteration"] = iteration;
    m["seed"] = cfg.seed;
    m["reward"] = cfg.reward;
    m["T"] = cfg.T;
    m["c"] = cfg.c;
    m["policy"] = policy_cfg_json(net_cfg);
    m["prior_D"] = prior.D;
    m["kl_coef"] = kl_coef;
    m["return_scale"] = {{"n", return_scale.n}, {"mean", return_scale.mean}, {"m2", return_scale.m2}};
    return m;
  }

  TrainResult train(const std::string& out_dir, bool verbose = false) {
    std::filesystem::create_directories(out_dir);
    TrainResult res;
    auto save = [&](const std::string& name, i64 it) {
      std::string p = (std::filesystem::path(out_dir) / name).string();
      save_checkpoint(p, policy.params(), &opt, checkpoint_meta(it));
      res.artifacts.push_back(p);
      return p;
    };
    res.init_checkpoint = save("ckpt_init.bin", 0);

    std::vector<SampledFunction> val_fns;
    val_fns.reserve(static_cast<size_t>(cfg.val_tasks));
    {
      Rng vr(derive_seed(cfg.seed, "val_functions"));
      for (i64 i = 0; i < cfg.val_tasks; i++) val_fns.push_back(sample_function(prior, vr));
    }
    const u64 val_seed = derive_seed(cfg.seed, "val_contexts");

    std::string log_path = (std::filesystem::path(out_dir) / "training_log.csv").string();
    {
      CsvWriter log(log_path,
                    {"iteration", "episode_reward_mean", "episode_reward_ma", "kl",
                     "clip_fraction", "val_ni"},
                    "pop_training_log_v1");

      std::vector<SampledFunction> fns;
      std::vector<double> reward_hist;
      double ma_sum = 0;
      for (i64 it = 0; it < cfg.total_iterations; it++) {
        if (it % cfg.resample_every == 0) {
          fns.clear();
          Rng fr(derive_seed(cfg.seed, "function_batch", static_cast<u64>(it / cfg.resample_every)));
          for (i64 b = 0; b < cfg.batch_functions; b++) fns.push_back(sample_function(prior, fr));
        }
        RolloutResult rr = rollout(policy, fns, cfg.T, cfg.c, reward,
                                   derive_seed(cfg.seed, "rollout", static_cast<u64>(it)),
                                   cfg.rollout_max_rows);
        compute_returns_and_advantages(rr.batch, cfg.gae_gamma, cfg.gae_lambda, &return_scale);
        Rng ur(derive_seed(cfg.seed, "update", static_cast<u64>(it)));
        UpdateDiagnostics diag;
        try {
          diag = ppo_update(policy, rr.batch, cfg, opt, kl_coef, ur);
        } catch (const std::exception& e) {
          fail("iteration " + std::to_string(it) + ": " + e.what());
        }

        double rew = 0;
        for (double r : rr.batch.episode_reward) rew += r;
        rew /= static_cast<double>(rr.batch.episode_reward.size());
        reward_hist.push_back(rew);
        ma_sum += rew;
        if (static_cast<i64>(reward_hist.size()) > cfg.moving_avg_window)
          ma_sum -= reward_hist[reward_hist.size() - 1 - static_cast<size_t>(cfg.moving_avg_window)];
        double ma = ma_sum / std::min<double>(static_cast<double>(reward_hist.size()),
                                              static_cast<double>(cfg.moving_avg_window));

        std::string val_cell;
        if ((it + 1) % cfg.val_every == 0 || it + 1 == cfg.total_iterations) {
          res.final_val_ni = validation_ni(policy, val_fns, cfg.T, cfg.c, reward, val_seed,
                                           cfg.rollout_max_rows);
          val_cell = fmt17(res.final_val_ni);
        }
        log.row({CsvWriter::cell(it), CsvWriter::cell(rew), CsvWriter::cell(ma),
                 CsvWriter::cell(diag.kl), CsvWriter::cell(diag.clip_fraction), val_cell});
        log.flush();
        if (verbose && (it % 10 == 0 || it + 1 == cfg.total_iterations))
          std::fprintf(stderr, "iter %lld reward %.5f ma %.5f kl %.5f clip %.3f%s\n",
                       static_cast<long long>(it), rew, ma, diag.kl, diag.clip_fraction,
                       val_cell.empty() ? "" : (" val_ni " + val_cell).c_str());

        if ((it + 1) % cfg.checkpoint_every == 0 && it + 1 != cfg.total_iterations) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "ckpt_%06lld.bin", static_cast<long long>(it + 1));
          save(buf, it + 1);
        }
      }
    }
    res.artifacts.push_back(log_path);
    if (cfg.total_iterations > 0)
      res.final_checkpoint = save("ckpt_final.bin", cfg.total_iterations);
    return res;
  }
};

}  // namespace pop
