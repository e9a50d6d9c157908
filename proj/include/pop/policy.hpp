#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pop/config.hpp"
#include "pop/rng.hpp"
#include "pop/tensor.hpp"

namespace pop {

struct PolicyConfig {
  i64 token_features = 4;
  i64 embed_dim = 64;
  i64 blocks = 4;
  i64 heads = 4;
  i64 ff_expansion = 3;  // hidden width 192; factor 4 would overshoot the parameter budget
  i64 shared_dim = 32;
  i64 head_hidden = 16;
  double logstd_lo = -3.0, logstd_hi = 2.0;
  double dropout = 0.0;  // echoed from configs; inference/training run without dropout

  void validate() const {
    POP_CHECK(embed_dim % heads == 0, "embed_dim must divide into heads");
    POP_CHECK(logstd_lo < logstd_hi, "logstd bounds inverted");
    POP_CHECK(blocks >= 1 && token_features >= 1, "degenerate policy config");
  }

  static PolicyConfig from_config(const Config& c) {
    PolicyConfig p;
    p.embed_dim = c.i64_("policy.embed_dim", p.embed_dim);
    p.blocks = c.i64_("policy.blocks", p.blocks);
    p.heads = c.i64_("policy.heads", p.heads);
    p.ff_expansion = c.i64_("policy.ff_expansion", p.ff_expansion);
    p.shared_dim = c.i64_("policy.shared_dim", p.shared_dim);
    p.head_hidden = c.i64_("policy.head_hidden", p.head_hidden);
    p.logstd_lo = c.f64("policy.logstd_lo", p.logstd_lo);
    p.logstd_hi = c.f64("policy.logstd_hi", p.logstd_hi);
    p.dropout = c.f64("policy.dropout", p.dropout);
    p.validate();
    return p;
  }
};

inline double gauss_log_prob(double u, double mu, double sigma) {
  double z = (u - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.91893853320467274178;  // 0.5*log(2*pi)
}

// Transformer actor-critic over per-coordinate token streams. Pre-norm
// blocks, bidirectional attention, last-token pooling, shared projection,
// separate actor/critic MLP heads, and one state-independent log-std scalar
// squashed into [logstd_lo, logstd_hi].
class PolicyNet {
 public:
  // optimizer group ids: actor covers backbone + heads + log_std, critic is
  // the value head alone (separate warmup schedule)
  static constexpr int kActorGroup = 0;
  static constexpr int kCriticGroup = 1;

  PolicyConfig cfg;

  // params_ holds pointers into this object; it must stay put
  PolicyNet(const PolicyNet&) = delete;
  PolicyNet& operator=(const PolicyNet&) = delete;

  explicit PolicyNet(const PolicyConfig& c, u64 seed) : cfg(c) {
    cfg.validate();
    const i64 E = cfg.embed_dim, F = cfg.ff_expansion * E;
    add(embed_w_, "embed.w", cfg.token_features, E);
    add(embed_b_, "embed.b", 1, E);
    blocks_.resize(static_cast<size_t>(cfg.blocks));
    for (i64 b = 0; b < cfg.blocks; b++) {
      auto& bl = blocks_[static_cast<size_t>(b)];
      std::string p = "block" + std::to_string(b) + ".";
      add(bl.ln1_g, p + "ln1.g", 1, E);
      add(bl.ln1_b, p + "ln1.b", 1, E);
      add(bl.wq, p + "attn.wq", E, E);
      add(bl.bq, p + "attn.bq", 1, E);
      add(bl.wk, p + "attn.wk", E, E);
      add(bl.bk, p + "attn.bk", 1, E);
      add(bl.wv, p + "attn.wv", E, E);
      add(bl.bv, p + "attn.bv", 1, E);
      add(bl.wo, p + "attn.wo", E, E);
      add(bl.bo, p + "attn.bo", 1, E);
      add(bl.ln2_g, p + "ln2.g", 1, E);
      add(bl.ln2_b, p + "ln2.b", 1, E);
      add(bl.wf1, p + "ff.w1", E, F);
      add(bl.bf1, p + "ff.b1", 1, F);
      add(bl.wf2, p + "ff.w2", F, E);
      add(bl.bf2, p + "ff.b2", 1, E);
    }
    add(lnf_g_, "final_ln.g", 1, E);
    add(lnf_b_, "final_ln.b", 1, E);
    add(shared_w_, "shared.w", E, cfg.shared_dim);
    add(shared_b_, "shared.b", 1, cfg.shared_dim);
    add(actor_w1_, "actor.w1", cfg.shared_dim, cfg.head_hidden);
    add(actor_b1_, "actor.b1", 1, cfg.head_hidden);
    add(actor_w2_, "actor.w2", cfg.head_hidden, 1);
    add(actor_b2_, "actor.b2", 1, 1);
    add(critic_w1_, "critic.w1", cfg.shared_dim, cfg.head_hidden, kCriticGroup);
    add(critic_b1_, "critic.b1", 1, cfg.head_hidden, kCriticGroup);
    add(critic_w2_, "critic.w2", cfg.head_hidden, 1, kCriticGroup);
    add(critic_b2_, "critic.b2", 1, 1, kCriticGroup);
    add(log_std_raw_, "log_std_raw", 1, 1);
    init_weights(seed);
  }

  std::vector<Param*> params() { return params_; }

  i64 param_count() const {
    i64 n = 0;
    for (const Param* p : params_) n += p->size();
    return n;
  }

  double log_std() const {
    double lo = cfg.logstd_lo, hi = cfg.logstd_hi;
    return lo + (hi - lo) * (std::tanh(log_std_raw_.w.v[0]) + 1.0) * 0.5;
  }

  double sigma() const { return std::exp(log_std()); }

  // d log_std / d raw, for seeding the scalar's gradient by hand
  double dlogstd_draw() const {
    double th = std::tanh(log_std_raw_.w.v[0]);
    return (cfg.logstd_hi - cfg.logstd_lo) * 0.5 * (1.0 - th * th);
  }

  Param& log_std_param() { return log_std_raw_; }

  struct Forward {
    int mu = -1;     // [nseq, 1]
    int value = -1;  // [nseq, 1]
  };

  // Builds the graph for packed sequences (tokens [N,4], offsets nseq+1) and
  // pools the last token of each sequence. Works for ragged lengths; training
  // batches are rectangular by construction but nothing relies on it.
  Forward build(Tape& t, Mat tokens, const std::vector<i64>& offsets) {
    POP_CHECK(tokens.c == cfg.token_features, "token feature width mismatch");
    POP_CHECK(offsets.size() >= 2, "empty batch");
    for (size_t s = 0; s + 1 < offsets.size(); s++)
      POP_CHECK(offsets[s + 1] > offsets[s], "empty sequence rejected");
    int x = t.linear(t.input(std::move(tokens)), t.param(embed_w_), t.param(embed_b_));
    for (auto& bl : blocks_) {
      int ln1 = t.layernorm(x, t.param(bl.ln1_g), t.param(bl.ln1_b));
      int q = t.linear(ln1, t.param(bl.wq), t.param(bl.bq));
      int k = t.linear(ln1, t.param(bl.wk), t.param(bl.bk));
      int v = t.linear(ln1, t.param(bl.wv), t.param(bl.bv));
      int att = t.attention(q, k, v, offsets, static_cast<int>(cfg.heads));
      int proj = t.linear(att, t.param(bl.wo), t.param(bl.bo));
      int h = t.add(x, proj);
      int ln2 = t.layernorm(h, t.param(bl.ln2_g), t.param(bl.ln2_b));
      int f1 = t.gelu(t.linear(ln2, t.param(bl.wf1), t.param(bl.bf1)));
      int f2 = t.linear(f1, t.param(bl.wf2), t.param(bl.bf2));
      x = t.add(h, f2);
    }
    int xf = t.layernorm(x, t.param(lnf_g_), t.param(lnf_b_));
    std::vector<i64> last(offsets.size() - 1);
    for (size_t s = 0; s + 1 < offsets.size(); s++) last[s] = offsets[s + 1] - 1;
    int pooled = t.gather_rows(xf, std::move(last));
    int shared = t.tanh_(t.linear(pooled, t.param(shared_w_), t.param(shared_b_)));
    Forward out;
    int a1 = t.tanh_(t.linear(shared, t.param(actor_w1_), t.param(actor_b1_)));
    out.mu = t.linear(a1, t.param(actor_w2_), t.param(actor_b2_));
    int c1 = t.tanh_(t.linear(shared, t.param(critic_w1_), t.param(critic_b1_)));
    out.value = t.linear(c1, t.param(critic_w2_), t.param(critic_b2_));
    return out;
  }

  // Inference: mu and value per stream, no gradient bookkeeping.
  void outputs(Mat tokens, const std::vector<i64>& offsets, std::vector<double>& mu,
               std::vector<double>& value) {
    Tape t;
    t.grad_enabled = false;
    Forward f = build(t, std::move(tokens), offsets);
    const Mat& m = t.val(f.mu);
    const Mat& v = t.val(f.value);
    mu.resize(static_cast<size_t>(m.r));
    value.resize(static_cast<size_t>(v.r));
    for (i64 i = 0; i < m.r; i++) {
      mu[static_cast<size_t>(i)] = m.at(i, 0);
      value[static_cast<size_t>(i)] = v.at(i, 0);
    }
  }

  struct Action {
    double u = 0;          // pre-exponentiation action (PPO ratio space)
    double step_size = 0;  // exp(u)
    double log_prob = 0;
  };

  Action sample_action(double mu, Rng& rng, bool deterministic = false) const {
    Action a;
    double sd = sigma();
    a.u = deterministic ? mu : mu + sd * rng.normal();
    a.step_size = std::exp(a.u);
    a.log_prob = gauss_log_prob(a.u, mu, sd);
    return a;
  }

 private:
  struct Block {
    Param ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, wf1, bf1, wf2, bf2;
  };

  void add(Param& slot, const std::string& name, i64 r, i64 c, int group = kActorGroup) {
    slot = Param(name, r, c, group);
    params_.push_back(&slot);
  }

  // Linear layers: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
  // LayerNorm gains 1, shifts 0. log_std_raw 0 (log_std starts mid-range).
  void init_weights(u64 seed) {
    Rng rng(derive_seed(seed, "policy_init"));
    for (Param* p : params_) {
      bool is_gain = p->name.find(".g") != std::string::npos && p->name.find("ln") != std::string::npos;
      bool is_ln_shift =
          p->name.find(".b") != std::string::npos && p->name.find("ln") != std::string::npos;
      if (p->name == "log_std_raw") {
        p->w.v[0] = 0.0;
      } else if (is_gain) {
        for (i64 i = 0; i < p->size(); i++) p->w.v[static_cast<size_t>(i)] = 1.0;
      } else if (is_ln_shift) {
        p->w.zero();
      } else {
        // weight [in, out] or its bias [1, out]; fan_in from the matching weight
        i64 fan_in = p->w.r > 1 ? p->w.r : fan_of_bias(p->name);
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (i64 i = 0; i < p->size(); i++)
          p->w.v[static_cast<size_t>(i)] = rng.uniform(-bound, bound);
      }
    }
  }

  i64 fan_of_bias(const std::string& bias_name) const {
    // bias params are created right after their weight; find it by name
    std::string wname = bias_name;
    size_t pos = wname.rfind('.');
    std::string tail = wname.substr(pos + 1);
    if (tail == "b") wname = wname.substr(0, pos) + ".w";
    else wname = wname.substr(0, pos) + ".w" + tail.substr(1);
    for (const Param* p : params_)
      if (p->name == wname) return p->w.r;
    fail("no matching weight for bias " + bias_name);
  }

  Param embed_w_, embed_b_;
  std::vector<Block> blocks_;
  Param lnf_g_, lnf_b_;
  Param shared_w_, shared_b_;
  Param actor_w1_, actor_b1_, actor_w2_, actor_b2_;
  Param critic_w1_, critic_b1_, critic_w2_, critic_b2_;
  Param log_std_raw_;
  std::vector<Param*> params_;
};

}  // namespace pop
