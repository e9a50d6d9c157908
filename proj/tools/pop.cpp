// pop: train policies on the synthetic prior and evaluate them against
// classical optimizers under matched budgets.
//
// Subcommands: train, eval-prior, eval-bench, sweep-lr, sample-prior.
// Flags: --config FILE, --seed N, --workers N, --out DIR, --checkpoint FILE,
// plus trailing key=value config overrides. POP_OUT_ROOT sets the default
// output root. Exit codes: 0 ok, 2 config error, 3 artifact error,
// 4 numerical failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "pop/evalrun.hpp"

namespace fs = std::filesystem;
using namespace pop;

namespace {

struct Args {
  std::string command;
  std::string config_path;
  std::string checkpoint;
  std::string out_dir;
  u64 seed = 1;
  bool seed_set = false;
  i64 workers = 1;
  std::vector<std::string> overrides;
};

const char* kUsage =
    "usage: pop <train|eval-prior|eval-bench|sweep-lr|sample-prior>\n"
    "           [--config FILE] [--seed N] [--workers N] [--out DIR]\n"
    "           [--checkpoint FILE] [key=value ...]\n";

Args parse_args(int argc, char** argv) {
  Args a;
  POP_CHECK(argc >= 2, std::string("missing subcommand\n") + kUsage);
  a.command = argv[1];
  const std::vector<std::string> cmds = {"train", "eval-prior", "eval-bench", "sweep-lr",
                                         "sample-prior"};
  bool known = false;
  for (const auto& c : cmds) known = known || c == a.command;
  POP_CHECK(known, "unknown subcommand: " + a.command + "\n" + kUsage);

  for (int i = 2; i < argc; i++) {
    std::string arg = argv[i];
    auto next = [&]() -> std::string {
      POP_CHECK(i + 1 < argc, arg + " needs a value");
      return argv[++i];
    };
    if (arg == "--config") {
      a.config_path = next();
    } else if (arg == "--seed") {
      a.seed = static_cast<u64>(parse_i64(next()));
      a.seed_set = true;
    } else if (arg == "--workers") {
      a.workers = parse_i64(next());
      POP_CHECK(a.workers >= 1, "--workers must be >= 1");
    } else if (arg == "--out") {
      a.out_dir = next();
    } else if (arg == "--checkpoint") {
      a.checkpoint = next();
    } else if (arg.find('=') != std::string::npos && arg.rfind("--", 0) != 0) {
      a.overrides.push_back(arg);
    } else {
      fail("unknown flag: " + arg + "\n" + kUsage);
    }
  }
  if (a.out_dir.empty()) {
    const char* root = std::getenv("POP_OUT_ROOT");
    a.out_dir = (fs::path(root ? root : "runs") /
                 (a.command + "-seed" + std::to_string(a.seed)))
                    .string();
  }
  return a;
}

// every command records what it wrote; the manifest carries content hashes so
// reruns can be compared without re-reading the outputs
struct Manifest {
  nlohmann::json j;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  Manifest(const Args& a, const Config& cfg) {
    j["schema"] = "pop_manifest_v1";
    j["command"] = a.command;
    j["version"] = kVersion;
    j["seed"] = a.seed;
    j["workers"] = a.workers;
    j["config"] = nlohmann::json::object();
    for (const auto& [k, v] : cfg.items()) j["config"][k] = v;
    j["input_checkpoint"] = a.checkpoint;
    j["input_checkpoint_hash"] =
        a.checkpoint.empty() ? "" : fmt_hex(fnv1a64_file(a.checkpoint));
  }

  void add(const std::string& path) { outputs.push_back(path); }

  void write(const std::string& out_dir) {
    nlohmann::json outs = nlohmann::json::array();
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& p : outputs) {
      std::string rel = fs::relative(p, out_dir).string();
      outs.push_back(rel);
      hashes[rel] = fmt_hex(fnv1a64_file(p));
    }
    j["outputs"] = outs;
    j["output_hashes"] = hashes;
    j["wall_clock_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spit((fs::path(out_dir) / "manifest.json").string(), j.dump(2) + "\n");
  }
};

Config load_config(const Args& a) {
  Config cfg = a.config_path.empty() ? Config() : Config::load(a.config_path);
  cfg.apply_overrides(a.overrides);
  if (a.seed_set) cfg.set("train.seed", std::to_string(a.seed));
  return cfg;
}

std::vector<std::string> parse_methods(const Config& cfg) {
  std::string s = cfg.str("eval.methods", "pop,gd,adam,lbfgs,rs,ga,de");
  std::vector<std::string> out;
  for (auto& m : split(s, ',')) {
    std::string t = trim(m);
    if (!t.empty()) out.push_back(t);
  }
  POP_CHECK(!out.empty(), "eval.methods is empty");
  return out;
}

// horizon is the total evaluation budget; the policy acts for horizon - c
// steps after the c context observations
void budgets(const Config& cfg, i64& c, i64& T) {
  c = cfg.i64_("eval.c", 10);
  i64 horizon = cfg.i64_("eval.horizon", 50);
  POP_CHECK(c >= 1, "eval.c must be >= 1");
  POP_CHECK(horizon > c, "eval.horizon must exceed eval.c");
  T = horizon - c;
}

int cmd_train(const Args& a, int& phase) {
  Config cfg = load_config(a);
  TrainConfig tc = TrainConfig::from_config(cfg);
  PriorConfig pc = PriorConfig::from_config(cfg);
  PolicyConfig yc = PolicyConfig::from_config(cfg);
  tc.validate();
  pc.validate();
  yc.validate();

  phase = 3;
  Manifest man(a, cfg);
  fs::create_directories(a.out_dir);

  phase = 4;
  Trainer trainer(tc, pc, yc);
  TrainResult res = trainer.train(a.out_dir, /*verbose=*/true);
  for (const auto& p : res.artifacts) man.add(p);
  man.add((fs::path(a.out_dir) / "training_log.csv").string());
  man.write(a.out_dir);
  if (std::isfinite(res.final_val_ni))
    std::fprintf(stderr, "final validation NI: %s\n", fmt17(res.final_val_ni).c_str());
  return 0;
}

int cmd_eval_prior(const Args& a, int& phase) {
  Config cfg = load_config(a);
  std::string ck = a.checkpoint.empty() ? cfg.str("eval.checkpoint", "") : a.checkpoint;
  i64 c, T;
  budgets(cfg, c, T);
  i64 n_tasks = cfg.i64_("eval.n_tasks", 256);
  POP_CHECK(n_tasks >= 2, "eval.n_tasks must be >= 2");
  auto methods = parse_methods(cfg);
  bool wants_pop = false;
  for (const auto& m : methods) wants_pop = wants_pop || m == "pop";
  POP_CHECK(!wants_pop || !ck.empty(), "eval-prior with pop needs --checkpoint");
  EvalOptions opt = EvalOptions::from_config(cfg);
  opt.workers = a.workers;
  PriorConfig pc = PriorConfig::from_config(cfg);
  pc.finalize();

  std::vector<i64> dims;
  for (auto& tok : split(cfg.str("eval.dims", std::to_string(pc.D)), ','))
    if (!trim(tok).empty()) dims.push_back(parse_i64(trim(tok)));
  POP_CHECK(!dims.empty(), "eval.dims is empty");

  phase = 3;
  Manifest man(a, cfg);
  LoadedPolicy lp;
  if (!ck.empty()) lp = load_policy(ck);
  fs::create_directories(a.out_dir);

  phase = 4;
  for (i64 D : dims) {
    PriorConfig pd = pc;
    if (D != pc.D) {
      // out-of-distribution dims keep smoothness by growing the feature count
      // linearly: M_eval = M_train * D
      pd.D = D;
      pd.M = pc.M * D;
      pd.box_lo.clear();
      pd.box_hi.clear();
      pd.finalize();
    }
    PriorTaskSet ts = make_prior_tasks(pd, n_tasks, derive_seed(a.seed, "eval_prior",
                                                                static_cast<u64>(D)));
    EvalReport rep = run_eval(lp.net.get(), ts.tasks, c, T, methods, opt);
    std::string tag = "_D" + std::to_string(D);
    std::string p1 = (fs::path(a.out_dir) / ("ni_curves" + tag + ".csv")).string();
    std::string p2 = (fs::path(a.out_dir) / ("rank_curves" + tag + ".csv")).string();
    std::string p3 = (fs::path(a.out_dir) / ("eval_tasks" + tag + ".csv")).string();
    write_ni_curves(rep, p1);
    write_rank_curves(rep, p2);
    write_task_table(rep, p3);
    man.add(p1);
    man.add(p2);
    man.add(p3);
  }
  man.write(a.out_dir);
  return 0;
}

int cmd_eval_bench(const Args& a, int& phase) {
  Config cfg = load_config(a);
  std::string ck = a.checkpoint.empty() ? cfg.str("eval.checkpoint", "") : a.checkpoint;
  i64 c, T;
  budgets(cfg, c, T);
  i64 reps = cfg.i64_("eval.reps", 8);
  auto methods = parse_methods(cfg);
  bool wants_pop = false;
  for (const auto& m : methods) wants_pop = wants_pop || m == "pop";
  POP_CHECK(!wants_pop || !ck.empty(), "eval-bench with pop needs --checkpoint");
  EvalOptions opt = EvalOptions::from_config(cfg);
  opt.workers = a.workers;

  phase = 3;
  Manifest man(a, cfg);
  LoadedPolicy lp;
  if (!ck.empty()) lp = load_policy(ck);
  fs::create_directories(a.out_dir);

  phase = 4;
  auto tasks = make_bench_tasks(reps, derive_seed(a.seed, "eval_bench"));
  EvalReport rep = run_eval(lp.net.get(), tasks, c, T, methods, opt);
  std::string p1 = (fs::path(a.out_dir) / "regret_curves.csv").string();
  std::string p2 = (fs::path(a.out_dir) / "rank_curves.csv").string();
  std::string p3 = (fs::path(a.out_dir) / "eval_tasks.csv").string();
  std::string p4 = (fs::path(a.out_dir) / "benchmark_catalog.json").string();
  write_regret_curves(rep, p1);
  write_rank_curves(rep, p2);
  write_task_table(rep, p3);
  spit(p4, benchmark_catalog_json().dump(2) + "\n");
  man.add(p1);
  man.add(p2);
  man.add(p3);
  man.add(p4);
  man.write(a.out_dir);
  return 0;
}

int cmd_sweep_lr(const Args& a, int& phase) {
  Config cfg = load_config(a);
  std::string method = cfg.str("sweep.method", "gd");
  POP_CHECK(method == "gd" || method == "adam" || method == "lbfgs",
            "sweep.method must be gd, adam, or lbfgs");
  i64 c, T;
  budgets(cfg, c, T);
  i64 n_tasks = cfg.i64_("sweep.n_tasks", 128);
  POP_CHECK(n_tasks >= 2, "sweep.n_tasks must be >= 2");
  std::vector<double> grid;
  if (cfg.has("sweep.grid")) {
    for (auto& tok : split(cfg.str("sweep.grid"), ','))
      if (!trim(tok).empty()) grid.push_back(parse_f64(trim(tok)));
  } else {
    grid = lr_sweep_grid();
  }
  POP_CHECK(!grid.empty(), "sweep.grid is empty");
  EvalOptions opt = EvalOptions::from_config(cfg);
  opt.workers = a.workers;
  PriorConfig pc = PriorConfig::from_config(cfg);
  pc.finalize();

  phase = 3;
  Manifest man(a, cfg);
  fs::create_directories(a.out_dir);

  phase = 4;
  PriorTaskSet ts = make_prior_tasks(pc, n_tasks, derive_seed(a.seed, "sweep"));
  auto rows = sweep_lr_run(method, grid, ts.tasks, c, T, opt);
  std::string p = (fs::path(a.out_dir) / ("sweep_" + method + ".csv")).string();
  write_sweep(rows, method, p);
  man.add(p);
  man.write(a.out_dir);
  return 0;
}

int cmd_sample_prior(const Args& a, int& phase) {
  Config cfg = load_config(a);
  i64 n = cfg.i64_("sample.n", 12);
  i64 res = cfg.i64_("sample.grid_res", 128);
  POP_CHECK(n >= 1 && res >= 2, "sample.n >= 1 and sample.grid_res >= 2 required");
  PriorConfig pc = PriorConfig::from_config(cfg);
  pc.finalize();
  POP_CHECK(pc.D == 2, "sample-prior exports 2d surfaces; prior.D must be 2");

  phase = 3;
  Manifest man(a, cfg);
  fs::create_directories(a.out_dir);

  phase = 4;
  Rng rng(derive_seed(a.seed, "sample_prior"));
  for (i64 i = 0; i < n; i++) {
    SampledFunction f = sample_function(pc, rng);
    char name[32];
    std::snprintf(name, sizeof name, "surface_%03lld.csv", static_cast<long long>(i));
    std::string p = (fs::path(a.out_dir) / name).string();
    CsvWriter w(p, {"x0", "x1", "y"}, "pop_prior_surface_v1");
    for (i64 r = 0; r < res; r++)
      for (i64 q = 0; q < res; q++) {
        double x0 = pc.box_lo[0] + (pc.box_hi[0] - pc.box_lo[0]) * static_cast<double>(r) /
                                       static_cast<double>(res - 1);
        double x1 = pc.box_lo[1] + (pc.box_hi[1] - pc.box_lo[1]) * static_cast<double>(q) /
                                       static_cast<double>(res - 1);
        double x[2] = {x0, x1};
        w.row({fmt17(x0), fmt17(x1), fmt17(f.evaluate(x))});
      }
    man.add(p);
  }
  man.write(a.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // config problems exit 2, artifact problems 3, anything after that 4;
  // commands bump the phase as they get past each stage
  int phase = 2;
  try {
    Args a = parse_args(argc, argv);
    if (a.command == "train") return cmd_train(a, phase);
    if (a.command == "eval-prior") return cmd_eval_prior(a, phase);
    if (a.command == "eval-bench") return cmd_eval_bench(a, phase);
    if (a.command == "sweep-lr") return cmd_sweep_lr(a, phase);
    if (a.command == "sample-prior") return cmd_sample_prior(a, phase);
    fail("unreachable");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return phase;
  }
}
