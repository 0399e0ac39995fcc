#include "oculorl/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <optional>
#include <ostream>
#include <regex>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <fmt/format.h>

#include "oculorl/checkpoint.hpp"
#include "oculorl/config.hpp"
#include "oculorl/error.hpp"
#include "oculorl/evalkit.hpp"
#include "oculorl/verify.hpp"

namespace oculorl {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool verbose = false;
};

struct Args {
  CommonArgs common;
  std::optional<int> episodes;
  std::string checkpoint;
  std::optional<double> dy;
  std::optional<double> dz;
  int workers = 1;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("--config", a.common.config, "YAML run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.common.seed, "Override the configured seed");
  cmd->add_option("--out", a.common.out,
                  "Output directory (default: $OCULORL_OUT, else the configured output_dir)");
  cmd->add_flag("--verbose", a.common.verbose, "Print per-episode progress");
}

struct Context {
  RunConfig config;
  fs::path out_dir;
  std::string command;
  std::vector<std::string> argv;
};

Context prepare(const std::string& command, const Args& a, const std::vector<std::string>& argv) {
  Context ctx;
  ctx.command = command;
  ctx.argv = argv;
  ctx.config = a.common.config.empty() ? RunConfig{} : parse_config(a.common.config);
  if (a.common.seed) ctx.config.seed = *a.common.seed;
  if (a.episodes) {
    ctx.config.train.episodes = *a.episodes;
    ctx.config.train.validate();
  }
  if (!a.common.out.empty()) {
    ctx.out_dir = a.common.out;
  } else if (const char* env = std::getenv("OCULORL_OUT"); env != nullptr && *env != '\0') {
    ctx.out_dir = env;
  } else {
    ctx.out_dir = ctx.config.output_dir;
  }
  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec) throw IoFailure(fmt::format("cannot create {}: {}", ctx.out_dir.string(), ec.message()));
  return ctx;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string yaml_quote(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') q += '\\';
    q += c;
  }
  return q + '"';
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  out.close();
  if (!out) throw IoFailure(fmt::format("write to {} failed", path.string()));
}

std::string metadata(const Context& ctx) {
  return fmt::format("oculorl {} {} seed={}", kToolVersion, ctx.command, ctx.config.seed);
}

// Resolved configuration plus everything needed to rerun the command.
void write_manifest(const Context& ctx) {
  write_file(ctx.out_dir / "config.yaml", dump_config(ctx.config));
  std::string m;
  m += "tool: oculorl\n";
  m += fmt::format("version: {}\n", kToolVersion);
  m += fmt::format("command: {}\n", ctx.command);
  m += "argv:\n";
  for (const std::string& a : ctx.argv) m += fmt::format("  - {}\n", yaml_quote(a));
  m += fmt::format("seed: {}\n", ctx.config.seed);
  m += "config: config.yaml\n";
  m += fmt::format("checkpoint_format: {}\n", kCheckpointVersion);
  m += "libraries:\n";
  m += fmt::format("  compiler: {}\n", yaml_quote(__VERSION__));
  m += fmt::format("  eigen: {}.{}.{}\n", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                   EIGEN_MINOR_VERSION);
  m += fmt::format("  fmt: {}\n", FMT_VERSION);
  m += fmt::format("  cli11: {}\n", CLI11_VERSION);
  m += fmt::format("created_utc: {}\n", utc_now());
  write_file(ctx.out_dir / "manifest.yaml", m);
}

fs::path default_checkpoint_dir(const Context& ctx) { return ctx.out_dir / "checkpoints"; }

fs::path resolve_final_checkpoint(const Context& ctx, const std::string& given) {
  fs::path p = given.empty() ? default_checkpoint_dir(ctx) / "final.ckpt" : fs::path(given);
  if (fs::is_directory(p)) p /= "final.ckpt";
  if (!fs::exists(p)) throw UsageError(fmt::format("checkpoint {} does not exist", p.string()));
  return p;
}

Actor actor_from(const fs::path& path) { return load_checkpoint(path).state.agent.actor; }

int cmd_train(const Context& ctx, const Args& a, std::ostream& out, std::ostream& err) {
  const RunConfig& c = ctx.config;
  std::optional<TrainerState> state;
  if (!a.checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(resolve_final_checkpoint(ctx, a.checkpoint));
    if (!ck.has_buffer) {
      err << "warning: checkpoint has no replay buffer; resuming with an empty buffer\n";
    }
    state.emplace(std::move(ck.state));
    out << fmt::format("resuming after episode {}\n", state->episode);
  } else {
    state.emplace(init_trainer(c.train, c.seed));
  }

  TrainOptions opt;
  opt.out_dir = ctx.out_dir;
  opt.workers = a.workers;
  opt.metadata = metadata(ctx);
  opt.on_episode = [&](const LogRow& r) {
    if (a.common.verbose || r.milestone_flag != 0 || r.episode % 100 == 0) {
      out << fmt::format("episode {:>6}  reward {:>10.2f}  mean {:>10.2f}  sigma {:.4f}{}\n",
                         r.episode, r.cumulative_reward, r.rolling_mean, r.noise_sigma,
                         r.milestone_flag != 0 ? "  milestone" : "");
      out.flush();
    }
  };
  train(c.model, c.episode, c.train, *state, opt);
  out << fmt::format("trained {} episodes, {} milestones; log {}\n", state->episode,
                     state->milestones.size(), (ctx.out_dir / "train_log.csv").string());
  return 0;
}

std::vector<MilestonePolicy> load_policies(const fs::path& where) {
  std::vector<MilestonePolicy> policies;
  if (fs::is_regular_file(where)) {
    const Checkpoint ck = load_checkpoint(where);
    MilestonePolicy p;
    p.index = static_cast<int>(ck.state.milestones.size());
    p.episode = ck.state.episode;
    p.train_mean = ck.state.log.empty() ? 0.0 : ck.state.log.back().rolling_mean;
    p.actor = ck.state.agent.actor;
    policies.push_back(std::move(p));
    return policies;
  }
  if (!fs::is_directory(where)) {
    throw UsageError(fmt::format("{} is neither a checkpoint nor a directory", where.string()));
  }
  const std::regex pattern(R"(m(\d+)_(\d+)\.ckpt)");
  for (const auto& entry : fs::directory_iterator(where)) {
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) continue;
    const Checkpoint ck = load_checkpoint(entry.path());
    MilestonePolicy p;
    p.index = std::stoi(m[1].str());
    p.episode = std::stoi(m[2].str());
    p.train_mean = ck.state.milestones.empty() ? 0.0 : ck.state.milestones.back().rolling_mean;
    p.actor = ck.state.agent.actor;
    policies.push_back(std::move(p));
  }
  std::sort(policies.begin(), policies.end(),
            [](const MilestonePolicy& x, const MilestonePolicy& y) { return x.index < y.index; });
  if (policies.empty()) {
    throw CheckpointUnreadable(fmt::format("no milestone checkpoints in {}", where.string()));
  }
  return policies;
}

int cmd_eval_milestones(const Context& ctx, const Args& a, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const fs::path where = a.checkpoint.empty() ? default_checkpoint_dir(ctx) : fs::path(a.checkpoint);
  const std::vector<MilestonePolicy> policies = load_policies(where);
  const std::vector<Phase1Curve> curves =
      run_phase1(policies, c.model, c.episode, c.eval.phase1_episodes, c.seed);

  std::string rows = "milestone,episode,eval_episode,step,reward\n";
  for (const Phase1Curve& curve : curves) {
    for (std::size_t e = 0; e < curve.rewards.size(); ++e) {
      for (std::size_t s = 0; s < curve.rewards[e].size(); ++s) {
        rows += fmt::format("{},{},{},{},{:.10g}\n", curve.index, curve.episode, e + 1, s + 1,
                            curve.rewards[e][s]);
      }
    }
    out << fmt::format("milestone {:>3} (episode {:>6}): mean cumulative reward {:>10.2f} +/- {:.2f}\n",
                       curve.index, curve.episode, curve.mean_cumulative, curve.std_cumulative);
  }
  write_file(ctx.out_dir / "phase1_rewards.csv", rows);
  emit_milestone_report(ctx.out_dir, summarize_phase1(curves));
  return 0;
}

int cmd_eval_grid(const Context& ctx, const Args& a, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const Actor actor = actor_from(resolve_final_checkpoint(ctx, a.checkpoint));
  EpisodeConfig ec = c.episode;
  ec.initial_jitter = c.eval.grid_jitter;
  const GridSpec grid = GridSpec::standard(c.eval.grid_spacing, c.eval.grid_episodes,
                                           c.episode.steps, c.eval.warmup_drop);
  const Phase2Result result = run_phase2(greedy_policy(actor), c.model, ec, grid, c.seed, a.workers);
  const Phase2Result baseline = run_phase2(random_policy(), c.model, ec, grid, c.seed, a.workers);

  std::vector<PointSeries> series;
  for (const PointResult& p : result.points) series.push_back(summarize_point(p));
  emit_report(ctx.out_dir, result.stats, series, {});

  const double mean_m = overall_mean_distance(result.stats);
  const double base_m = overall_mean_distance(baseline.stats);
  std::string summary;
  summary += fmt::format("overall_mean_distance_m: {:.6f}\n", mean_m);
  summary += fmt::format("overall_deviation_angle_deg: {:.4f}\n", deviation_angle(mean_m));
  summary += fmt::format("right_mean_cm: {:.4f}\n", result.stats.overall.right.mean);
  summary += fmt::format("left_mean_cm: {:.4f}\n", result.stats.overall.left.mean);
  summary += fmt::format("random_policy_mean_distance_m: {:.6f}\n", base_m);
  summary += "reference:\n";
  summary += "  right_mean_cm: 4.5\n";
  summary += "  left_mean_cm: 6.1\n";
  summary += "  deviation_angle_deg: 3.5\n";
  write_file(ctx.out_dir / "report" / "summary.yaml", summary);

  out << fmt::format("{:>6} {:>6} {:>8} {:>8}\n", "dy", "dz", "R cm", "L cm");
  for (const StatsRow& r : result.stats.points) {
    out << fmt::format("{:>6.2f} {:>6.2f} {:>8.2f} {:>8.2f}\n", r.dy + 0.0, r.dz + 0.0,
                       r.right.mean, r.left.mean);
  }
  out << fmt::format("overall mean distance {:.4f} m ({:.2f} deg); random policy {:.4f} m\n",
                     mean_m, deviation_angle(mean_m), base_m);
  return 0;
}

int cmd_rollout(const Context& ctx, const Args& a, std::ostream& out) {
  const RunConfig& c = ctx.config;
  Actor actor(c.train.hidden);
  if (!a.checkpoint.empty()) {
    actor = actor_from(resolve_final_checkpoint(ctx, a.checkpoint));
  } else {
    actor = init_trainer(c.train, c.seed).agent.actor;
  }
  EyeEnv env(c.model, c.episode, derive_seed(c.seed, seed_stream::kEval));
  std::optional<Displacement> d;
  if (a.dy || a.dz) d = Displacement{a.dy.value_or(0.0), a.dz.value_or(0.0)};
  Observation obs = env.reset(d);
  std::vector<TraceRow> rows;
  double total = 0.0;
  while (!env.done()) {
    const StepResult r = env.step(actor.act(obs));
    rows.push_back({env.steps_taken(), r.observation, r.terms, r.reward});
    total += r.reward;
    obs = r.observation;
  }
  write_trace_csv(ctx.out_dir / "trace.csv", rows);
  out << fmt::format("target ({:.4f}, {:.4f}, {:.4f}); {} steps; cumulative reward {:.3f}\n",
                     env.target().x, env.target().y, env.target().z, rows.size(), total);
  return 0;
}

int cmd_verify(const Context& ctx, std::ostream& out) {
  bool all = true;
  for (const CheckResult& r : run_verification(ctx.config)) {
    out << fmt::format("[{}] {:<13} {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

int cmd_report(const Context& ctx, std::ostream& out) {
  const int n = regenerate_plots(ctx.out_dir / "report");
  out << fmt::format("regenerated {} plots in {}\n", n, (ctx.out_dir / "report").string());
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binocular eye-movement control with DDPG", "oculorl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Args a;
  CLI::App* train_cmd = app.add_subcommand("train", "Train an agent");
  add_common(train_cmd, a);
  train_cmd->add_option("--episodes", a.episodes, "Total episodes (overrides the config)");
  train_cmd->add_option("--checkpoint", a.checkpoint, "Resume from this checkpoint");
  train_cmd->add_option("--workers", a.workers, "Parallel episode collectors")
      ->check(CLI::PositiveNumber);

  CLI::App* phase1 = app.add_subcommand("eval-milestones", "Greedy rollouts of every milestone");
  add_common(phase1, a);
  phase1->add_option("--checkpoint", a.checkpoint, "Checkpoint file or directory of milestones");

  CLI::App* phase2 = app.add_subcommand("eval-grid", "Fixation statistics on the 3x3 grid");
  add_common(phase2, a);
  phase2->add_option("--checkpoint", a.checkpoint, "Checkpoint to evaluate");
  phase2->add_option("--workers", a.workers, "Grid points evaluated in parallel")
      ->check(CLI::PositiveNumber);

  CLI::App* rollout = app.add_subcommand("rollout", "Trace one greedy episode");
  add_common(rollout, a);
  rollout->add_option("--checkpoint", a.checkpoint, "Policy checkpoint");
  rollout->add_option("--dy", a.dy, "Fixed vertical target displacement (m)");
  rollout->add_option("--dz", a.dz, "Fixed horizontal target displacement (m)");

  CLI::App* verify = app.add_subcommand("verify", "Run the self-check suites");
  add_common(verify, a);

  CLI::App* report = app.add_subcommand("report", "Regenerate plots from report CSVs");
  add_common(report, a);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const Context ctx = prepare(cmd->get_name(), a, args);
    write_manifest(ctx);
    if (cmd == train_cmd) return cmd_train(ctx, a, out, err);
    if (cmd == phase1) return cmd_eval_milestones(ctx, a, out);
    if (cmd == phase2) return cmd_eval_grid(ctx, a, out);
    if (cmd == rollout) return cmd_rollout(ctx, a, out);
    if (cmd == verify) return cmd_verify(ctx, out);
    return cmd_report(ctx, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << fmt::format("config error (line {}): {}\n", e.line(), e.what());
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace oculorl
