#include "oculorl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "oculorl/checkpoint.hpp"
#include "oculorl/error.hpp"

namespace oculorl {

namespace {

constexpr const char* kLogHeader =
    "episode,cumulative_reward,rolling_mean,milestone_flag,noise_sigma,critic_loss_mean";

std::string format_row(const LogRow& r) {
  return fmt::format("{},{:.17g},{:.17g},{},{:.17g},{:.17g}\n", r.episode, r.cumulative_reward,
                     r.rolling_mean, r.milestone_flag, r.noise_sigma, r.critic_loss_mean);
}

ActionVector explore(const Actor& actor, const Observation& obs, OuNoise& noise,
                     std::mt19937_64& rng) {
  ActionVector a = actor.act(obs);
  const ActionVector n = noise_sample(noise, rng);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i] + n[i], 0.0, 1.0);
  return a;
}

bool is_failure(StepStatus s) { return s == StepStatus::Diverged || s == StepStatus::GazeParallel; }

struct CollectedEpisode {
  std::vector<Transition> transitions;
  double cumulative = 0.0;
};

CollectedEpisode collect_episode(const Actor& actor, EyeEnv& env, OuNoise& noise,
                                 std::mt19937_64& rng) {
  CollectedEpisode ep;
  noise_reset(noise);
  Observation obs = env.reset();
  while (!env.done()) {
    const ActionVector a = explore(actor, obs, noise, rng);
    const StepResult res = env.step(a);
    ep.transitions.push_back({obs, a, res.reward, res.observation, is_failure(res.status)});
    ep.cumulative += res.reward;
    obs = res.observation;
  }
  return ep;
}

class Learner {
 public:
  Learner(const TrainConfig& config, TrainerState& state, const TrainOptions& options)
      : config_(config), state_(state), options_(options) {
    for (const LogRow& row : state_.log) history_.push_back(row.cumulative_reward);
    if (!options_.out_dir.empty()) {
      std::filesystem::create_directories(options_.out_dir / "checkpoints");
      log_path_ = options_.out_dir / "train_log.csv";
      write_train_log(log_path_, state_.log);
      log_.open(log_path_, std::ios::app);
      if (!log_) throw IoFailure(fmt::format("cannot append to {}", log_path_.string()));
    }
  }

  void save(const std::string& name, bool with_buffer) {
    if (options_.out_dir.empty()) return;
    save_checkpoint(state_, options_.out_dir / "checkpoints" / name, options_.metadata,
                    with_buffer);
  }

  // One transition into the buffer followed by the per-step update cadence.
  void ingest(const Transition& t) {
    state_.buffer.push(t);
    const auto warmup = static_cast<std::size_t>(config_.warmup_batches) *
                        static_cast<std::size_t>(config_.batch);
    if (state_.buffer.size() < warmup) return;
    const std::vector<Transition> batch =
        state_.buffer.sample(static_cast<std::size_t>(config_.batch));
    Agent& agent = state_.agent;
    try {
      loss_sum_ += critic_update(agent, batch, config_.gamma);
      actor_update(agent, batch);
    } catch (const Diverged&) {
      save("diverged.ckpt", false);
      throw;
    }
    ++loss_count_;
    soft_update(agent.actor_target.params(), agent.actor.params(), config_.tau);
    soft_update(agent.critic_target.params(), agent.critic.params(), config_.tau);
  }

  void finish_episode(double cumulative) {
    LogRow row;
    row.episode = ++state_.episode;
    row.cumulative_reward = cumulative;
    history_.push_back(cumulative);
    row.rolling_mean = rolling_mean(history_, config_.milestones.window);
    row.noise_sigma = state_.noise.sigma;
    row.critic_loss_mean = loss_count_ > 0 ? loss_sum_ / loss_count_ : 0.0;
    loss_sum_ = 0.0;
    loss_count_ = 0;
    state_.noise.sigma *= config_.noise_decay;

    // Milestones are judged once per completed window.
    const int window = config_.milestones.window;
    std::optional<double> best;
    if (!state_.milestones.empty()) best = state_.milestones.back().rolling_mean;
    const bool milestone =
        row.episode % window == 0 && milestone_check(history_, config_.milestones, best);
    row.milestone_flag = milestone ? 1 : 0;
    state_.log.push_back(row);
    if (milestone) {
      MilestoneRecord rec;
      rec.index = static_cast<int>(state_.milestones.size()) + 1;
      rec.episode = row.episode;
      rec.rolling_mean = row.rolling_mean;
      rec.checkpoint = fmt::format("m{}_{}.ckpt", rec.index, rec.episode);
      state_.milestones.push_back(rec);
      save(rec.checkpoint, false);
    }
    if (log_.is_open()) {
      log_ << format_row(row);
      log_.flush();
      if (!log_) throw IoFailure(fmt::format("write to {} failed", log_path_.string()));
    }
    if (options_.on_episode) options_.on_episode(row);
  }

 private:
  const TrainConfig& config_;
  TrainerState& state_;
  const TrainOptions& options_;
  std::vector<double> history_;
  std::filesystem::path log_path_;
  std::ofstream log_;
  double loss_sum_ = 0.0;
  int loss_count_ = 0;
};

void train_sequential(const PlantModel& model, const EpisodeConfig& episode,
                      const TrainConfig& config, TrainerState& state, Learner& learner) {
  EyeEnv env(model, episode, 0);
  env.rng() = state.env_rng;
  while (state.episode < config.episodes) {
    noise_reset(state.noise);
    Observation obs = env.reset();
    double cumulative = 0.0;
    while (!env.done()) {
      const ActionVector a = explore(state.agent.actor, obs, state.noise, state.noise_rng);
      const StepResult res = env.step(a);
      cumulative += res.reward;
      learner.ingest({obs, a, res.reward, res.observation, is_failure(res.status)});
      obs = res.observation;
    }
    state.env_rng = env.rng();
    learner.finish_episode(cumulative);
  }
  state.env_rng = env.rng();
}

void train_parallel(const PlantModel& model, const EpisodeConfig& episode,
                    const TrainConfig& config, TrainerState& state, Learner& learner,
                    int workers) {
  while (state.episode < config.episodes) {
    const int n = std::min(workers, config.episodes - state.episode);
    const Actor snapshot = state.agent.actor;
    std::vector<EyeEnv> envs;
    std::vector<std::mt19937_64> rngs;
    std::vector<OuNoise> noises;
    double sigma = state.noise.sigma;
    for (int w = 0; w < n; ++w) {
      envs.emplace_back(model, episode, state.env_rng());
      rngs.emplace_back(state.noise_rng());
      OuNoise noise = state.noise;
      noise.sigma = sigma;
      noises.push_back(noise);
      sigma *= config.noise_decay;
    }
    std::vector<CollectedEpisode> collected(static_cast<std::size_t>(n));
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) {
      const auto i = static_cast<std::size_t>(w);
      threads.emplace_back([&, i] {
        try {
          collected[i] = collect_episode(snapshot, envs[i], noises[i], rngs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (std::thread& t : threads) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (const CollectedEpisode& ep : collected) {
      for (const Transition& t : ep.transitions) learner.ingest(t);
      learner.finish_episode(ep.cumulative);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* why) {
    if (!ok) throw ValidationError(key, why);
  };
  require(episodes >= 0, "episodes", "must be >= 0");
  require(batch > 0, "batch", "must be > 0");
  require(std::isfinite(lr_actor) && lr_actor > 0.0, "lr_actor", "must be > 0");
  require(std::isfinite(lr_critic) && lr_critic > 0.0, "lr_critic", "must be > 0");
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must lie in (0, 1)");
  require(tau > 0.0 && tau <= 1.0, "tau", "must lie in (0, 1]");
  require(std::isfinite(noise_theta) && noise_theta >= 0.0, "noise_theta", "must be >= 0");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
  require(std::isfinite(noise_dt) && noise_dt > 0.0, "noise_dt", "must be > 0");
  require(noise_decay > 0.0 && noise_decay <= 1.0, "noise_decay", "must lie in (0, 1]");
  require(buffer_capacity >= static_cast<std::size_t>(std::max(batch, 1)), "buffer_capacity",
          "must hold at least one batch");
  require(warmup_batches >= 1, "warmup_batches", "must be >= 1");
  require(!hidden.empty(), "hidden", "needs at least one layer");
  for (int h : hidden) require(h > 0, "hidden", "sizes must be > 0");
  require(milestones.window > 0, "milestone_window", "must be > 0");
  require(milestones.relative_margin >= 0.0, "milestone_relative_margin", "must be >= 0");
  require(milestones.min_margin >= 0.0, "milestone_min_margin", "must be >= 0");
}

TrainerState init_trainer(const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 net_rng(derive_seed(seed, seed_stream::kNetworks));
  TrainerState state{
      make_agent(config.hidden, config.lr_actor, config.lr_critic, net_rng),
      ReplayBuffer(config.buffer_capacity, derive_seed(seed, seed_stream::kReplay)),
      OuNoise{},
      std::mt19937_64(derive_seed(seed, seed_stream::kNoise)),
      std::mt19937_64(derive_seed(seed, seed_stream::kEnv)),
      0,
      {},
      {}};
  state.noise.theta = config.noise_theta;
  state.noise.sigma = config.noise_sigma;
  state.noise.dt = config.noise_dt;
  return state;
}

void train(const PlantModel& model, const EpisodeConfig& episode, const TrainConfig& config,
           TrainerState& state, const TrainOptions& options) {
  config.validate();
  if (options.workers < 1) throw ValidationError("workers", "must be >= 1");
  Learner learner(config, state, options);
  if (state.episode == 0) learner.save("initial.ckpt", false);
  if (options.workers == 1) {
    train_sequential(model, episode, config, state, learner);
  } else {
    train_parallel(model, episode, config, state, learner, options.workers);
  }
  learner.save("final.ckpt", true);
}

void write_train_log(const std::filesystem::path& path, const std::vector<LogRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoFailure(fmt::format("cannot open {} for writing", path.string()));
  out << kLogHeader << '\n';
  for (const LogRow& r : rows) out << format_row(r);
  if (!out) throw IoFailure(fmt::format("write to {} failed", path.string()));
}

std::vector<LogRow> read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure(fmt::format("cannot open {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != kLogHeader) {
    throw IoFailure(fmt::format("{} is not a training log", path.string()));
  }
  std::vector<LogRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    LogRow r;
    if (!(is >> r.episode >> r.cumulative_reward >> r.rolling_mean >> r.milestone_flag >>
          r.noise_sigma >> r.critic_loss_mean)) {
      throw IoFailure(fmt::format("malformed row in {}: {}", path.string(), line));
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace oculorl
