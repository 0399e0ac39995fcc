#include "oculorl/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "oculorl/ddpg.hpp"
#include "oculorl/error.hpp"
#include "svgplot.hpp"

namespace oculorl {

namespace {

constexpr double kCm = 100.0;
constexpr std::uint64_t kPointStreamBase = 1000;

EyeStats describe(std::vector<double> samples_cm) {
  // Sorted accumulation keeps the result independent of episode order.
  std::sort(samples_cm.begin(), samples_cm.end());
  EyeStats s;
  double sum = 0.0;
  for (double v : samples_cm) sum += v;
  const double n = static_cast<double>(samples_cm.size());
  s.mean = sum / n;
  s.min = samples_cm.front();
  s.max = samples_cm.back();
  double sq = 0.0;
  for (double v : samples_cm) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / n);
  // Guard the ordering invariant against rounding of the mean.
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

void collect(const PointResult& p, int drop, std::vector<double>& r, std::vector<double>& l) {
  const auto d = static_cast<std::size_t>(std::max(drop, 0));
  for (const EpisodeTrace& ep : p.episodes) {
    for (std::size_t i = d; i < ep.dist_r.size(); ++i) r.push_back(ep.dist_r[i] * kCm);
    for (std::size_t i = d; i < ep.dist_l.size(); ++i) l.push_back(ep.dist_l[i] * kCm);
  }
}

EpisodeTrace run_episode(const Policy& policy, EyeEnv& env, std::mt19937_64& rng,
                         std::optional<Displacement> d) {
  EpisodeTrace t;
  Observation obs = env.reset(d);
  while (!env.done()) {
    const StepResult res = env.step(policy(obs, rng));
    t.dist_r.push_back(res.terms.dist_ro);
    t.dist_l.push_back(res.terms.dist_lo);
    t.reward.push_back(res.reward);
    ActionVector a{};
    std::copy_n(res.observation.begin() + obs_layout::kActivations, kActionSize, a.begin());
    t.activation.push_back(a);
    obs = res.observation;
  }
  return t;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

double zero_clean(double v) { return v == 0.0 ? 0.0 : v; }

std::string fmt_cm(double v) { return fmt::format("{:.4f}", zero_clean(v)); }

std::string stats_line(const std::string& dy, const std::string& dz, const StatsRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{}\n", dy, dz, fmt_cm(r.right.mean),
                     fmt_cm(r.left.mean), fmt_cm(r.right.max), fmt_cm(r.left.max),
                     fmt_cm(r.right.min), fmt_cm(r.left.min), fmt_cm(r.right.std),
                     fmt_cm(r.left.std));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  out.close();
  if (!out) throw IoFailure(fmt::format("write to {} failed", path.string()));
}

void make_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoFailure(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(c < r.size() ? r[c] : 0.0);
    return out;
  }
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure(fmt::format("cannot open {}", path.string()));
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoFailure(fmt::format("{} is empty", path.string()));
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<double> row;
    for (std::string cell; std::getline(ls, cell, ',');) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoFailure(fmt::format("non-numeric cell '{}' in {}", cell, path.string()));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

svg::Plot distance_plot(const std::string& name, const Table& t) {
  svg::Plot p{fmt::format("POG distance to target, {}", name), "step", "distance (cm)", {}};
  const std::vector<double> steps = t.column(0);
  for (const auto& [label, c] : {std::pair{"right", 1}, std::pair{"left", 3}}) {
    svg::Series s{label, steps, t.column(static_cast<std::size_t>(c)), {}, {}};
    const std::vector<double> sd = t.column(static_cast<std::size_t>(c) + 1);
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      s.lo.push_back(s.y[i] - sd[i]);
      s.hi.push_back(s.y[i] + sd[i]);
    }
    p.series.push_back(std::move(s));
  }
  return p;
}

svg::Plot activation_plot(const std::string& name, const Table& t) {
  svg::Plot p{fmt::format("Muscle activations, {}", name), "step", "activation", {}};
  const std::vector<double> steps = t.column(0);
  for (int m = 0; m < kMuscleCount; ++m) {
    const auto c = static_cast<std::size_t>(1 + 2 * m);
    std::string label = c < t.header.size() ? t.header[c] : fmt::format("muscle {}", m);
    if (label.size() > 5 && label.ends_with("_mean")) label.resize(label.size() - 5);
    svg::Series s{label, steps, t.column(c), {}, {}};
    const std::vector<double> sd = t.column(c + 1);
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      s.lo.push_back(s.y[i] - sd[i]);
      s.hi.push_back(s.y[i] + sd[i]);
    }
    p.series.push_back(std::move(s));
  }
  return p;
}

svg::Plot milestone_plot(const Table& t) {
  svg::Plot p{"Cumulative reward per milestone", "milestone", "cumulative reward", {}};
  const std::vector<double> idx = t.column(0);
  svg::Series eval{"greedy evaluation", idx, t.column(3), {}, {}};
  const std::vector<double> sd = t.column(4);
  for (std::size_t i = 0; i < eval.y.size(); ++i) {
    eval.lo.push_back(eval.y[i] - sd[i]);
    eval.hi.push_back(eval.y[i] + sd[i]);
  }
  p.series.push_back(std::move(eval));
  p.series.push_back({"training rolling mean", idx, t.column(2), {}, {}});
  return p;
}

std::string milestone_csv(std::span<const MilestoneSummary> milestones) {
  std::string out = "index,episode,train_rolling_mean,eval_mean_cumulative,eval_std_cumulative\n";
  for (const MilestoneSummary& m : milestones) {
    out += fmt::format("{},{},{:.6f},{:.6f},{:.6f}\n", m.index, m.episode, zero_clean(m.train_mean),
                       zero_clean(m.eval_mean), zero_clean(m.eval_std));
  }
  return out;
}

}  // namespace

Policy greedy_policy(const Actor& actor) {
  return [&actor](const Observation& obs, std::mt19937_64&) { return actor.act(obs); };
}

Policy random_policy() {
  return [](const Observation&, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ActionVector a{};
    for (double& v : a) v = u(rng);
    return a;
  };
}

GridSpec GridSpec::standard(double spacing, int episodes, int steps, int warmup_drop) {
  GridSpec g;
  for (double dy : {-spacing, 0.0, spacing}) {
    for (double dz : {-spacing, 0.0, spacing}) g.points.push_back({dy, dz});
  }
  g.episodes_per_point = episodes;
  g.steps = steps;
  g.warmup_drop = warmup_drop;
  return g;
}

void GridSpec::validate() const {
  if (points.empty()) throw ValidationError("grid.points", "must not be empty");
  if (episodes_per_point <= 0) throw ValidationError("grid.episodes_per_point", "must be > 0");
  if (steps <= 0) throw ValidationError("grid.steps", "must be > 0");
  if (warmup_drop < 0 || warmup_drop >= steps) {
    throw ValidationError("grid.warmup_drop", "must lie in [0, steps)");
  }
}

FixationStats aggregate_stats(std::span<const PointResult> points, int warmup_drop) {
  if (points.empty()) throw EmptyAfterDrop("no grid points to aggregate");
  FixationStats stats;
  std::vector<double> all_r;
  std::vector<double> all_l;
  for (const PointResult& p : points) {
    std::vector<double> r;
    std::vector<double> l;
    collect(p, warmup_drop, r, l);
    if (r.empty() || l.empty()) {
      throw EmptyAfterDrop(fmt::format("point ({}, {}) keeps no samples after dropping {} steps",
                                       p.displacement.dy, p.displacement.dz, warmup_drop));
    }
    all_r.insert(all_r.end(), r.begin(), r.end());
    all_l.insert(all_l.end(), l.begin(), l.end());
    stats.points.push_back(
        {p.displacement.dy, p.displacement.dz, describe(std::move(r)), describe(std::move(l))});
  }
  stats.overall = {0.0, 0.0, describe(std::move(all_r)), describe(std::move(all_l))};
  return stats;
}

double deviation_angle(double distance_m, double depth_m) {
  return std::atan(distance_m / depth_m) * 180.0 / std::numbers::pi;
}

Phase2Result run_phase2(const Policy& policy, const PlantModel& model, const EpisodeConfig& base,
                        const GridSpec& grid, std::uint64_t seed, int workers) {
  grid.validate();
  EpisodeConfig config = base;
  config.steps = grid.steps;

  Phase2Result result;
  result.points.resize(grid.points.size());
  auto run_point = [&](std::size_t i) {
    const std::uint64_t stream = derive_seed(seed, kPointStreamBase + i);
    EyeEnv env(model, config, stream);
    std::mt19937_64 policy_rng(derive_seed(stream, 1));
    PointResult& pr = result.points[i];
    pr.displacement = grid.points[i];
    for (int e = 0; e < grid.episodes_per_point; ++e) {
      pr.episodes.push_back(run_episode(policy, env, policy_rng, grid.points[i]));
    }
  };

  const std::size_t n = grid.points.size();
  const auto threads_wanted = static_cast<std::size_t>(std::max(workers, 1));
  if (threads_wanted == 1) {
    for (std::size_t i = 0; i < n; ++i) run_point(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(threads_wanted, n); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            run_point(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  result.stats = aggregate_stats(result.points, grid.warmup_drop);
  return result;
}

double overall_mean_distance(const FixationStats& stats) {
  return 0.5 * (stats.overall.right.mean + stats.overall.left.mean) / kCm;
}

std::vector<Phase1Curve> run_phase1(std::span<const MilestonePolicy> policies,
                                    const PlantModel& model, const EpisodeConfig& config,
                                    int episodes, std::uint64_t seed) {
  if (policies.empty()) throw CheckpointUnreadable("phase 1 needs at least one checkpoint");
  if (episodes <= 0) throw ValidationError("phase1_episodes", "must be > 0");
  std::vector<Phase1Curve> curves;
  for (const MilestonePolicy& mp : policies) {
    EyeEnv env(model, config, derive_seed(seed, seed_stream::kEval));
    std::mt19937_64 unused(0);
    const Policy policy = greedy_policy(mp.actor);
    Phase1Curve c;
    c.index = mp.index;
    c.episode = mp.episode;
    c.train_mean = mp.train_mean;
    for (int e = 0; e < episodes; ++e) {
      EpisodeTrace t = run_episode(policy, env, unused, std::nullopt);
      double sum = 0.0;
      for (double r : t.reward) sum += r;
      c.cumulative.push_back(sum);
      c.rewards.push_back(std::move(t.reward));
    }
    std::tie(c.mean_cumulative, c.std_cumulative) = mean_std(c.cumulative);
    curves.push_back(std::move(c));
  }
  return curves;
}

PointSeries summarize_point(const PointResult& point) {
  PointSeries s;
  s.displacement = point.displacement;
  std::size_t steps = 0;
  for (const EpisodeTrace& ep : point.episodes) steps = std::max(steps, ep.dist_r.size());
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<double> r;
    std::vector<double> l;
    std::array<std::vector<double>, kActionSize> act;
    for (const EpisodeTrace& ep : point.episodes) {
      if (k >= ep.dist_r.size()) continue;
      r.push_back(ep.dist_r[k]);
      l.push_back(ep.dist_l[k]);
      for (std::size_t m = 0; m < act.size(); ++m) act[m].push_back(ep.activation[k][m]);
    }
    const auto [rm, rs] = mean_std(r);
    const auto [lm, ls] = mean_std(l);
    s.r_mean.push_back(rm);
    s.r_std.push_back(rs);
    s.l_mean.push_back(lm);
    s.l_std.push_back(ls);
    ActionVector am{};
    ActionVector as{};
    for (std::size_t m = 0; m < act.size(); ++m) std::tie(am[m], as[m]) = mean_std(act[m]);
    s.act_mean.push_back(am);
    s.act_std.push_back(as);
  }
  return s;
}

std::vector<MilestoneSummary> summarize_phase1(std::span<const Phase1Curve> curves) {
  std::vector<MilestoneSummary> out;
  for (const Phase1Curve& c : curves) {
    out.push_back({c.index, c.episode, c.train_mean, c.mean_cumulative, c.std_cumulative});
  }
  return out;
}

std::string point_dir_name(const Displacement& d) {
  return fmt::format("point_{:.2f}_{:.2f}", zero_clean(d.dy) + 0.0, zero_clean(d.dz) + 0.0);
}

void emit_milestone_report(const std::filesystem::path& out_dir,
                           std::span<const MilestoneSummary> milestones) {
  const std::filesystem::path report = out_dir / "report";
  make_dirs(report);
  write_text(report / "milestones.csv", milestone_csv(milestones));
  write_text(report / "milestones.svg",
             svg::render(milestone_plot(read_table(report / "milestones.csv"))));
}

void emit_report(const std::filesystem::path& out_dir, const FixationStats& stats,
                 std::span<const PointSeries> series, std::span<const MilestoneSummary> milestones) {
  const std::filesystem::path report = out_dir / "report";
  make_dirs(report);

  std::string table = std::string(kStatsHeader) + "\n";
  for (const StatsRow& r : stats.points) {
    table += stats_line(fmt::format("{:g}", zero_clean(r.dy)), fmt::format("{:g}", zero_clean(r.dz)), r);
  }
  write_text(report / "stats.csv", table);
  write_text(report / "overall.csv",
             std::string(kStatsHeader) + "\n" + stats_line("overall", "overall", stats.overall));

  for (const PointSeries& s : series) {
    const std::string name = point_dir_name(s.displacement);
    const std::filesystem::path dir = report / name;
    make_dirs(dir);
    std::string dist = "step,r_mean_cm,r_std_cm,l_mean_cm,l_std_cm\n";
    for (std::size_t k = 0; k < s.r_mean.size(); ++k) {
      dist += fmt::format("{},{},{},{},{}\n", k + 1, fmt_cm(s.r_mean[k] * kCm),
                          fmt_cm(s.r_std[k] * kCm), fmt_cm(s.l_mean[k] * kCm),
                          fmt_cm(s.l_std[k] * kCm));
    }
    write_text(dir / "distances.csv", dist);

    std::string act = "step";
    for (int m = 0; m < kMuscleCount; ++m) {
      const std::string slot = muscle_slot_name(m < kMusclesPerEye ? Eye::Right : Eye::Left,
                                                static_cast<MuscleKind>(m % kMusclesPerEye));
      act += fmt::format(",{0}_mean,{0}_std", slot);
    }
    act += '\n';
    for (std::size_t k = 0; k < s.act_mean.size(); ++k) {
      act += fmt::format("{}", k + 1);
      for (std::size_t m = 0; m < kActionSize; ++m) {
        act += fmt::format(",{:.6f},{:.6f}", zero_clean(s.act_mean[k][m]),
                           zero_clean(s.act_std[k][m]));
      }
      act += '\n';
    }
    write_text(dir / "activations.csv", act);
    write_text(dir / "distances.svg", svg::render(distance_plot(name, read_table(dir / "distances.csv"))));
    write_text(dir / "activations.svg",
               svg::render(activation_plot(name, read_table(dir / "activations.csv"))));
  }

  if (!milestones.empty()) emit_milestone_report(out_dir, milestones);
}

int regenerate_plots(const std::filesystem::path& report_dir) {
  if (!std::filesystem::is_directory(report_dir)) {
    throw IoFailure(fmt::format("{} is not a report directory", report_dir.string()));
  }
  int written = 0;
  if (std::filesystem::exists(report_dir / "milestones.csv")) {
    write_text(report_dir / "milestones.svg",
               svg::render(milestone_plot(read_table(report_dir / "milestones.csv"))));
    ++written;
  }
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(report_dir)) {
    if (entry.is_directory() && entry.path().filename().string().starts_with("point_")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const std::string name = dir.filename().string();
    if (std::filesystem::exists(dir / "distances.csv")) {
      write_text(dir / "distances.svg", svg::render(distance_plot(name, read_table(dir / "distances.csv"))));
      ++written;
    }
    if (std::filesystem::exists(dir / "activations.csv")) {
      write_text(dir / "activations.svg",
                 svg::render(activation_plot(name, read_table(dir / "activations.csv"))));
      ++written;
    }
  }
  return written;
}

}  // namespace oculorl
