#include "oculorl/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <yaml-cpp/yaml.h>

#include "oculorl/error.hpp"

namespace oculorl {

namespace {

using Keys = std::initializer_list<std::string_view>;

std::string join_key(const std::string& prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : prefix + "." + std::string(key);
}

std::string where(const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  return m.line >= 0 ? fmt::format(" (line {})", m.line + 1) : std::string();
}

// Rejects anything but a mapping (or an absent/empty section) and unknown keys.
void check_keys(const YAML::Node& node, const std::string& prefix, Keys allowed) {
  if (!node || node.IsNull()) return;
  if (!node.IsMap()) {
    throw ValidationError(prefix.empty() ? "<root>" : prefix, "expected a mapping" + where(node));
  }
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    bool known = false;
    for (std::string_view a : allowed) known = known || a == key;
    if (!known) throw ValidationError(join_key(prefix, key), "unknown key" + where(kv.first));
  }
}

template <typename T>
constexpr std::string_view type_name() {
  if constexpr (std::is_same_v<T, double>) return "a number";
  if constexpr (std::is_same_v<T, std::string>) return "a string";
  return "an integer";
}

template <typename T>
void read(const YAML::Node& section, std::string_view key, const std::string& prefix, T& out) {
  if (!section || section.IsNull()) return;
  const YAML::Node v = section[std::string(key)];
  if (!v) return;
  try {
    if (!v.IsScalar()) throw YAML::BadConversion(v.Mark());
    out = v.as<T>();
  } catch (const YAML::BadConversion&) {
    throw ValidationError(join_key(prefix, key),
                          fmt::format("expected {}{}", type_name<T>(), where(v)));
  }
}

template <std::size_t N>
void read_array(const YAML::Node& section, std::string_view key, const std::string& prefix,
                std::array<double, N>& out) {
  if (!section || section.IsNull()) return;
  const YAML::Node v = section[std::string(key)];
  if (!v) return;
  const std::string name = join_key(prefix, key);
  if (!v.IsSequence() || v.size() != N) {
    throw ValidationError(name, fmt::format("expected a list of {} numbers{}", N, where(v)));
  }
  for (std::size_t i = 0; i < N; ++i) {
    try {
      out[i] = v[i].as<double>();
    } catch (const YAML::BadConversion&) {
      throw ValidationError(name, fmt::format("expected a list of {} numbers{}", N, where(v)));
    }
  }
}

void read_vec3(const YAML::Node& section, std::string_view key, const std::string& prefix,
               Vec3& out) {
  std::array<double, 3> a{out.x, out.y, out.z};
  read_array(section, key, prefix, a);
  out = {a[0], a[1], a[2]};
}

void read_int_list(const YAML::Node& section, std::string_view key, const std::string& prefix,
                   std::vector<int>& out) {
  if (!section || section.IsNull()) return;
  const YAML::Node v = section[std::string(key)];
  if (!v) return;
  const std::string name = join_key(prefix, key);
  if (!v.IsSequence()) throw ValidationError(name, "expected a list of integers" + where(v));
  out.clear();
  for (const auto& item : v) {
    try {
      out.push_back(item.as<int>());
    } catch (const YAML::BadConversion&) {
      throw ValidationError(name, "expected a list of integers" + where(v));
    }
  }
}

// Re-raises a validation error from a nested validate() under `prefix`.
template <typename F>
void validate_under(const std::string& prefix, F&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    const std::string why = what.substr(std::min(what.size(), e.key().size() + 2));
    throw ValidationError(join_key(prefix, e.key()), why);
  }
}

void read_plant(const YAML::Node& n, PlantParams& p) {
  const std::string s = "plant";
  check_keys(n, s, {"inertia", "k_p", "c_p", "substeps", "globe_radius", "eye_centers",
                    "omega_limit"});
  read(n, "inertia", s, p.inertia);
  read(n, "k_p", s, p.k_p);
  read(n, "c_p", s, p.c_p);
  read(n, "substeps", s, p.substeps);
  read(n, "globe_radius", s, p.globe_radius);
  if (n && n.IsMap() && n["eye_centers"]) {
    const YAML::Node c = n["eye_centers"];
    if (!c.IsMap()) throw ValidationError("plant.eye_centers", "expected right and left" + where(c));
    check_keys(c, "plant.eye_centers", {"right", "left"});
    read_vec3(c, "right", "plant.eye_centers", p.right_center);
    read_vec3(c, "left", "plant.eye_centers", p.left_center);
  }
  read(n, "omega_limit", s, p.omega_limit);
}

void read_muscles(const YAML::Node& n, PlantModel& model) {
  std::vector<std::string> slots;
  for (const MuscleParams& m : model.muscles) slots.push_back(m.name);
  if (n && !n.IsNull()) {
    if (!n.IsMap()) throw ValidationError("muscles", "expected a mapping" + where(n));
    for (const auto& kv : n) {
      const std::string key = kv.first.as<std::string>();
      if (std::find(slots.begin(), slots.end(), key) == slots.end()) {
        throw ValidationError("muscles." + key, "unknown muscle" + where(kv.first));
      }
    }
  }
  for (MuscleParams& m : model.muscles) {
    const std::string s = "muscles." + m.name;
    const YAML::Node mn = n && n.IsMap() ? n[m.name] : YAML::Node();
    check_keys(mn, s, {"origin", "insertion_dir", "f_max", "l_opt", "l_slack", "v_max",
                       "tau_act", "tau_deact"});
    read_vec3(mn, "origin", s, m.origin);
    read_vec3(mn, "insertion_dir", s, m.insertion_dir);
    read(mn, "f_max", s, m.f_max);
    read(mn, "l_opt", s, m.l_opt);
    read(mn, "l_slack", s, m.l_slack);
    read(mn, "v_max", s, m.v_max);
    read(mn, "tau_act", s, m.tau_act);
    read(mn, "tau_deact", s, m.tau_deact);
    // Directions are normalized on load; unit vectors pass through untouched
    // so a resolved config reloads bit-exactly.
    const double len = norm(m.insertion_dir);
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw ValidationError(s + ".insertion_dir", "must be a non-zero finite vector");
    }
    if (std::abs(len - 1.0) > 1e-12) m.insertion_dir = m.insertion_dir / len;
  }
}

void read_episode(const YAML::Node& n, EpisodeConfig& e) {
  const std::string s = "episode";
  check_keys(n, s, {"target_base", "dy_range", "dz_range", "steps", "dt", "weights",
                    "failure_reward", "initial_jitter"});
  read_vec3(n, "target_base", s, e.target_base);
  read_array(n, "dy_range", s, e.dy_range);
  read_array(n, "dz_range", s, e.dz_range);
  read(n, "steps", s, e.steps);
  read(n, "dt", s, e.dt);
  read_array(n, "weights", s, e.weights);
  read(n, "failure_reward", s, e.failure_reward);
  read(n, "initial_jitter", s, e.initial_jitter);
}

void read_train(const YAML::Node& n, TrainConfig& t) {
  const std::string s = "train";
  check_keys(n, s, {"episodes", "batch", "lr_actor", "lr_critic", "gamma", "tau",
                    "noise_theta", "noise_sigma", "noise_dt", "noise_decay", "buffer_capacity",
                    "warmup_batches", "hidden", "milestone_window", "milestone_relative_margin",
                    "milestone_min_margin"});
  read(n, "episodes", s, t.episodes);
  read(n, "batch", s, t.batch);
  read(n, "lr_actor", s, t.lr_actor);
  read(n, "lr_critic", s, t.lr_critic);
  read(n, "gamma", s, t.gamma);
  read(n, "tau", s, t.tau);
  read(n, "noise_theta", s, t.noise_theta);
  read(n, "noise_sigma", s, t.noise_sigma);
  read(n, "noise_dt", s, t.noise_dt);
  read(n, "noise_decay", s, t.noise_decay);
  read(n, "buffer_capacity", s, t.buffer_capacity);
  read(n, "warmup_batches", s, t.warmup_batches);
  read_int_list(n, "hidden", s, t.hidden);
  read(n, "milestone_window", s, t.milestones.window);
  read(n, "milestone_relative_margin", s, t.milestones.relative_margin);
  read(n, "milestone_min_margin", s, t.milestones.min_margin);
}

void read_eval(const YAML::Node& n, EvalConfig& e) {
  const std::string s = "eval";
  check_keys(n, s, {"phase1_episodes", "grid_episodes", "grid_spacing", "warmup_drop",
                    "grid_jitter"});
  read(n, "phase1_episodes", s, e.phase1_episodes);
  read(n, "grid_episodes", s, e.grid_episodes);
  read(n, "grid_spacing", s, e.grid_spacing);
  read(n, "warmup_drop", s, e.warmup_drop);
  read(n, "grid_jitter", s, e.grid_jitter);
}

std::string quoted(const std::string& s) {
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') q += '\\';
    q += ch;
  }
  return q + "\"";
}

std::string num(double v) { return fmt::format("{}", v); }

std::string vec(const Vec3& v) { return fmt::format("[{}, {}, {}]", num(v.x), num(v.y), num(v.z)); }

template <std::size_t N>
std::string arr(const std::array<double, N>& a) {
  return fmt::format("[{}]", fmt::join(a, ", "));
}

}  // namespace

void EvalConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* why) {
    if (!ok) throw ValidationError(key, why);
  };
  require(phase1_episodes > 0, "phase1_episodes", "must be > 0");
  require(grid_episodes > 0, "grid_episodes", "must be > 0");
  require(std::isfinite(grid_spacing) && grid_spacing >= 0.0, "grid_spacing", "must be >= 0");
  require(warmup_drop >= 0, "warmup_drop", "must be >= 0");
  require(std::isfinite(grid_jitter) && grid_jitter >= 0.0, "grid_jitter", "must be >= 0");
}

void RunConfig::validate() const {
  if (output_dir.empty()) throw ValidationError("output_dir", "must not be empty");
  validate_under("plant", [&] { model.params.validate(); });
  for (const MuscleParams& m : model.muscles) {
    validate_under("muscles." + m.name, [&] { m.validate(); });
  }
  validate_under("episode", [&] { episode.validate(); });
  validate_under("train", [&] { train.validate(); });
  validate_under("eval", [&] { eval.validate(); });
  if (eval.warmup_drop >= episode.steps) {
    throw ValidationError("eval.warmup_drop", "must be smaller than episode.steps");
  }
}

RunConfig parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, static_cast<std::size_t>(e.mark.line + 1));
  }
  RunConfig c;
  check_keys(root, "", {"seed", "output_dir", "plant", "muscles", "episode", "train", "eval"});
  read(root, "seed", "", c.seed);
  read(root, "output_dir", "", c.output_dir);
  if (root && root.IsMap()) {
    read_plant(root["plant"], c.model.params);
    read_muscles(root["muscles"], c.model);
    read_episode(root["episode"], c.episode);
    read_train(root["train"], c.train);
    read_eval(root["eval"], c.eval);
  }
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure(fmt::format("cannot open config {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string dump_config(const RunConfig& c) {
  std::string out;
  auto line = [&out](std::string_view s) {
    out += s;
    out += '\n';
  };
  line(fmt::format("seed: {}", c.seed));
  line(fmt::format("output_dir: {}", quoted(c.output_dir)));

  const PlantParams& p = c.model.params;
  line("plant:");
  line(fmt::format("  inertia: {}", num(p.inertia)));
  line(fmt::format("  k_p: {}", num(p.k_p)));
  line(fmt::format("  c_p: {}", num(p.c_p)));
  line(fmt::format("  substeps: {}", p.substeps));
  line(fmt::format("  globe_radius: {}", num(p.globe_radius)));
  line("  eye_centers:");
  line(fmt::format("    right: {}", vec(p.right_center)));
  line(fmt::format("    left: {}", vec(p.left_center)));
  line(fmt::format("  omega_limit: {}", num(p.omega_limit)));

  line("muscles:");
  for (const MuscleParams& m : c.model.muscles) {
    line(fmt::format("  {}:", m.name));
    line(fmt::format("    origin: {}", vec(m.origin)));
    line(fmt::format("    insertion_dir: {}", vec(m.insertion_dir)));
    line(fmt::format("    f_max: {}", num(m.f_max)));
    line(fmt::format("    l_opt: {}", num(m.l_opt)));
    line(fmt::format("    l_slack: {}", num(m.l_slack)));
    line(fmt::format("    v_max: {}", num(m.v_max)));
    line(fmt::format("    tau_act: {}", num(m.tau_act)));
    line(fmt::format("    tau_deact: {}", num(m.tau_deact)));
  }

  const EpisodeConfig& e = c.episode;
  line("episode:");
  line(fmt::format("  target_base: {}", vec(e.target_base)));
  line(fmt::format("  dy_range: {}", arr(e.dy_range)));
  line(fmt::format("  dz_range: {}", arr(e.dz_range)));
  line(fmt::format("  steps: {}", e.steps));
  line(fmt::format("  dt: {}", num(e.dt)));
  line(fmt::format("  weights: {}", arr(e.weights)));
  line(fmt::format("  failure_reward: {}", num(e.failure_reward)));
  line(fmt::format("  initial_jitter: {}", num(e.initial_jitter)));

  const TrainConfig& t = c.train;
  line("train:");
  line(fmt::format("  episodes: {}", t.episodes));
  line(fmt::format("  batch: {}", t.batch));
  line(fmt::format("  lr_actor: {}", num(t.lr_actor)));
  line(fmt::format("  lr_critic: {}", num(t.lr_critic)));
  line(fmt::format("  gamma: {}", num(t.gamma)));
  line(fmt::format("  tau: {}", num(t.tau)));
  line(fmt::format("  noise_theta: {}", num(t.noise_theta)));
  line(fmt::format("  noise_sigma: {}", num(t.noise_sigma)));
  line(fmt::format("  noise_dt: {}", num(t.noise_dt)));
  line(fmt::format("  noise_decay: {}", num(t.noise_decay)));
  line(fmt::format("  buffer_capacity: {}", t.buffer_capacity));
  line(fmt::format("  warmup_batches: {}", t.warmup_batches));
  line(fmt::format("  hidden: [{}]", fmt::join(t.hidden, ", ")));
  line(fmt::format("  milestone_window: {}", t.milestones.window));
  line(fmt::format("  milestone_relative_margin: {}", num(t.milestones.relative_margin)));
  line(fmt::format("  milestone_min_margin: {}", num(t.milestones.min_margin)));

  const EvalConfig& v = c.eval;
  line("eval:");
  line(fmt::format("  phase1_episodes: {}", v.phase1_episodes));
  line(fmt::format("  grid_episodes: {}", v.grid_episodes));
  line(fmt::format("  grid_spacing: {}", num(v.grid_spacing)));
  line(fmt::format("  warmup_drop: {}", v.warmup_drop));
  line(fmt::format("  grid_jitter: {}", num(v.grid_jitter)));
  return out;
}

}  // namespace oculorl
