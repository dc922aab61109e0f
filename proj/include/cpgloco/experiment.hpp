#pragma once

// Experiment protocols behind the command-line front end: configuration
// parsing, CSV logs and the run / toggle / delay-sweep / eval / train /
// gen-weights commands.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cpgloco/trainer.hpp"

namespace cpgloco::exp {

enum ExitCode : int { kOk = 0, kIoError = 2, kMissingPrerequisite = 3, kInvalidConfig = 4 };

class CommandError : public std::runtime_error {
 public:
  CommandError(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

inline CommandError config_error(const std::string& m) { return {kInvalidConfig, m}; }
inline CommandError io_error(const std::string& m) { return {kIoError, m}; }
inline CommandError missing(const std::string& m) { return {kMissingPrerequisite, m}; }

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  unsigned threads = 0;  // 0 = hardware concurrency
  bool wall_clock = false;

  std::string terrain = "flat";
  terrain::TerrainSpec terrain_params{};  // kind ignored; filled from `terrain`

  double vx = 0.9, vy = 0.0, wz = 0.0;
  int trials = 1;
  double budget_s = 20.0;

  std::string spinal;
  std::string descending;

  sensors::DelayConfig delays{};
  bool delays_set = false;

  ToggleSchedule toggle{};
  double toggle_budget_s = 15.0;

  std::vector<double> sweep_delays_ms{10.0, 30.0, 170.0, 330.0};
  std::vector<std::string> sweep_terrains{"flat", "uneven", "upstairs", "downstairs", "high_obstacle", "gap"};
  int sweep_trials = 5;

  train::TrainConfig train{};
  std::vector<std::string> curriculum{"flat", "uneven", "upstairs", "downstairs", "high_obstacle", "gap"};
  int checkpoint_every = 10;

  std::string gen_kind = "spinal";
  bool dump_terrain = false;

  unsigned resolved_threads() const { return threads ? threads : train::default_threads(); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw config_error("config: " + key + " expects a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(d)) throw config_error("config: " + key + " expects a number, got '" + v + "'");
  return d;
}

inline long long to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long i = 0;
  try {
    i = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw config_error("config: " + key + " expects an integer, got '" + v + "'");
  }
  if (used != v.size()) throw config_error("config: " + key + " expects an integer, got '" + v + "'");
  return i;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw config_error("config: " + key + " expects a boolean, got '" + v + "'");
}

}  // namespace detail

/// Set one key. Unknown keys and malformed values throw a config error.
inline void set_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string v = trim(value);
  auto num = [&] { return to_double(key, v); };
  auto integer = [&] { return to_int(key, v); };
  auto nonneg = [&](long long i) {
    if (i < 0) throw config_error("config: " + key + " must be >= 0");
    return i;
  };
  auto& tp = c.terrain_params;
  auto& tr = c.train;

  if (key == "seed") c.seed = static_cast<std::uint64_t>(nonneg(integer()));
  else if (key == "out") c.out = v;
  else if (key == "threads") c.threads = static_cast<unsigned>(nonneg(integer()));
  else if (key == "wall_clock") c.wall_clock = to_bool(key, v);
  else if (key == "terrain") c.terrain = v;
  else if (key == "terrain.range") tp.range = num();
  else if (key == "terrain.step_width") tp.step_width = num();
  else if (key == "terrain.step_height") tp.step_height = num();
  else if (key == "terrain.steps") tp.steps = static_cast<int>(integer());
  else if (key == "terrain.height") tp.height = num();
  else if (key == "terrain.length") tp.length = num();
  else if (key == "terrain.gap_width") tp.gap_width = num();
  else if (key == "terrain.start_x") tp.start_x = num();
  else if (key == "terrain.half_width") tp.half_width = num();
  else if (key == "vx") c.vx = num();
  else if (key == "vy") c.vy = num();
  else if (key == "wz") c.wz = num();
  else if (key == "trials") c.trials = static_cast<int>(integer());
  else if (key == "budget_s") c.budget_s = num();
  else if (key == "spinal") c.spinal = v;
  else if (key == "descending") c.descending = v;
  else if (key == "delay.imu_ms") c.delays.imu_ms = num(), c.delays_set = true;
  else if (key == "delay.joints_ms") c.delays.joints_ms = num(), c.delays_set = true;
  else if (key == "delay.vision_ms") c.delays.vision_ms = num(), c.delays_set = true;
  else if (key == "delay.applies_to") {
    const auto a = sensors::parse_applies_to(v);
    if (!a) throw config_error("config: delay.applies_to must be spinal, descending or both");
    c.delays.applies_to = *a;
  } else if (key == "toggle.off_s") c.toggle.off_s = num();
  else if (key == "toggle.on_s") c.toggle.on_s = num();
  else if (key == "toggle.budget_s") c.toggle_budget_s = num();
  else if (key == "sweep.delays_ms") {
    c.sweep_delays_ms.clear();
    for (const auto& s : split_list(v)) c.sweep_delays_ms.push_back(to_double(key, s));
  } else if (key == "sweep.terrains") c.sweep_terrains = split_list(v);
  else if (key == "sweep.trials") c.sweep_trials = static_cast<int>(integer());
  else if (key == "train.phase") tr.phase = static_cast<int>(integer());
  else if (key == "train.iterations") tr.iterations = static_cast<int>(integer());
  else if (key == "train.population") tr.population = static_cast<int>(integer());
  else if (key == "train.sigma") tr.sigma = num();
  else if (key == "train.learning_rate") tr.learning_rate = num();
  else if (key == "train.episode_s") tr.episode_s = num();
  else if (key == "train.cmd_min") tr.cmd_min = num();
  else if (key == "train.cmd_max") tr.cmd_max = num();
  else if (key == "train.rollouts") tr.rollouts_per_candidate = static_cast<int>(integer());
  else if (key == "train.init_scale") tr.init_output_scale = num();
  else if (key == "train.hidden") {
    tr.hidden.clear();
    for (const auto& s : split_list(v)) {
      const long long h = to_int(key, s);
      if (h < 1) throw config_error("config: train.hidden entries must be >= 1");
      tr.hidden.push_back(static_cast<std::size_t>(h));
    }
  } else if (key == "train.curriculum") c.curriculum = split_list(v);
  else if (key == "train.checkpoint_every") c.checkpoint_every = static_cast<int>(integer());
  else if (key == "gen.kind") c.gen_kind = v;
  else if (key == "dump_terrain") c.dump_terrain = to_bool(key, v);
  else throw config_error("config: unknown key '" + key + "'");
}

/// Parse `key = value` lines; `#` starts a comment.
inline void parse_config(ExperimentConfig& c, std::istream& is, const std::string& origin = "config") {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw config_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    try {
      set_key(c, key, t.substr(eq + 1));
    } catch (const CommandError& e) {
      throw config_error(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void load_config_file(ExperimentConfig& c, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open config file: " + path);
  parse_config(c, f, path);
}

/// Terrain spec for a named course, using the configured parameters.
inline terrain::TerrainSpec terrain_for(const ExperimentConfig& c, const std::string& name) {
  const auto kind = terrain::parse_kind(name);
  if (!kind) throw config_error("config: unknown terrain '" + name + "'");
  terrain::TerrainSpec s = c.terrain_params;
  s.kind = *kind;
  try {
    terrain::validate(s);
  } catch (const terrain::InvalidTerrain& e) {
    throw config_error(e.what());
  }
  return s;
}

inline void validate(const ExperimentConfig& c) {
  if (c.trials < 1) throw config_error("config: trials must be >= 1");
  if (c.sweep_trials < 1) throw config_error("config: sweep.trials must be >= 1");
  if (!(c.budget_s > 0.0) || !(c.toggle_budget_s > 0.0)) throw config_error("config: budgets must be positive");
  if (!(c.toggle.off_s >= 0.0) || c.toggle.on_s < c.toggle.off_s)
    throw config_error("config: toggle schedule needs 0 <= off_s <= on_s");
  if (c.checkpoint_every < 0) throw config_error("config: train.checkpoint_every must be >= 0");
  if (c.out.empty()) throw config_error("config: out must not be empty");
  for (double d : c.sweep_delays_ms)
    if (!(d >= 0.0)) throw config_error("config: sweep delays must be >= 0 ms");
  try {
    c.delays.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  terrain_for(c, c.terrain);
  for (const auto& t : c.sweep_terrains) terrain_for(c, t);
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string schema_line(std::string_view kind) {
  return "# schema: cpgloco-" + std::string(kind) + " v" + std::to_string(kSchemaVersion);
}

inline std::vector<std::string> ticklog_columns() {
  std::vector<std::string> cols{"schema_version", "tick", "t_s", "base_x", "base_y", "base_z", "roll", "pitch", "yaw",
                                "vx", "vy", "wz"};
  for (auto leg : kLegNames)
    for (auto f : {"spinal_x", "spinal_z", "xoff", "zoff", "exec_x", "exec_z", "contact"})
      cols.push_back(std::string(leg) + "_" + f);
  for (auto r : reward::TermBreakdown::kColumns) cols.emplace_back(r);
  for (auto k : {"cmd_vx", "cmd_vy", "cmd_wz"}) cols.emplace_back(k);
  return cols;
}

inline void write_ticklog(std::ostream& os, const std::vector<TickLog>& log, const reward::Command& cmd) {
  os << schema_line("ticklog") << '\n';
  const auto cols = ticklog_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& l : log) {
    const auto& s = l.state;
    os << kSchemaVersion << ',' << l.tick << ',' << fmt(l.t);
    for (double v : {s.base_pos.x(), s.base_pos.y(), s.base_pos.z(), s.rpy.x(), s.rpy.y(), s.rpy.z(), s.v_b.x(), s.v_b.y(),
                     s.omega_b.z()})
      os << ',' << fmt(v);
    for (const auto& lt : l.legs) {
      for (double v : {lt.spinal_x, lt.spinal_z, lt.x_off, lt.z_off, lt.exec_x, lt.exec_z}) os << ',' << fmt(v);
      os << ',' << (lt.contact ? 1 : 0);
    }
    for (double v : l.reward.values()) os << ',' << fmt(v);
    os << ',' << fmt(cmd.vx) << ',' << fmt(cmd.vy) << ',' << fmt(cmd.wz);
    os << '\n';
  }
}

inline void write_curve(std::ostream& os, const std::vector<train::IterationRecord>& curve) {
  os << schema_line("curve") << '\n';
  os << "iteration,mean_return,best_return,wall_clock_s\n";
  for (const auto& r : curve)
    os << r.iteration << ',' << fmt(r.mean_return) << ',' << fmt(r.best_return) << ',' << fmt(r.wall_clock_s) << '\n';
}

inline std::filesystem::path ensure_out_dir(const ExperimentConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec || !std::filesystem::is_directory(c.out)) throw io_error("cannot create output directory: " + c.out);
  return c.out;
}

/// Writes a whole file or throws an I/O error naming the path.
template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot write file: " + path.string());
  body(f);
  f.flush();
  if (!f) throw io_error("failed writing file: " + path.string());
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline policy::PolicyWeights load_policy(const std::string& path, std::size_t in, std::size_t out) {
  if (!std::filesystem::exists(path)) throw io_error("weight file not found: " + path);
  try {
    return policy::load_weights(path, in, out);
  } catch (const policy::WeightFileError& e) {
    throw io_error(std::string(e.what()) + " (" + path + ")");
  }
}

inline policy::PolicyWeights require_spinal(const ExperimentConfig& c, std::string_view cmd) {
  if (c.spinal.empty()) throw missing(std::string(cmd) + ": spinal weights required (--spinal)");
  return load_policy(c.spinal, policy::kSpinalObsDim, policy::kSpinalActionDim);
}

inline std::optional<policy::PolicyWeights> optional_descending(const ExperimentConfig& c) {
  if (c.descending.empty()) return std::nullopt;
  return load_policy(c.descending, policy::kDescendingObsDim, policy::kDescendingActionDim);
}

inline std::string trial_name(std::string_view prefix, const std::string& terrain, int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", k);
  return std::string(prefix) + "_" + terrain + "_trial" + buf + ".csv";
}

inline void dump_terrain(const std::filesystem::path& dir, const std::string& name, const terrain::Terrain& t) {
  write_file(dir / ("terrain_" + name + ".txt"), [&](std::ostream& os) { t.write_grid(os); });
}

inline EpisodeOptions episode_options(const ExperimentConfig& c, int trial) {
  EpisodeOptions o;
  o.vx = c.vx;
  o.vy = c.vy;
  o.wz = c.wz;
  o.budget_s = c.budget_s;
  if (c.delays_set) o.delays = c.delays;
  o.start_x = train::kTrialStarts[static_cast<std::size_t>(trial) % train::kTrialStarts.size()].first;
  o.start_y = train::kTrialStarts[static_cast<std::size_t>(trial) % train::kTrialStarts.size()].second;
  o.record = true;
  return o;
}

inline terrain::Terrain trial_terrain(const ExperimentConfig& c, const std::string& name, int trial) {
  terrain::TerrainSpec s = terrain_for(c, name);
  s.seed = train::kEvalSeedBase + c.seed + static_cast<std::uint64_t>(trial);
  return terrain::generate(s);
}

inline void print_status(std::ostream& os, std::string_view label, const EpisodeResult& r) {
  os << label << ": status=" << sim::status_name(r.status.status) << " elapsed_s=" << fmt(r.status.elapsed)
     << " distance_m=" << fmt(r.status.distance) << " return=" << fmt(r.total_return)
     << " vel_err=" << fmt(r.mean_velocity_error) << '\n';
}

}  // namespace detail

inline int cmd_run(const ExperimentConfig& c, std::ostream& out) {
  validate(c);
  ControlStack stack;
  stack.spinal = detail::require_spinal(c, "run");
  stack.descending = detail::optional_descending(c);
  const auto dir = ensure_out_dir(c);
  const reward::Phase phase = stack.descending ? reward::Phase::Descending : reward::Phase::Spinal;

  std::vector<EpisodeResult> results(static_cast<std::size_t>(c.trials));
  std::vector<terrain::Terrain> terrains;
  for (int k = 0; k < c.trials; ++k) terrains.push_back(detail::trial_terrain(c, c.terrain, k));
  train::parallel_for(results.size(), c.resolved_threads(), [&](std::size_t k) {
    EpisodeOptions o = detail::episode_options(c, static_cast<int>(k));
    o.phase = phase;
    results[k] = run_episode(stack, {}, terrains[k], o);
  });
  const reward::Command cmd{c.vx, c.vy, c.wz, 0.0};
  for (int k = 0; k < c.trials; ++k) {
    const auto& r = results[static_cast<std::size_t>(k)];
    const std::string name = detail::trial_name("run", c.terrain, k);
    write_file(dir / name, [&](std::ostream& os) { write_ticklog(os, r.log, cmd); });
    if (c.dump_terrain) detail::dump_terrain(dir, c.terrain + "_trial" + std::to_string(k), terrains[static_cast<std::size_t>(k)]);
    detail::print_status(out, name, r);
  }
  return kOk;
}

/// Descending policy switched off on [off_s, on_s). The full schedule is
/// always recorded, so falls and goal crossings do not end the run.
inline int cmd_toggle(const ExperimentConfig& c, std::ostream& out) {
  validate(c);
  ControlStack stack;
  stack.spinal = detail::require_spinal(c, "toggle");
  if (c.descending.empty()) throw missing("toggle: descending weights required (--descending)");
  stack.descending = detail::optional_descending(c);
  const auto dir = ensure_out_dir(c);
  const terrain::Terrain terr = detail::trial_terrain(c, c.terrain, 0);
  EpisodeOptions o = detail::episode_options(c, 0);
  o.budget_s = c.toggle_budget_s;
  o.toggle = c.toggle;
  o.terminate = false;
  o.phase = reward::Phase::Descending;
  const EpisodeResult r = run_episode(stack, {}, terr, o);
  const std::string name = "toggle_" + c.terrain + ".csv";
  write_file(dir / name, [&](std::ostream& os) { write_ticklog(os, r.log, {c.vx, c.vy, c.wz, 0.0}); });
  if (c.dump_terrain) detail::dump_terrain(dir, c.terrain, terr);
  detail::print_status(out, name, r);
  return kOk;
}

inline train::EvalOptions eval_options(const ExperimentConfig& c, int n_trials) {
  train::EvalOptions e;
  e.n_trials = n_trials;
  e.vx = c.vx;
  e.budget_s = c.budget_s;
  e.seed = c.seed;
  e.threads = c.resolved_threads();
  if (c.delays_set) e.delays = c.delays;
  return e;
}

inline const std::array<std::string_view, 4> kSweepGroups = {"imu", "joints", "vision", "all"};

inline sensors::DelayConfig sweep_delay(std::string_view group, double ms, sensors::AppliesTo target) {
  sensors::DelayConfig d;
  d.applies_to = target;
  if (group == "imu" || group == "all") d.imu_ms = ms;
  if (group == "joints" || group == "all") d.joints_ms = ms;
  if ((group == "vision" || group == "all") && target != sensors::AppliesTo::Spinal) d.vision_ms = ms;
  return d;
}

/// Success-rate matrix per terrain: rows are sensor groups, columns delays.
/// Vision rows are "na" when only the spinal policy runs.
inline int cmd_delay_sweep(const ExperimentConfig& c, std::ostream& out) {
  validate(c);
  const auto spinal = detail::require_spinal(c, "delay-sweep");
  const auto desc = detail::optional_descending(c);
  const auto dir = ensure_out_dir(c);
  const sensors::AppliesTo target = c.delays.applies_to;
  const bool vision_applies = desc.has_value() && target != sensors::AppliesTo::Spinal;

  for (const auto& tname : c.sweep_terrains) {
    const auto spec = terrain_for(c, tname);
    const std::string name = "sweep_" + tname + ".csv";
    write_file(dir / name, [&](std::ostream& os) {
      os << schema_line("delay-sweep") << '\n';
      os << "group";
      for (double d : c.sweep_delays_ms) os << ",d" << fmt(d) << "ms";
      os << '\n';
      for (auto group : kSweepGroups) {
        os << group;
        for (double ms : c.sweep_delays_ms) {
          if (group == "vision" && !vision_applies) {
            os << ",na";
            continue;
          }
          train::EvalOptions e = eval_options(c, c.sweep_trials);
          e.delays = sweep_delay(group, ms, target);
          const auto rep = train::evaluate(spinal, desc, spec, e);
          os << ',' << fmt(rep.success_rate);
        }
        os << '\n';
      }
    });
    out << "wrote " << (dir / name).string() << '\n';
  }
  return kOk;
}

inline int cmd_eval(const ExperimentConfig& c, std::ostream& out) {
  validate(c);
  const auto spinal = detail::require_spinal(c, "eval");
  const auto desc = detail::optional_descending(c);
  const auto dir = ensure_out_dir(c);
  const auto rep = train::evaluate(spinal, desc, terrain_for(c, c.terrain), eval_options(c, c.trials));
  const std::string name = "eval_" + c.terrain + ".csv";
  write_file(dir / name, [&](std::ostream& os) {
    os << schema_line("eval") << '\n';
    os << "terrain,n_trials,successes,falls,timeouts,success_rate,mean_velocity_error,mean_return\n";
    os << c.terrain << ',' << rep.n_trials << ',' << rep.successes << ',' << rep.falls << ',' << rep.timeouts << ','
       << fmt(rep.success_rate) << ',' << fmt(rep.mean_velocity_error) << ',' << fmt(rep.mean_return) << '\n';
  });
  out << c.terrain << ": success_rate=" << fmt(rep.success_rate) << " (" << rep.successes << "/" << rep.n_trials
      << ") falls=" << rep.falls << " vel_err=" << fmt(rep.mean_velocity_error) << " return=" << fmt(rep.mean_return)
      << '\n';
  return kOk;
}

inline train::TrainConfig train_config(const ExperimentConfig& c) {
  train::TrainConfig t = c.train;
  t.seed = c.seed;
  t.threads = c.resolved_threads();
  if (t.phase == 2) {
    t.curriculum.clear();
    for (const auto& entry : c.curriculum) {
      std::string name = entry;
      double vx = c.vx;
      if (const auto colon = entry.find(':'); colon != std::string::npos) {
        name = entry.substr(0, colon);
        vx = detail::to_double("train.curriculum", entry.substr(colon + 1));
      }
      t.curriculum.push_back({terrain_for(c, name), vx});
    }
  }
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  return t;
}

inline int cmd_train(const ExperimentConfig& c, std::ostream& out) {
  validate(c);
  if (c.train.phase != 1 && c.train.phase != 2) throw config_error("config: train.phase must be 1 or 2");
  if (c.train.phase == 2 && c.spinal.empty()) throw missing("train: phase 2 needs spinal weights (--spinal)");
  const train::TrainConfig tc = train_config(c);
  std::optional<policy::PolicyWeights> spinal;
  if (!c.spinal.empty()) spinal = detail::load_policy(c.spinal, policy::kSpinalObsDim, policy::kSpinalActionDim);
  const auto dir = ensure_out_dir(c);

  const std::string tag = tc.phase == 1 ? "spinal" : "descending";
  auto hook = [&](const train::IterationRecord& rec, const policy::PolicyWeights& w) {
    if (c.checkpoint_every > 0 && rec.iteration > 0 && rec.iteration % c.checkpoint_every == 0) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "ckpt_%s_iter%04d.cpgw", tag.c_str(), rec.iteration);
      try {
        policy::save_weights(w, (dir / buf).string());
      } catch (const policy::WeightFileError& e) {
        throw io_error(e.what());
      }
    }
    out << "iter " << rec.iteration << " mean_return=" << fmt(rec.mean_return) << " best_return=" << fmt(rec.best_return)
        << '\n';
  };

  train::TrainResult res;
  if (tc.phase == 1) {
    res = train::train_phase1(tc, {}, {}, hook, c.wall_clock, spinal);
  } else {
    const std::uint64_t before = policy::weights_hash(*spinal);
    std::optional<policy::PolicyWeights> init;
    if (!c.descending.empty()) init = detail::load_policy(c.descending, policy::kDescendingObsDim, policy::kDescendingActionDim);
    res = train::train_phase2(tc, *spinal, {}, {}, hook, c.wall_clock, init);
    if (policy::weights_hash(*spinal) != before) throw std::logic_error("train: spinal weights changed during phase 2");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(before));
    out << "spinal_hash=" << buf << '\n';
  }
  const auto wpath = dir / (tag + ".cpgw");
  try {
    policy::save_weights(res.weights, wpath.string());
  } catch (const policy::WeightFileError& e) {
    throw io_error(e.what());
  }
  const auto cpath = dir / ("curve_phase" + std::to_string(tc.phase) + ".csv");
  write_file(cpath, [&](std::ostream& os) { write_curve(os, res.curve); });
  out << "wrote " << wpath.string() << " and " << cpath.string() << '\n';
  return kOk;
}

/// Random-initialised weight file for either policy.
inline int cmd_gen_weights(const ExperimentConfig& c, std::ostream& out) {
  validate(c);
  train::TrainConfig tc = c.train;
  tc.seed = c.seed;
  policy::PolicyWeights w;
  if (c.gen_kind == "spinal") w = train::initial_spinal(tc);
  else if (c.gen_kind == "descending") w = train::initial_descending(tc);
  else throw config_error("config: gen.kind must be spinal or descending");
  const auto dir = ensure_out_dir(c);
  const auto path = dir / (c.gen_kind + ".cpgw");
  try {
    policy::save_weights(w, path.string());
  } catch (const policy::WeightFileError& e) {
    throw io_error(e.what());
  }
  out << "wrote " << path.string() << '\n';
  return kOk;
}

/// Runs a command, mapping failures to exit codes.
template <typename Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const CommandError& e) {
    err << "error: " << e.what() << '\n';
    return e.code();
  } catch (const policy::WeightFileError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidConfig;
  }
}

}  // namespace cpgloco::exp
