// cpgloco: command-line front end for training and running the controller.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cpgloco/experiment.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct Binder {
  CLI::App* app;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> opts;

  void add(const std::string& flag, const std::string& key, const std::string& help) {
    opts.emplace_back(key, app->add_option(flag, values[key], help));
  }

  void collect(Overrides& out) const {
    for (const auto& [key, opt] : opts)
      if (opt->count() > 0) out.emplace_back(key, values.at(key));
  }
};

void add_scenario_flags(Binder& b) {
  b.add("--terrain", "terrain", "flat, uneven, stairs_up, stairs_down, platform, gap (or upstairs, downstairs, high_obstacle)");
  b.add("--vx", "vx", "commanded forward speed, m/s");
  b.add("--vy", "vy", "commanded lateral speed, m/s");
  b.add("--wz", "wz", "commanded yaw rate, rad/s");
  b.add("--budget", "budget_s", "episode time budget, s");
  b.add("--spinal", "spinal", "spinal policy weight file");
  b.add("--descending", "descending", "descending policy weight file");
  b.add("--delay-imu", "delay.imu_ms", "IMU delay, ms");
  b.add("--delay-joints", "delay.joints_ms", "joint state delay, ms");
  b.add("--delay-vision", "delay.vision_ms", "height map delay, ms");
  b.add("--delay-target", "delay.applies_to", "policy receiving the delays: spinal, descending, both");
  b.add("--threads", "threads", "worker threads (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cpgloco;
  CLI::App app{"CPG-based quadruped locomotion: training and experiment protocols"};
  app.require_subcommand(1);

  std::string config_path;
  Binder global{&app, {}, {}};
  app.add_option("--config", config_path, "key = value configuration file");
  global.add("--seed", "seed", "random seed");
  global.add("--out", "out", "output directory");
  std::vector<std::string> sets;
  app.add_option("--set", sets, "extra key=value configuration entries")->type_name("KEY=VALUE");

  std::vector<Binder> binders;
  binders.reserve(8);
  auto sub = [&](const char* name, const char* help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->fallthrough();
    binders.push_back(Binder{s, {}, {}});
    return &binders.back();
  };

  Binder* run = sub("run", "run trials and write one tick log per trial");
  add_scenario_flags(*run);
  run->add("--trials", "trials", "number of trials");
  run->add("--dump-terrain", "dump_terrain", "also write the terrain grid (true/false)");

  Binder* toggle = sub("toggle", "switch the descending policy off and on again during one run");
  add_scenario_flags(*toggle);
  toggle->add("--off", "toggle.off_s", "time the descending policy switches off, s");
  toggle->add("--on", "toggle.on_s", "time it switches back on, s");
  toggle->add("--duration", "toggle.budget_s", "run length, s");
  toggle->add("--dump-terrain", "dump_terrain", "also write the terrain grid (true/false)");

  Binder* sweep = sub("delay-sweep", "success-rate matrix over sensor groups and delays");
  add_scenario_flags(*sweep);
  sweep->add("--delays", "sweep.delays_ms", "comma-separated delays, ms");
  sweep->add("--terrains", "sweep.terrains", "comma-separated terrain names");
  sweep->add("--trials", "sweep.trials", "trials per cell");

  Binder* eval = sub("eval", "success rate and tracking error over several trials");
  add_scenario_flags(*eval);
  eval->add("--trials", "trials", "number of trials");

  Binder* tr = sub("train", "train the spinal (phase 1) or descending (phase 2) policy");
  tr->add("--phase", "train.phase", "1 or 2");
  tr->add("--iters", "train.iterations", "ES iterations");
  tr->add("--population", "train.population", "population size (even)");
  tr->add("--sigma", "train.sigma", "perturbation scale");
  tr->add("--lr", "train.learning_rate", "learning rate");
  tr->add("--episode", "train.episode_s", "training episode length, s");
  tr->add("--cmd-min", "train.cmd_min", "lowest sampled command, m/s");
  tr->add("--cmd-max", "train.cmd_max", "highest sampled command, m/s");
  tr->add("--hidden", "train.hidden", "comma-separated hidden layer widths");
  tr->add("--curriculum", "train.curriculum", "phase 2 terrains, name or name:vx, comma-separated");
  tr->add("--checkpoint-every", "train.checkpoint_every", "checkpoint period in iterations (0 = off)");
  tr->add("--spinal", "spinal", "spinal weights (required for phase 2, initial weights for phase 1)");
  tr->add("--descending", "descending", "initial descending weights for phase 2");
  tr->add("--vx", "vx", "default phase 2 command, m/s");
  tr->add("--threads", "threads", "worker threads (0 = all cores)");
  tr->add("--wall-clock", "wall_clock", "record wall-clock time in the curve (true/false)");

  Binder* gen = sub("gen-weights", "write randomly initialised weights");
  gen->add("--kind", "gen.kind", "spinal or descending");
  gen->add("--hidden", "train.hidden", "comma-separated hidden layer widths");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exp::kInvalidConfig;
  }

  return exp::guarded(
      [&] {
        exp::ExperimentConfig cfg;
        if (!config_path.empty()) exp::load_config_file(cfg, config_path);
        Overrides ov;
        for (const auto& s : sets) {
          const auto eq = s.find('=');
          if (eq == std::string::npos) throw exp::config_error("--set expects KEY=VALUE, got '" + s + "'");
          ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        global.collect(ov);
        for (const auto& b : binders)
          if (b.app->parsed()) b.collect(ov);
        for (const auto& [k, v] : ov) exp::set_key(cfg, k, v);

        if (run->app->parsed()) return exp::cmd_run(cfg, std::cout);
        if (toggle->app->parsed()) return exp::cmd_toggle(cfg, std::cout);
        if (sweep->app->parsed()) return exp::cmd_delay_sweep(cfg, std::cout);
        if (eval->app->parsed()) return exp::cmd_eval(cfg, std::cout);
        if (tr->app->parsed()) return exp::cmd_train(cfg, std::cout);
        return exp::cmd_gen_weights(cfg, std::cout);
      },
      std::cerr);
}
