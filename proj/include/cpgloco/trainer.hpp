#pragma once

// Two-phase policy search with mirrored-sampling evolution strategies.
//
// Phase 1 optimises the spinal network on flat ground. Phase 2 optimises the
// descending network on a terrain curriculum with the spinal network frozen.
// Each iteration perturbs the current parameters with antithetic Gaussian
// noise, scores every candidate on the same rollout seeds, rank-normalises
// the scores and takes an Adam step along the estimated gradient.

#include <chrono>
#include <functional>
#include <thread>
#include <vector>

#include "cpgloco/controller.hpp"
#include "cpgloco/rng.hpp"

namespace cpgloco::train {

/// Runs fn(i) for i in [0, n) over `threads` workers. Each index is written
/// by exactly one worker, so results never depend on scheduling.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(n));
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

struct CurriculumEntry {
  terrain::TerrainSpec terrain;
  double vx = 0.9;
};

struct TrainConfig {
  int phase = 1;
  int iterations = 50;
  int population = 32;       // even; antithetic pairs
  double sigma = 0.02;       // perturbation scale
  double learning_rate = 0.01;
  double episode_s = 8.0;
  double cmd_min = 0.5;      // m/s, phase 1 command range
  double cmd_max = 2.0;
  std::vector<CurriculumEntry> curriculum;  // phase 2
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden{64, 64};
  int rollouts_per_candidate = 2;
  double init_output_scale = 0.1;
  unsigned threads = 1;

  void validate() const {
    if (phase != 1 && phase != 2) throw std::invalid_argument("train: phase must be 1 or 2");
    if (iterations < 0) throw std::invalid_argument("train: iterations must be >= 0");
    if (population < 2 || population % 2) throw std::invalid_argument("train: population must be even and >= 2");
    if (!(sigma > 0.0) || !(learning_rate > 0.0)) throw std::invalid_argument("train: sigma and learning rate must be positive");
    if (!(episode_s > 0.0)) throw std::invalid_argument("train: episode length must be positive");
    if (!(cmd_min > 0.0) || cmd_max < cmd_min) throw std::invalid_argument("train: invalid command range");
    if (rollouts_per_candidate < 1) throw std::invalid_argument("train: need at least one rollout per candidate");
    if (phase == 2 && curriculum.empty()) throw std::invalid_argument("train: phase 2 needs a terrain curriculum");
  }
};

inline constexpr double kScoreFloor = -1000.0;

struct IterationRecord {
  int iteration = 0;
  double mean_return = 0.0;  // over the perturbed population
  double best_return = 0.0;  // best centre evaluation so far
  double centre_return = 0.0;
  double mean_action_sq = 0.0;  // population mean ||a_desc||^2 (phase 2)
  double wall_clock_s = 0.0;
};

struct TrainResult {
  policy::PolicyWeights weights;  // best-so-far centre
  std::vector<IterationRecord> curve;
};

/// Called after every iteration with the current centre weights.
using IterationHook = std::function<void(const IterationRecord&, const policy::PolicyWeights&)>;

struct RolloutSpec {
  terrain::TerrainSpec terrain;
  double vx = 0.9;
  double start_x = 0.0;
  double start_y = 0.0;
};

namespace detail {

inline RolloutSpec make_rollout(const TrainConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  RolloutSpec r;
  if (cfg.phase == 1) {
    r.terrain = terrain::TerrainSpec::flat();
    r.vx = cfg.cmd_min == cfg.cmd_max ? cfg.cmd_min : rng.uniform(cfg.cmd_min, cfg.cmd_max);
  } else {
    const auto& e = cfg.curriculum[static_cast<std::size_t>(rng.next() % cfg.curriculum.size())];
    r.terrain = e.terrain;
    r.vx = e.vx;
  }
  r.terrain.seed = rng.next() % 10000;  // training seeds stay below 10000
  r.start_x = rng.uniform(-0.2, 0.2);
  r.start_y = rng.uniform(-0.1, 0.1);
  return r;
}

struct Score {
  double ret = 0.0;
  double action_sq = 0.0;
};

inline Score score(const ControlStack& stack, const sim::WorldConfig& world, const TrainConfig& cfg,
                   const std::vector<RolloutSpec>& rollouts) {
  Score s;
  for (const auto& r : rollouts) {
    const auto terr = terrain::generate(r.terrain);
    EpisodeOptions opt;
    opt.vx = r.vx;
    opt.budget_s = cfg.episode_s;
    opt.start_x = r.start_x;
    opt.start_y = r.start_y;
    opt.phase = cfg.phase == 1 ? reward::Phase::Spinal : reward::Phase::Descending;
    const EpisodeResult res = run_episode(stack, world, terr, opt);
    if (res.diverged || !std::isfinite(res.total_return)) return {kScoreFloor, 0.0};
    s.ret += res.total_return;
    s.action_sq += res.mean_action_sq;
  }
  s.ret /= static_cast<double>(rollouts.size());
  s.action_sq /= static_cast<double>(rollouts.size());
  return s;
}

/// Centred ranks in [-0.5, 0.5]; ties share the mean rank.
inline std::vector<double> centred_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  if (n > 1)
    for (auto& r : ranks) r = r / static_cast<double>(n - 1) - 0.5;
  return ranks;
}

struct Adam {
  VecX m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;

  explicit Adam(Eigen::Index n) : m(VecX::Zero(n)), v(VecX::Zero(n)) {}

  VecX step(const VecX& grad, double lr) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    VecX out(grad.size());
    for (Eigen::Index i = 0; i < grad.size(); ++i) out[i] = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    return out;
  }
};

/// Shared ES loop. `make_stack` builds a control stack from trainable weights.
inline TrainResult run_es(const TrainConfig& cfg, const sim::WorldConfig& world, const policy::PolicyWeights& initial,
                          const std::function<ControlStack(const policy::PolicyWeights&)>& make_stack,
                          const IterationHook& hook, bool measure_wall_clock) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  TrainResult result;
  result.weights = initial;

  policy::PolicyWeights centre = initial;
  VecX theta = centre.flatten();
  const Eigen::Index dim = theta.size();
  Adam adam(dim);
  const std::size_t pairs = static_cast<std::size_t>(cfg.population / 2);

  std::vector<RolloutSpec> eval_rollouts;
  for (int j = 0; j < cfg.rollouts_per_candidate; ++j)
    eval_rollouts.push_back(make_rollout(cfg, derive_seed(cfg.seed, 0xE7A1, static_cast<std::uint64_t>(j))));

  double best = -std::numeric_limits<double>::infinity();

  for (int it = 0; it <= cfg.iterations; ++it) {
    // Centre evaluation on fixed seeds drives the best-so-far snapshot.
    centre.unflatten(theta);
    const double centre_score = score(make_stack(centre), world, cfg, eval_rollouts).ret;
    if (centre_score > best) {
      best = centre_score;
      result.weights = centre;
    }

    std::vector<RolloutSpec> rollouts;
    for (int j = 0; j < cfg.rollouts_per_candidate; ++j)
      rollouts.push_back(make_rollout(cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(it) + 1, static_cast<std::uint64_t>(j))));

    std::vector<VecX> noise(pairs);
    Rng nrng(derive_seed(cfg.seed, 0x9015E, static_cast<std::uint64_t>(it)));
    for (auto& e : noise) {
      e.resize(dim);
      for (Eigen::Index i = 0; i < dim; ++i) e[i] = nrng.normal();
    }

    std::vector<Score> scores(2 * pairs);
    parallel_for(2 * pairs, cfg.threads, [&](std::size_t c) {
      const std::size_t k = c / 2;
      const double sign = (c % 2 == 0) ? 1.0 : -1.0;
      policy::PolicyWeights cand = centre;
      cand.unflatten(theta + sign * cfg.sigma * noise[k]);
      scores[c] = score(make_stack(cand), world, cfg, rollouts);
    });

    IterationRecord rec;
    rec.iteration = it;
    std::vector<double> rets(scores.size());
    for (std::size_t c = 0; c < scores.size(); ++c) {
      rets[c] = scores[c].ret;
      rec.mean_return += scores[c].ret;
      rec.mean_action_sq += scores[c].action_sq;
    }
    rec.mean_return /= static_cast<double>(scores.size());
    rec.mean_action_sq /= static_cast<double>(scores.size());
    rec.centre_return = centre_score;
    rec.best_return = best;
    if (measure_wall_clock) rec.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
    result.curve.push_back(rec);
    if (hook) hook(rec, centre);

    if (it == cfg.iterations) break;

    const std::vector<double> ranks = centred_ranks(rets);
    VecX grad = VecX::Zero(dim);
    for (std::size_t k = 0; k < pairs; ++k) grad += (ranks[2 * k] - ranks[2 * k + 1]) * noise[k];
    grad /= static_cast<double>(cfg.population) * cfg.sigma;
    theta += adam.step(grad, cfg.learning_rate);
  }
  return result;
}

}  // namespace detail

inline policy::PolicyWeights initial_spinal(const TrainConfig& cfg) {
  return policy::random_network(policy::spinal_dims(cfg.hidden), derive_seed(cfg.seed, 0x5B1A), policy::Activation::Elu,
                                cfg.init_output_scale);
}

inline policy::PolicyWeights initial_descending(const TrainConfig& cfg) {
  return policy::random_network(policy::descending_dims(cfg.hidden), derive_seed(cfg.seed, 0xDE5C), policy::Activation::Elu,
                                cfg.init_output_scale);
}

inline TrainResult train_phase1(const TrainConfig& cfg, const ControlStack& base = {}, const sim::WorldConfig& world = {},
                                const IterationHook& hook = {}, bool measure_wall_clock = false,
                                std::optional<policy::PolicyWeights> init = std::nullopt) {
  if (cfg.phase != 1) throw std::invalid_argument("train_phase1: config phase must be 1");
  cfg.validate();
  const policy::PolicyWeights start = init ? *init : initial_spinal(cfg);
  auto make = [&](const policy::PolicyWeights& w) {
    ControlStack s = base;
    s.spinal = w;
    s.descending.reset();
    return s;
  };
  return detail::run_es(cfg, world, start, make, hook, measure_wall_clock);
}

inline TrainResult train_phase2(const TrainConfig& cfg, const policy::PolicyWeights& spinal, const ControlStack& base = {},
                                const sim::WorldConfig& world = {}, const IterationHook& hook = {},
                                bool measure_wall_clock = false, std::optional<policy::PolicyWeights> init = std::nullopt) {
  if (cfg.phase != 2) throw std::invalid_argument("train_phase2: config phase must be 2");
  cfg.validate();
  spinal.validate();
  if (spinal.in_dim() != policy::kSpinalObsDim || spinal.out_dim() != policy::kSpinalActionDim)
    throw policy::DimensionError("train_phase2: spinal policy must map 64 -> 8");
  const policy::PolicyWeights start = init ? *init : initial_descending(cfg);
  auto make = [&](const policy::PolicyWeights& w) {
    ControlStack s = base;
    s.spinal = spinal;
    s.descending = w;
    return s;
  };
  return detail::run_es(cfg, world, start, make, hook, measure_wall_clock);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Start positions on the flat strip used by successive trials.
inline constexpr std::array<std::pair<double, double>, 5> kTrialStarts = {
    std::pair{0.0, 0.0}, std::pair{-0.3, 0.15}, std::pair{0.3, -0.15}, std::pair{-0.15, -0.2}, std::pair{0.15, 0.2}};

inline constexpr std::uint64_t kEvalSeedBase = 10000;

struct EvalOptions {
  int n_trials = 5;
  double vx = 0.9;
  double budget_s = 20.0;
  std::optional<sensors::DelayConfig> delays;
  std::uint64_t seed = 0;  // offsets the evaluation seeds
  unsigned threads = 1;
};

struct EvalReport {
  int n_trials = 0;
  int successes = 0;
  int falls = 0;
  int timeouts = 0;
  double success_rate = 0.0;
  double mean_velocity_error = 0.0;
  double mean_return = 0.0;
  std::vector<sim::EpisodeStatus> trials;
};

inline EvalReport aggregate(const std::vector<sim::EpisodeStatus>& st, const std::vector<double>& vel_err,
                            const std::vector<double>& rets) {
  EvalReport r;
  r.n_trials = static_cast<int>(st.size());
  r.trials = st;
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st[i].status == sim::Status::Success) ++r.successes;
    if (st[i].status == sim::Status::Fell) ++r.falls;
    if (st[i].status == sim::Status::Timeout) ++r.timeouts;
    r.mean_velocity_error += vel_err[i];
    r.mean_return += rets[i];
  }
  if (r.n_trials > 0) {
    r.success_rate = static_cast<double>(r.successes) / static_cast<double>(r.n_trials);
    r.mean_velocity_error /= r.n_trials;
    r.mean_return /= r.n_trials;
  }
  return r;
}

inline EvalReport evaluate(const policy::PolicyWeights& spinal, const std::optional<policy::PolicyWeights>& descending,
                           const terrain::TerrainSpec& spec, const EvalOptions& opt, const ControlStack& base = {},
                           const sim::WorldConfig& world = {}) {
  if (opt.n_trials < 1) throw std::invalid_argument("evaluate: need at least one trial");
  ControlStack stack = base;
  stack.spinal = spinal;
  stack.descending = descending;
  stack.validate();
  const std::size_t n = static_cast<std::size_t>(opt.n_trials);
  std::vector<sim::EpisodeStatus> st(n);
  std::vector<double> vel(n), rets(n);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    terrain::TerrainSpec ts = spec;
    ts.seed = kEvalSeedBase + opt.seed + i;
    const auto terr = terrain::generate(ts);
    EpisodeOptions eo;
    eo.vx = opt.vx;
    eo.budget_s = opt.budget_s;
    eo.delays = opt.delays;
    eo.start_x = kTrialStarts[i % kTrialStarts.size()].first;
    eo.start_y = kTrialStarts[i % kTrialStarts.size()].second;
    eo.phase = descending ? reward::Phase::Descending : reward::Phase::Spinal;
    const EpisodeResult res = run_episode(stack, world, terr, eo);
    st[i] = res.status;
    vel[i] = res.mean_velocity_error;
    rets[i] = res.total_return;
  });
  return aggregate(st, vel, rets);
}

}  // namespace cpgloco::train
