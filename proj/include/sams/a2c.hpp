#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sams/common.hpp"
#include "sams/diffnet.hpp"
#include "sams/metrics.hpp"
#include "sams/reposition.hpp"
#include "sams/sim.hpp"

namespace sams {

struct NetConfig {
  int n_zones = 0;
  int feature_dim = 0;  // columns of N(t), forecast included when enabled
  int hidden = 32;
  int fleet_size = 1;   // feature scaling denominator
  double tau = 0.5;     // GCN kernel temperature on the normalized adjacency
  double conc_floor = 1e-3;
};

// State tensors as the networks consume them: counts scaled by fleet size,
// adjacency scaled to [0,1], plus the precomputed GCN propagation matrix.
struct ScaledState {
  Tensor2 features;
  Tensor2 adj_norm;
  Tensor2 hhat;
};

inline ScaledState scale_state(const ZoneGraph& zg, int fleet_size, double tau) {
  ScaledState s;
  s.features = zg.node_features;
  const double denom = fleet_size > 0 ? static_cast<double>(fleet_size) : 1.0;
  for (double& x : s.features.v) x /= denom;
  s.adj_norm = zg.adjacency;
  double mx = 0.0;
  for (double x : s.adj_norm.v) mx = std::max(mx, x);
  if (mx > 0.0)
    for (double& x : s.adj_norm.v) x /= mx;
  s.hhat = gcn_norm_adjacency(s.adj_norm, tau);
  return s;
}

namespace detail {

inline void build_trunk_params(ParamStore& p, const NetConfig& cfg) {
  p.create("gat.w", cfg.feature_dim, cfg.hidden, ParamStore::Init::XavierUniform);
  p.create("gat.a_self", cfg.hidden, 1, ParamStore::Init::XavierUniform);
  p.create("gat.a_peer", cfg.hidden, 1, ParamStore::Init::XavierUniform);
  p.create("gat.edge_bias", 1, 1, ParamStore::Init::XavierUniform);
  for (int k = 1; k <= 4; ++k)
    p.create("gcn" + std::to_string(k) + ".w", cfg.hidden, cfg.hidden,
             ParamStore::Init::XavierUniform);
}

inline Var trunk_forward(Tape& t, ParamStore& p, const ScaledState& s) {
  GatParams gp{t.param(p, "gat.w"), t.param(p, "gat.a_self"), t.param(p, "gat.a_peer"),
               t.param(p, "gat.edge_bias")};
  Var h = gat_forward(t, t.input(s.features), s.adj_norm, gp);
  for (int k = 1; k <= 4; ++k)
    h = gcn_forward(t, h, s.hhat, t.param(p, "gcn" + std::to_string(k) + ".w"));
  return h;
}

}  // namespace detail

// GAT -> 4 skip-GCN -> per-node neighbor pooling -> 3 dense -> softplus+floor.
// Row i of the output parametrizes the Dirichlet over destinations of zone i.
struct ActorNet {
  NetConfig cfg;
  ParamStore params;

  ActorNet(const NetConfig& c, std::uint64_t seed) : cfg(c), params(seed) {
    if (c.n_zones <= 0 || c.feature_dim <= 0 || c.hidden <= 0)
      throw ConfigError("ActorNet: bad dimensions");
    detail::build_trunk_params(params, cfg);
    params.create("mlp1.w", 2 * cfg.hidden, cfg.hidden, ParamStore::Init::XavierUniform);
    params.create("mlp1.b", 1, cfg.hidden, ParamStore::Init::Zeros);
    params.create("mlp2.w", cfg.hidden, cfg.hidden, ParamStore::Init::XavierUniform);
    params.create("mlp2.b", 1, cfg.hidden, ParamStore::Init::Zeros);
    params.create("mlp3.w", cfg.hidden, cfg.n_zones, ParamStore::Init::XavierUniform);
    params.create("mlp3.b", 1, cfg.n_zones, ParamStore::Init::Zeros);
  }

  Var concentrations(Tape& t, const ScaledState& s) {
    Var h = detail::trunk_forward(t, params, s);
    Var pooled = t.neighbor_sum_pool(h);
    Var z = t.relu(dense_forward(t, pooled, t.param(params, "mlp1.w"), t.param(params, "mlp1.b")));
    z = t.relu(dense_forward(t, z, t.param(params, "mlp2.w"), t.param(params, "mlp2.b")));
    z = dense_forward(t, z, t.param(params, "mlp3.w"), t.param(params, "mlp3.b"));
    return t.add_const(t.softplus(z), cfg.conc_floor);
  }
};

// Same trunk shape with its own parameters; global pooling down to one value.
struct CriticNet {
  NetConfig cfg;
  ParamStore params;

  CriticNet(const NetConfig& c, std::uint64_t seed) : cfg(c), params(seed) {
    if (c.n_zones <= 0 || c.feature_dim <= 0 || c.hidden <= 0)
      throw ConfigError("CriticNet: bad dimensions");
    detail::build_trunk_params(params, cfg);
    params.create("val1.w", cfg.hidden, cfg.hidden, ParamStore::Init::XavierUniform);
    params.create("val1.b", 1, cfg.hidden, ParamStore::Init::Zeros);
    params.create("val2.w", cfg.hidden, 1, ParamStore::Init::XavierUniform);
    params.create("val2.b", 1, 1, ParamStore::Init::Zeros);
  }

  Var value(Tape& t, const ScaledState& s) {
    Var h = detail::trunk_forward(t, params, s);
    Var pooled = t.global_sum_pool(h);
    Var z = t.relu(dense_forward(t, pooled, t.param(params, "val1.w"), t.param(params, "val1.b")));
    return dense_forward(t, z, t.param(params, "val2.w"), t.param(params, "val2.b"));
  }
};

enum class ActMode { Sample, Mean };

// Draws (or deterministically takes the mean of) one action; returns the joint
// log-density under the current policy for sampled actions, 0 in mean mode.
inline std::pair<RepositionAction, double> act(ActorNet& net, const ZoneGraph& state,
                                               ActMode mode, std::mt19937_64& rng) {
  Tape t;
  const ScaledState s = scale_state(state, net.cfg.fleet_size, net.cfg.tau);
  const Tensor2 conc = t.value(net.concentrations(t, s));
  for (double c : conc.v)
    if (!std::isfinite(c))
      throw RuntimeFault("actor produced a non-finite concentration (diverged?)");

  const int n = net.cfg.n_zones;
  RepositionAction action;
  action.a = Tensor2(n, n);
  double logpdf = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = conc.at(i, j);
    std::vector<double> x;
    if (mode == ActMode::Sample) {
      x = dirichlet_sample(row, rng);
      logpdf += dirichlet_logpdf(row, x);
    } else {
      double sum = 0.0;
      for (double c : row) sum += c;
      x.resize(row.size());
      for (std::size_t j = 0; j < row.size(); ++j) x[j] = row[j] / sum;
    }
    for (int j = 0; j < n; ++j) action.a.at(i, j) = x[static_cast<std::size_t>(j)];
  }
  return {std::move(action), logpdf};
}

inline RepositionPolicyFn make_policy(ActorNet& net, ActMode mode, std::mt19937_64& rng) {
  return [&net, mode, &rng](const ZoneGraph& state) {
    return act(net, state, mode, rng).first;
  };
}

// ---- Advantage estimation ----

inline std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

// Full-episode Monte-Carlo advantage: discounted return-to-go minus baseline.
inline std::vector<double> returns_and_advantages(const std::vector<double>& rewards,
                                                  const std::vector<double>& values,
                                                  double gamma) {
  if (rewards.size() != values.size())
    throw ConfigError("returns_and_advantages: length mismatch");
  std::vector<double> adv = discounted_returns(rewards, gamma);
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] -= values[i];
  return adv;
}

struct TrainConfig {
  double gamma = 0.99;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double entropy_coef = 0.0;
  long episodes = 500;
  int workers = 4;  // episodes per synchronous batch
  std::uint64_t seed = 1;
  int eval_every = 10;  // batches between mean-mode evaluations
  int eval_episodes = 5;
  int calibration_episodes = 3;
  bool use_gamma_pow_t = true;        // keep the printed gamma^t factor in Eq-10 form
  bool normalize_advantages = true;   // batch-normalize advantages (stability aid)
  int hidden = 32;
  double tau = 0.5;
  double conc_floor = 1e-3;
  ActMode eval_mode = ActMode::Mean;
  std::string checkpoint_path;  // empty: in-memory only
  std::string curve_path;
};

inline void validate_train_config(const TrainConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0)) throw ConfigError("train: gamma must be in (0,1]");
  if (!(cfg.actor_lr > 0.0 && cfg.critic_lr > 0.0)) throw ConfigError("train: lrs must be positive");
  if (cfg.episodes < 1 || cfg.workers < 1) throw ConfigError("train: episodes/workers must be >= 1");
  if (cfg.entropy_coef < 0.0) throw ConfigError("train: entropy_coef must be >= 0");
}

// ---- Gradient accumulation (Eq-10-style actor term, MSE critic) ----

inline std::vector<double> critic_values(CriticNet& critic, const EpisodeTrace& trace) {
  std::vector<double> values;
  values.reserve(trace.mdp.size());
  for (const auto& rec : trace.mdp) {
    Tape t;
    const ScaledState s = scale_state(rec.state, critic.cfg.fleet_size, critic.cfg.tau);
    values.push_back(t.value(critic.value(t, s)).at(0, 0));
  }
  return values;
}

// Accumulates -(1/batch) sum_t w_t log pi(A_t|S_t), w_t = gamma^t * adv_t, plus
// the optional entropy bonus, into the actor's gradient slots. Returns the
// objective contribution for diagnostics.
inline double accumulate_actor_gradient(ActorNet& actor, const EpisodeTrace& trace,
                                        const std::vector<double>& advantages,
                                        const TrainConfig& cfg, double inv_batch) {
  if (advantages.size() != trace.mdp.size())
    throw ConfigError("actor gradient: advantage count mismatch");
  double objective = 0.0;
  for (std::size_t k = 0; k < trace.mdp.size(); ++k) {
    const MdpStepRecord& rec = trace.mdp[k];
    Tape t;
    const ScaledState s = scale_state(rec.state, actor.cfg.fleet_size, actor.cfg.tau);
    Var conc = actor.concentrations(t, s);
    Var logp = t.sum_all(t.dirichlet_row_logpdfs(conc, rec.action.a));
    const double discount =
        cfg.use_gamma_pow_t ? std::pow(cfg.gamma, static_cast<double>(k)) : 1.0;
    const double w = discount * advantages[k] * inv_batch;
    Var loss = t.scale(logp, -w);
    if (cfg.entropy_coef > 0.0) {
      Var ent = t.sum_all(t.dirichlet_row_entropies(conc));
      loss = t.add(loss, t.scale(ent, -cfg.entropy_coef * inv_batch));
      objective += cfg.entropy_coef * inv_batch * t.value(ent).at(0, 0);
    }
    objective += w * t.value(logp).at(0, 0);
    t.backward(loss);
  }
  return objective;
}

// Accumulates the MSE gradient between predicted values and empirical returns;
// returns the sum of squared errors.
inline double accumulate_critic_gradient(CriticNet& critic, const EpisodeTrace& trace,
                                         const std::vector<double>& returns,
                                         double inv_total_steps) {
  if (returns.size() != trace.mdp.size())
    throw ConfigError("critic gradient: return count mismatch");
  double sq_sum = 0.0;
  for (std::size_t k = 0; k < trace.mdp.size(); ++k) {
    Tape t;
    const ScaledState s = scale_state(trace.mdp[k].state, critic.cfg.fleet_size, critic.cfg.tau);
    Var err = t.add_const(critic.value(t, s), -returns[k]);
    Var loss = t.square(err);
    const double e = t.value(err).at(0, 0);
    sq_sum += e * e;
    t.backward(loss, inv_total_steps);
  }
  return sq_sum;
}

struct UpdateStats {
  double actor_objective = 0.0;
  double critic_loss = 0.0;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  double mean_return = 0.0;
  double mean_advantage = 0.0;
  long steps = 0;
};

// One synchronous A2C update over a batch of completed episodes.
inline UpdateStats update(ActorNet& actor, CriticNet& critic,
                          const std::vector<EpisodeTrace>& batch, const TrainConfig& cfg,
                          const AdamConfig& actor_adam, const AdamConfig& critic_adam) {
  validate_train_config(cfg);
  if (batch.empty()) throw ConfigError("update: empty batch");

  UpdateStats stats;
  std::vector<std::vector<double>> all_returns, all_adv;
  all_returns.reserve(batch.size());
  all_adv.reserve(batch.size());
  long total_steps = 0;
  for (const auto& trace : batch) {
    std::vector<double> rewards;
    rewards.reserve(trace.mdp.size());
    for (const auto& rec : trace.mdp) rewards.push_back(rec.reward);
    const std::vector<double> values = critic_values(critic, trace);
    std::vector<double> returns = discounted_returns(rewards, cfg.gamma);
    std::vector<double> adv = returns;
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] -= values[i];
    total_steps += static_cast<long>(returns.size());
    for (double g : returns) stats.mean_return += g;
    all_returns.push_back(std::move(returns));
    all_adv.push_back(std::move(adv));
  }
  if (total_steps == 0) throw ConfigError("update: batch contains no decisions");
  stats.steps = total_steps;
  stats.mean_return /= static_cast<double>(total_steps);

  if (cfg.normalize_advantages) {
    double mean = 0.0;
    for (const auto& adv : all_adv)
      for (double a : adv) mean += a;
    mean /= static_cast<double>(total_steps);
    double var = 0.0;
    for (const auto& adv : all_adv)
      for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(total_steps));
    for (auto& adv : all_adv)
      for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }
  for (const auto& adv : all_adv)
    for (double a : adv) stats.mean_advantage += a;
  stats.mean_advantage /= static_cast<double>(total_steps);

  actor.params.zero_grads();
  critic.params.zero_grads();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double inv_steps = 1.0 / static_cast<double>(total_steps);
  double sq_sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    stats.actor_objective += accumulate_actor_gradient(actor, batch[b], all_adv[b], cfg, inv_batch);
    sq_sum += accumulate_critic_gradient(critic, batch[b], all_returns[b], inv_steps);
  }
  stats.critic_loss = sq_sum * inv_steps;
  stats.actor_grad_norm = actor.params.grad_norm();
  stats.critic_grad_norm = critic.params.grad_norm();
  if (!std::isfinite(stats.actor_objective) || !std::isfinite(stats.critic_loss) ||
      !std::isfinite(stats.actor_grad_norm) || !std::isfinite(stats.critic_grad_norm))
    throw RuntimeFault("a2c update: non-finite loss or gradient");

  adam_step(actor.params, actor_adam);
  adam_step(critic.params, critic_adam);
  return stats;
}

// ---- Environment plumbing and the training loop ----

struct EnvSpec {
  SimConfig sim;
  ServiceRegion region;
  double horizon_start = 0.0;
  double horizon_end = 0.0;
  std::function<DemandStream(std::uint64_t)> stream_for_seed;
  AssignmentFn assign;
  EpisodeParams episode;  // weights are overwritten by calibration/training
};

inline EpisodeTrace run_env_episode(const EnvSpec& env, const RewardWeights& weights,
                                    const RepositionPolicyFn& policy,
                                    std::uint64_t stream_seed, std::uint64_t world_seed) {
  const DemandStream stream = env.stream_for_seed(stream_seed);
  SimWorld world =
      init_world(env.sim, env.region, stream, env.horizon_start, env.horizon_end, world_seed);
  EpisodeParams params = env.episode;
  params.weights = weights;
  return run_episode(world, env.sim, env.assign, policy, params);
}

// Baseline (no repositioning) rollouts provide the W, S, n estimates that fix
// the reward weights before training; the weights then stay frozen.
inline RewardWeights calibrate_from_baseline(const EnvSpec& env, std::uint64_t seed,
                                             int episodes) {
  if (episodes < 1) throw ConfigError("calibration: need at least one episode");
  double total_wait = 0.0, served = 0.0, activated = 0.0;
  for (int i = 0; i < episodes; ++i) {
    const EpisodeTrace trace =
        run_env_episode(env, RewardWeights{}, nullptr, mix_seed(seed, 600000 + i),
                        mix_seed(seed, 700000 + i));
    total_wait += trace.delta * static_cast<double>(trace.tally.sum_wait_counts);
    served += static_cast<double>(trace.tally.served);
    activated += static_cast<double>(trace.tally.activated);
  }
  return calibrate_weights(total_wait, served, activated);
}

struct EvalOutcome {
  std::optional<double> mean_wait;  // average of per-seed mean waits
  double mean_reward = 0.0;         // average per-episode total reward
  std::vector<ServiceMetrics> per_seed;
};

inline EvalOutcome evaluate_policy(const EnvSpec& env, const RewardWeights& weights,
                                   const RepositionPolicyFn& policy,
                                   const std::vector<std::uint64_t>& base_seeds) {
  EvalOutcome out;
  double wait_sum = 0.0;
  long wait_n = 0;
  for (std::uint64_t base : base_seeds) {
    const EpisodeTrace trace =
        run_env_episode(env, weights, policy, mix_seed(base, 1), mix_seed(base, 2));
    out.mean_reward += trace.total_reward;
    ServiceMetrics m = compute_metrics(trace, env.region);
    if (m.mean_wait) {
      wait_sum += *m.mean_wait;
      ++wait_n;
    }
    out.per_seed.push_back(std::move(m));
  }
  if (!base_seeds.empty()) out.mean_reward /= static_cast<double>(base_seeds.size());
  if (wait_n > 0) out.mean_wait = wait_sum / static_cast<double>(wait_n);
  return out;
}

struct CurveRow {
  long episodes_done = 0;
  double mean_batch_reward = 0.0;
  std::optional<double> eval_mean_wait;
  double actor_grad_norm = 0.0;
  double critic_grad_norm = 0.0;
  double critic_loss = 0.0;
};

inline void write_learning_curve(const std::string& path, const std::vector<CurveRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("curve: cannot open " + path + " for writing");
  os << "episodes,mean_batch_reward,eval_mean_wait,actor_grad_norm,critic_grad_norm,critic_loss\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string eval = "NA";
    if (r.eval_mean_wait) {
      std::snprintf(buf, sizeof(buf), "%.9g", *r.eval_mean_wait);
      eval = buf;
    }
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%s,%.9g,%.9g,%.9g\n", r.episodes_done,
                  r.mean_batch_reward, eval.c_str(), r.actor_grad_norm, r.critic_grad_norm,
                  r.critic_loss);
    os << buf;
  }
  if (!os) throw DataError("curve: write failed for " + path);
}

struct TrainResult {
  std::vector<CurveRow> curve;
  RewardWeights weights;
  long episodes_done = 0;
};

inline std::vector<std::uint64_t> heldout_eval_seeds(std::uint64_t seed, int count) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) seeds.push_back(mix_seed(seed, 400000 + k));
  return seeds;
}

// Synchronous A2C training loop: collect a batch of sampled-policy episodes,
// update once, periodically evaluate the mean-mode policy on held-out seeds.
inline TrainResult train(const EnvSpec& env, const TrainConfig& cfg, ActorNet& actor,
                         CriticNet& critic, const std::string& resume_path = "") {
  validate_train_config(cfg);

  TrainResult result;
  if (!resume_path.empty()) {
    const std::string meta_text = load_checkpoint(
        resume_path, {{"actor", &actor.params}, {"critic", &critic.params}});
    const auto meta = nlohmann::json::parse(meta_text);
    result.episodes_done = meta.at("episodes_done").get<long>();
    result.weights.omega = meta.at("omega").get<double>();
    result.weights.sigma = meta.at("sigma").get<double>();
  } else {
    result.weights = calibrate_from_baseline(env, cfg.seed, cfg.calibration_episodes);
  }

  const AdamConfig actor_adam{cfg.actor_lr, 0.9, 0.999, 1e-8};
  const AdamConfig critic_adam{cfg.critic_lr, 0.9, 0.999, 1e-8};
  const std::vector<std::uint64_t> eval_seeds = heldout_eval_seeds(cfg.seed, cfg.eval_episodes);

  const auto save = [&](const std::string& path) {
    if (path.empty()) return;
    nlohmann::json meta;
    meta["episodes_done"] = result.episodes_done;
    meta["omega"] = result.weights.omega;
    meta["sigma"] = result.weights.sigma;
    meta["gamma"] = cfg.gamma;
    save_checkpoint(path, {{"actor", &actor.params}, {"critic", &critic.params}}, meta.dump());
  };

  long iteration = 0;
  while (result.episodes_done < cfg.episodes) {
    const long batch_size =
        std::min<long>(cfg.workers, cfg.episodes - result.episodes_done);
    std::vector<EpisodeTrace> batch;
    batch.reserve(static_cast<std::size_t>(batch_size));
    double batch_reward = 0.0;
    for (long w = 0; w < batch_size; ++w) {
      const long ep_index = result.episodes_done + w;
      std::mt19937_64 act_rng(mix_seed(cfg.seed, 100000 + ep_index));
      RepositionPolicyFn policy = make_policy(actor, ActMode::Sample, act_rng);
      EpisodeTrace trace =
          run_env_episode(env, result.weights, policy, mix_seed(cfg.seed, 200000 + ep_index),
                          mix_seed(cfg.seed, 300000 + ep_index));
      batch_reward += trace.total_reward;
      batch.push_back(std::move(trace));
    }
    batch_reward /= static_cast<double>(batch_size);

    UpdateStats stats;
    try {
      stats = update(actor, critic, batch, cfg, actor_adam, critic_adam);
    } catch (const RuntimeFault&) {
      if (!cfg.checkpoint_path.empty()) save(cfg.checkpoint_path + ".fault");
      throw;
    }
    result.episodes_done += batch_size;
    ++iteration;

    CurveRow row;
    row.episodes_done = result.episodes_done;
    row.mean_batch_reward = batch_reward;
    row.actor_grad_norm = stats.actor_grad_norm;
    row.critic_grad_norm = stats.critic_grad_norm;
    row.critic_loss = stats.critic_loss;
    const bool last = result.episodes_done >= cfg.episodes;
    if (cfg.eval_every > 0 && (iteration % cfg.eval_every == 0 || last)) {
      std::mt19937_64 eval_rng(mix_seed(cfg.seed, 999));
      RepositionPolicyFn eval_policy = make_policy(actor, cfg.eval_mode, eval_rng);
      row.eval_mean_wait = evaluate_policy(env, result.weights, eval_policy, eval_seeds).mean_wait;
    }
    result.curve.push_back(row);
  }

  save(cfg.checkpoint_path);
  if (!cfg.curve_path.empty()) write_learning_curve(cfg.curve_path, result.curve);
  return result;
}

}  // namespace sams
