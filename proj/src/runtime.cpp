#include "remaclab/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "remaclab/io.hpp"

namespace remaclab {

std::string corruption_name(DelayCorruption c) {
  switch (c) {
    case DelayCorruption::kNone: return "none";
    case DelayCorruption::kNoisy: return "noisy";
    case DelayCorruption::kSpiky: return "spiky";
    case DelayCorruption::kNoisySpiky: return "noisy+spiky";
  }
  return "?";
}

DelayCorruption corruption_from_name(const std::string& name) {
  if (name == "none") return DelayCorruption::kNone;
  if (name == "noisy") return DelayCorruption::kNoisy;
  if (name == "spiky") return DelayCorruption::kSpiky;
  if (name == "noisy+spiky") return DelayCorruption::kNoisySpiky;
  throw std::invalid_argument("unknown corruption: " + name);
}

std::string strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::kSync: return "sync";
    case StrategyKind::kNaiveAsync: return "naive-async";
    case StrategyKind::kTemporalEnsemble: return "temporal-ensemble";
    case StrategyKind::kRtcLite: return "rtc-lite";
    case StrategyKind::kRemac: return "remac";
  }
  return "?";
}

StrategyKind strategy_from_name(const std::string& name) {
  if (name == "sync") return StrategyKind::kSync;
  if (name == "naive-async") return StrategyKind::kNaiveAsync;
  if (name == "temporal-ensemble") return StrategyKind::kTemporalEnsemble;
  if (name == "rtc-lite") return StrategyKind::kRtcLite;
  if (name == "remac") return StrategyKind::kRemac;
  throw std::invalid_argument("unknown strategy: " + name);
}

int discretize_delay(double latency_ms, double period_ms) {
  if (period_ms <= 0.0) throw std::invalid_argument("discretize_delay: period must be > 0");
  if (latency_ms < 0.0) throw std::invalid_argument("discretize_delay: negative latency");
  return static_cast<int>(std::floor(latency_ms / period_ms));
}

int corrupt_delay(int true_d, DelayCorruption corruption, int max_d, Rng& rng) {
  if (true_d < 0) throw std::invalid_argument("corrupt_delay: negative delay");
  int d = true_d;
  if (corruption == DelayCorruption::kNoisy || corruption == DelayCorruption::kNoisySpiky) {
    d = std::clamp(true_d + rng.uniform_int(-1, 1), 0, max_d);
  }
  if (corruption == DelayCorruption::kSpiky || corruption == DelayCorruption::kNoisySpiky) {
    if (rng.uniform() < 0.10) d = max_d;
  }
  return d;
}

int estimate_delay(const std::deque<int>& history, int window_size) {
  if (history.empty()) throw std::invalid_argument("estimate_delay: empty history");
  if (window_size < 1) throw std::invalid_argument("estimate_delay: window must be >= 1");
  size_t n = std::min<size_t>(window_size, history.size());
  int best = history[history.size() - n];
  for (size_t i = history.size() - n; i < history.size(); ++i) best = std::max(best, history[i]);
  return best;
}

HorizonCheck validate_horizon(int exec_horizon, int delay, int horizon) {
  if (horizon < 1) throw std::invalid_argument("validate_horizon: horizon must be >= 1");
  HorizonCheck check;
  int lo = std::max(1, delay);
  int hi = horizon + 1 - delay;
  if (exec_horizon < lo) {
    check.violation = "h=" + std::to_string(exec_horizon) + " below max(1,d)=" +
                      std::to_string(lo) + "; actions executed during the delay would be missing";
    return check;
  }
  if (exec_horizon > hi) {
    check.violation = "h=" + std::to_string(exec_horizon) + " above P+1-d=" + std::to_string(hi) +
                      "; the action queue would run dry before the next chunk arrives";
    return check;
  }
  check.ok = true;
  return check;
}

std::vector<int> sweep_valid_horizons(int horizon, int delay) {
  std::vector<int> hs;
  for (int h = 1; h <= horizon; ++h) {
    if (!validate_horizon(h, delay, horizon).ok) continue;
    if (h + delay > horizon) continue;  // steady state needs rows d..d+h-1
    hs.push_back(h);
  }
  return hs;
}

Action temporal_ensemble_action(const std::vector<EnsembleMember>& members, double decay) {
  if (members.empty()) throw std::invalid_argument("temporal_ensemble_action: no covering chunk");
  double wsum = 0.0;
  Action out{0.0, 0.0};
  for (const auto& m : members) {
    double w = std::exp(-decay * m.age);
    wsum += w;
    out[0] += w * m.action[0];
    out[1] += w * m.action[1];
  }
  out[0] /= wsum;
  out[1] /= wsum;
  return out;
}

Matrix rtc_lite_integrate(const PolicyParams& policy, const std::vector<double>& obs,
                          const PriorChunk& prior, int delay, double beta, int soft_width, int n) {
  if (n < 1) throw std::invalid_argument("rtc_lite_integrate: n must be >= 1");
  const int P = policy.spec.horizon, D = policy.spec.action_dim;
  require_shape(prior.actions, P, D, "rtc_lite_integrate prior");
  PrefixMask mask = prefix_mask(std::min(delay, P - 1), P);

  Matrix state = prior.actions;
  for (int k = 0; k < n; ++k) {
    Matrix v = velocity(policy, state, obs, static_cast<double>(k) / n, &mask.values);
    for (int t = 0; t < P; ++t) {
      if (t < delay) {
        for (int c = 0; c < D; ++c) state(t, c) = prior.actions(t, c);
        continue;
      }
      for (int c = 0; c < D; ++c) state(t, c) += v(t, c) / n;
      if (soft_width > 0 && t < delay + soft_width && t < prior.valid_prefix) {
        double pull = beta * (1.0 - static_cast<double>(t - delay) / soft_width);
        for (int c = 0; c < D; ++c)
          state(t, c) += pull * (prior.actions(t, c) - state(t, c));
      }
    }
  }
  return state;
}

namespace {

struct PendingChunk {
  long id = 0;
  int arrival_tick = 0;
  int request_tick = 0;
  int reported_d = 0;
};

}  // namespace

EpisodeRecord run_episode(const EnvConfig& env_cfg, const PolicyParams& policy,
                          const ExecStrategy& strategy, const ChunkSpec& chunk_spec,
                          const DelaySpec& delay_spec, uint64_t seed) {
  chunk_spec.validate();
  const int P = chunk_spec.horizon, h = chunk_spec.exec_horizon, n = chunk_spec.integration_steps;
  if (policy.spec.horizon != P || policy.spec.action_dim != chunk_spec.action_dim)
    throw std::invalid_argument("run_episode: policy/chunk spec mismatch");

  EpisodeRecord rec;
  rec.seed = seed;
  rec.exec_horizon = h;
  rec.horizon = P;

  EnvState state = env_reset(env_cfg, seed);
  Rng rng_policy(seed, streams::kPolicy);
  Rng rng_delay(seed, streams::kDelayModel);

  const bool is_sync = strategy.kind == StrategyKind::kSync;
  const bool is_te = strategy.kind == StrategyKind::kTemporalEnsemble;
  double latency = delay_spec.latency_ms();
  if (strategy.kind == StrategyKind::kRtcLite) latency *= 1.0 + delay_spec.rtc_surcharge;
  const int true_d = discretize_delay(latency, delay_spec.period_ms);
  const int max_valid_d = std::max(0, P - h);

  std::deque<int> delay_history;
  std::vector<PendingChunk> pending;
  Matrix prev_predicted;
  long current_chunk = -1;  // index into rec.chunks
  long next_id = 0;

  auto generate_chunk = [&](const std::vector<double>& obs, bool first) -> ChunkRow {
    ChunkRow row;
    row.id = next_id++;
    row.true_d = true_d;
    row.reported_d = corrupt_delay(true_d, delay_spec.corruption, max_valid_d, rng_delay);
    if (delay_history.empty()) {
      row.d_hat = delay_spec.estimate_prior;
      row.d_hat_from_prior = true;
    } else {
      row.d_hat = estimate_delay(delay_history, delay_spec.estimate_window);
    }
    switch (strategy.kind) {
      case StrategyKind::kSync:
      case StrategyKind::kNaiveAsync:
      case StrategyKind::kTemporalEnsemble:
        row.actions = integrate(policy, obs, sample_chunk_prior(policy, rng_policy), n);
        break;
      case StrategyKind::kRemac: {
        int freeze = strategy.sampler.freeze == FreezeLength::kDelay
                         ? std::min(row.d_hat, P - 1)
                         : P - h;
        if (first || freeze == 0) {
          // Nothing to preserve: no chunk has been committed yet, or the
          // delay estimate is zero, so the standard sampling rule applies.
          row.actions = first ? first_chunk(policy, obs, strategy.sampler, rng_policy)
                              : integrate(policy, obs, sample_chunk_prior(policy, rng_policy), n);
        } else {
          PriorChunk prior = build_prior(prev_predicted, h, P);
          PrefixMask mask = prefix_mask(freeze, P);
          row.actions = prefix_preserved_integrate(policy, obs, prior, mask, n);
          row.has_prior = true;
          row.prior = prior.actions;
        }
        break;
      }
      case StrategyKind::kRtcLite: {
        if (first) {
          row.actions = integrate(policy, obs, sample_chunk_prior(policy, rng_policy), n);
        } else {
          PriorChunk prior = build_prior(prev_predicted, h, P);
          row.actions = rtc_lite_integrate(policy, obs, prior, std::min(row.d_hat, P - 1),
                                           strategy.rtc_beta, strategy.rtc_soft_width, n);
          row.has_prior = true;
          row.prior = prior.actions;
        }
        break;
      }
    }
    for (double x : row.actions.data)
      if (!std::isfinite(x)) throw std::runtime_error("run_episode: policy output is not finite");
    prev_predicted = row.actions;
    return row;
  };

  if (is_sync) {
    int idle_per_chunk =
        static_cast<int>(std::ceil(latency / delay_spec.period_ms - 1e-12));
    int tick = 0;
    bool done = false, success = false;
    while (!done) {
      std::vector<double> obs = observe(env_cfg, state);
      ChunkRow chunk = generate_chunk(obs, rec.chunks.empty());
      chunk.request_tick = tick;
      chunk.arrival_tick = tick + idle_per_chunk;
      delay_history.push_back(chunk.reported_d);
      rec.chunks.push_back(chunk);
      // The robot pauses until the chunk is available.
      for (int k = 0; k < idle_per_chunk && !done; ++k) {
        TickRow t;
        t.tick = tick;
        t.obs = observe(env_cfg, state);
        t.idle = true;
        rec.ticks.push_back(t);
        StepResult r = env_step(env_cfg, state, {0.0, 0.0});
        done = r.done;
        success = r.success;
        ++tick;
      }
      for (int i = 0; i < h && !done; ++i) {
        TickRow t;
        t.tick = tick;
        t.obs = observe(env_cfg, state);
        t.action = {chunk.actions(i, 0), chunk.actions(i, 1)};
        t.chunk_id = chunk.id;
        t.in_chunk_idx = i;
        t.queue_depth = P - i;
        rec.ticks.push_back(t);
        StepResult r = env_step(env_cfg, state, t.action);
        done = r.done;
        success = r.success;
        ++tick;
      }
    }
    rec.success = success;
    rec.completion_tick = tick;
    return rec;
  }

  // Asynchronous modes: one request per execution horizon, arrival d ticks
  // later, continuous execution in between.
  bool done = false, success = false;
  int tick = 0;
  std::vector<long> active;  // arrived chunk indices (TE keeps several)
  while (!done) {
    if (tick % h == 0) {
      std::vector<double> obs = observe(env_cfg, state);
      bool first = rec.chunks.empty();
      ChunkRow chunk = generate_chunk(obs, first);
      chunk.request_tick = tick;
      chunk.arrival_tick = first ? tick : tick + true_d;
      PendingChunk p;
      p.id = chunk.id;
      p.arrival_tick = chunk.arrival_tick;
      p.request_tick = chunk.request_tick;
      p.reported_d = chunk.reported_d;
      rec.chunks.push_back(chunk);
      pending.push_back(p);
    }
    for (auto it = pending.begin(); it != pending.end();) {
      if (it->arrival_tick <= tick) {
        delay_history.push_back(it->reported_d);
        active.push_back(it->id);
        current_chunk = it->id;
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
    active.erase(std::remove_if(active.begin(), active.end(),
                                [&](long id) {
                                  return tick - rec.chunks[id].request_tick >= P;
                                }),
                 active.end());

    TickRow t;
    t.tick = tick;
    t.obs = observe(env_cfg, state);
    if (is_te) {
      std::vector<EnsembleMember> members;
      long newest = -1;
      for (long id : active) newest = std::max(newest, id);
      for (long id : active) {
        int idx = tick - rec.chunks[id].request_tick;
        if (idx < 0 || idx >= P) continue;
        EnsembleMember m;
        m.action = {rec.chunks[id].actions(idx, 0), rec.chunks[id].actions(idx, 1)};
        m.age = static_cast<double>(newest - id);
        members.push_back(m);
      }
      t.action = temporal_ensemble_action(members, strategy.te_decay);
      t.chunk_id = newest;
      t.in_chunk_idx = tick - rec.chunks[newest].request_tick;
      t.queue_depth = static_cast<int>(members.size());
    } else {
      if (current_chunk < 0) throw std::runtime_error("run_episode: no chunk available at tick 0");
      const ChunkRow& c = rec.chunks[current_chunk];
      int idx = tick - c.request_tick;
      if (idx < 0 || idx >= P)
        throw std::runtime_error("run_episode: action queue underrun at tick " +
                                 std::to_string(tick));
      t.action = {c.actions(idx, 0), c.actions(idx, 1)};
      t.chunk_id = c.id;
      t.in_chunk_idx = idx;
      t.queue_depth = P - idx;
    }
    rec.ticks.push_back(t);
    StepResult r = env_step(env_cfg, state, t.action);
    done = r.done;
    success = r.success;
    ++tick;
  }
  rec.success = success;
  rec.completion_tick = tick;
  return rec;
}

void save_record(const EpisodeRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_record: cannot open " + path);
  out << "remac-episode v1\n";
  out << "seed " << rec.seed << "\n";
  out << "horizon " << rec.horizon << "\n";
  out << "exec_horizon " << rec.exec_horizon << "\n";
  out << "success " << (rec.success ? 1 : 0) << "\n";
  out << "completion_tick " << rec.completion_tick << "\n";
  out << "ticks " << rec.ticks.size() << "\n";
  out << "chunks " << rec.chunks.size() << "\n";
  for (const auto& t : rec.ticks) {
    out << "tick " << t.tick;
    for (double o : t.obs) out << " " << fmt_fixed(o);
    out << " | " << fmt_fixed(t.action[0]) << " " << fmt_fixed(t.action[1]) << " " << t.chunk_id
        << " " << t.in_chunk_idx << " " << t.queue_depth << (t.idle ? " idle" : "") << "\n";
  }
  for (const auto& c : rec.chunks) {
    out << "chunk " << c.id << " request " << c.request_tick << " arrival " << c.arrival_tick
        << " d " << c.true_d << " reported " << c.reported_d << " dhat " << c.d_hat
        << (c.d_hat_from_prior ? " prior" : "") << "\n";
  }
}

}  // namespace remaclab
