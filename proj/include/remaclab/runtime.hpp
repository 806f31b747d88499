#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "remaclab/env.hpp"
#include "remaclab/policy.hpp"
#include "remaclab/remac.hpp"
#include "remaclab/sampler.hpp"

namespace remaclab {

enum class DelayCorruption { kNone, kNoisy, kSpiky, kNoisySpiky };

std::string corruption_name(DelayCorruption c);
DelayCorruption corruption_from_name(const std::string& name);

struct DelaySpec {
  double period_ms = 20.0;       // controller period (simulated ms)
  double base_latency_ms = 0.0;  // continuous inference latency
  double injection_ms = 0.0;     // extra injected latency
  DelayCorruption corruption = DelayCorruption::kNone;
  double rtc_surcharge = 0.6;    // fractional latency overhead of guided sampling
  int estimate_window = 3;
  int estimate_prior = 0;        // d-hat before any measurement exists

  double latency_ms() const { return base_latency_ms + injection_ms; }
};

struct DelaySample {
  double latency_ms = 0.0;
  int discrete = 0;
};

enum class StrategyKind { kSync, kNaiveAsync, kTemporalEnsemble, kRtcLite, kRemac };

std::string strategy_name(StrategyKind k);
StrategyKind strategy_from_name(const std::string& name);

struct ExecStrategy {
  StrategyKind kind = StrategyKind::kNaiveAsync;
  double te_decay = 0.01;   // temporal ensembling weight decay m
  double rtc_beta = 0.5;    // guidance strength
  int rtc_soft_width = 2;   // rows beyond the hard-frozen prefix that get pulled
  SamplerConfig sampler;
};

int discretize_delay(double latency_ms, double period_ms);
int corrupt_delay(int true_d, DelayCorruption corruption, int max_d, Rng& rng);
int estimate_delay(const std::deque<int>& history, int window_size);

struct HorizonCheck {
  bool ok = false;
  std::string violation;
};

// Bounds: max(1, d) <= h <= P+1-d.
HorizonCheck validate_horizon(int exec_horizon, int delay, int horizon);

// Horizons the steady-state simulator can actually run without starving the
// action queue: additionally requires h + d <= P.
std::vector<int> sweep_valid_horizons(int horizon, int delay);

struct TickRow {
  int tick = 0;
  std::vector<double> obs;
  Action action{0.0, 0.0};
  long chunk_id = -1;    // -1 while idling (sync only)
  int in_chunk_idx = -1;
  int queue_depth = 0;
  bool idle = false;
};

struct ChunkRow {
  long id = 0;
  int request_tick = 0;
  int arrival_tick = 0;
  int true_d = 0;
  int reported_d = 0;
  int d_hat = 0;
  bool d_hat_from_prior = false;
  bool has_prior = false;
  Matrix prior;
  Matrix actions;
};

struct EpisodeRecord {
  std::vector<TickRow> ticks;
  std::vector<ChunkRow> chunks;
  bool success = false;
  int completion_tick = 0;
  uint64_t seed = 0;
  int exec_horizon = 0;
  int horizon = 0;
};

// One weighted-average contributor for temporal ensembling.
struct EnsembleMember {
  Action action{0.0, 0.0};
  double age = 0.0;  // chunks since issuance; newest is 0
};

Action temporal_ensemble_action(const std::vector<EnsembleMember>& members, double decay);

// Simplified guided inpainting: rows below the delay are hard-frozen to the
// prior, the next soft_width rows are pulled toward it with linearly fading
// strength, the rest integrate freely.
Matrix rtc_lite_integrate(const PolicyParams& policy, const std::vector<double>& obs,
                          const PriorChunk& prior, int delay, double beta, int soft_width, int n);

// Deterministic discrete-event rollout of one episode. `policy` generates
// every chunk; pass the merged delay-aware policy for the remac strategy and
// the pretrained policy otherwise.
EpisodeRecord run_episode(const EnvConfig& env_cfg, const PolicyParams& policy,
                          const ExecStrategy& strategy, const ChunkSpec& chunk_spec,
                          const DelaySpec& delay_spec, uint64_t seed);

void save_record(const EpisodeRecord& rec, const std::string& path);

}  // namespace remaclab
