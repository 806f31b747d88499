#pragma once

#include <map>
#include <string>
#include <vector>

#include "remaclab/adapters.hpp"
#include "remaclab/env.hpp"
#include "remaclab/policy.hpp"
#include "remaclab/remac.hpp"
#include "remaclab/runtime.hpp"

namespace remaclab {

struct ExperimentConfig {
  EnvConfig env;
  int dataset_episodes = 200;
  std::vector<int> hidden = {96, 96};
  PretrainConfig pretrain;
  TrainConfig train;
  ChunkSpec chunk;
  DelaySpec delay;
  std::vector<int> delays = {0, 1, 2, 3, 4};
  std::vector<std::string> strategies = {"naive-async", "remac"};
  int episodes_per_cell = 50;
  double te_decay = 0.01;
  double rtc_beta = 0.5;
  int rtc_soft_width = 2;
  SamplerConfig sampler;
  uint64_t master_seed = 0;

  void validate() const;
};

// Strict key-value config: unknown sections or keys are errors.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig default_experiment_config();

struct CellMetrics {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_ticks = 0.0;
  double mean_speed = 0.0;
  double mean_accel = 0.0;
  double boundary_jump = 0.0;  // mean |a_t - a_{t-1}| at chunk-boundary ticks
  double within_jump = 0.0;    // same statistic away from boundaries
};

struct SummaryRow {
  std::string strategy;
  int d = 0;
  int h = 0;           // 0 on aggregated rows
  bool aggregated = false;
  CellMetrics metrics;
};

struct MetricsSummary {
  std::vector<SummaryRow> rows;

  const SummaryRow* find(const std::string& strategy, int d, int h, bool aggregated) const;
};

// Failures contribute exactly `completion_cap` ticks to the mean.
CellMetrics compute_metrics(const std::vector<EpisodeRecord>& records, int completion_cap);

// Deterministic per-episode seed shared across strategies so comparisons are
// paired.
uint64_t episode_seed(uint64_t master, int d, int h, int episode);

ExecStrategy make_strategy(const ExperimentConfig& cfg, const std::string& name);

// For each strategy x delay, runs every simulator-valid execution horizon and
// aggregates per delay. `remac_policy` backs the remac strategy; all others
// use `base_policy`.
MetricsSummary run_sweep(const ExperimentConfig& cfg, const PolicyParams& base_policy,
                         const PolicyParams& remac_policy,
                         std::vector<EpisodeRecord>* all_records = nullptr);

void write_summary_csv(const MetricsSummary& summary, const std::string& path);
MetricsSummary load_summary_csv(const std::string& path);

struct AblationRow {
  std::string axis;
  std::string variant;
  int d = 0;
  double success_rate = 0.0;
  double mean_ticks = 0.0;
};

// axes subset of {component-stack, sigma-schedule, q-interval, mask-embedding,
// freeze-length}; trains one adapter per variant and sweeps it.
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, const PolicyParams& base,
                                      const Dataset& ds, const std::vector<std::string>& axes);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

// Trains the adapter for one named ablation variant and returns the merged
// delay-aware policy plus the rollout strategy name to use with it.
struct VariantPolicy {
  PolicyParams policy;
  std::string strategy;
};
VariantPolicy train_variant(const ExperimentConfig& cfg, const PolicyParams& base,
                            const Dataset& ds, const std::string& axis,
                            const std::string& variant);

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Standalone deterministic SVG line plot.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

// success-vs-d and completion-vs-d from aggregated rows; errors on an empty
// strategy set.
void emit_plots(const MetricsSummary& summary, const std::string& out_dir);

// Per-tick speed overlay for representative episodes of each strategy.
void emit_kinematics_plot(const std::vector<std::pair<std::string, EpisodeRecord>>& episodes,
                          const std::string& path);

int worker_thread_count();

}  // namespace remaclab
