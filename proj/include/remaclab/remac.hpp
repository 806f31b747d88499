#pragma once

#include <string>
#include <vector>

#include "remaclab/adapters.hpp"
#include "remaclab/env.hpp"
#include "remaclab/policy.hpp"

namespace remaclab {

// Binary suffix selector: entry t is 1 iff t >= delay.
struct PrefixMask {
  std::vector<double> values;
  int delay = 0;

  int horizon() const { return static_cast<int>(values.size()); }
};

PrefixMask prefix_mask(int delay, int horizon);

// Delay-sampling interval [q, upper] with q annealed from upper down to lower.
struct MaskIntervalSchedule {
  int upper = 4;          // q_max
  int lower = 0;          // final q_min
  double anneal_fraction = 1.0;

  void validate(int horizon) const;
};

int interval_lower_bound(double progress, const MaskIntervalSchedule& sched);
int sample_delay(double progress, const MaskIntervalSchedule& sched, Rng& rng);

enum class SigmaSchedule {
  kPiecewiseLinear,  // plateau at 1 for the first 20%, then linear to 0
  kLinear,
  kCosine,
  kStep,
  kConstantOne,
  kConstantZero,
};

std::string sigma_schedule_name(SigmaSchedule s);
SigmaSchedule sigma_schedule_from_name(const std::string& name);

double curriculum_sigma(double progress, SigmaSchedule kind);

// Bernoulli(sigma) pick between the ground-truth chunk and the (detached)
// policy-generated chunk, drawn once per sample.
Matrix self_condition_mix(const Matrix& ground_truth, const Matrix& generated, double sigma,
                          Rng& rng);

double masked_fm_loss(const Matrix& pred_flow, const Matrix& target_flow, const PrefixMask& mask);
double delta_loss(const Matrix& pred_flow, const Matrix& base_flow, const Matrix& target_flow,
                  const PrefixMask& mask);
double total_loss(double loss_masked, double loss_delta, double weight_masked,
                  double weight_delta);

struct LossBreakdown {
  double masked = 0.0;
  double delta = 0.0;
  double total = 0.0;
};

enum class DelayResample { kEpoch, kBatch };

struct TrainConfig {
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double weight_masked = 0.01;   // lambda_m
  double weight_delta = 0.01;    // lambda_delta
  MaskIntervalSchedule interval;
  SigmaSchedule sigma_kind = SigmaSchedule::kPiecewiseLinear;
  DelayResample delay_resample = DelayResample::kBatch;
  AdapterConfig adapter;
  uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  std::vector<int> delays_used;
  double sigma = 0.0;
  LossBreakdown loss;
  double grad_norm = 0.0;
};

struct RemacResult {
  AdaptedPolicy policy;
  std::vector<EpochLog> log;
};

// Fine-tunes adapters on the frozen base policy: per batch, sample a delay and
// its mask, generate a base-policy chunk for self-conditioning, build the flow
// sample from the mixed chunk, and update adapter parameters on the combined
// masked + residual objective.
RemacResult remac_train(const PolicyParams& base, const TrainConfig& cfg, const Dataset& ds);

void write_training_log(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace remaclab
