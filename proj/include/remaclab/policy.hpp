#pragma once

#include <optional>
#include <string>
#include <vector>

#include "remaclab/env.hpp"
#include "remaclab/matrix.hpp"
#include "remaclab/net.hpp"
#include "remaclab/rng.hpp"

namespace remaclab {

struct ChunkSpec {
  int horizon = 8;          // P: actions per predicted chunk
  int action_dim = 2;       // D
  int exec_horizon = 4;     // h: actions executed per chunk, 1 <= h <= P
  int integration_steps = 10;

  void validate() const {
    if (horizon < 1 || action_dim < 1) throw std::invalid_argument("ChunkSpec: bad shape");
    if (exec_horizon < 1 || exec_horizon > horizon)
      throw std::invalid_argument("ChunkSpec: exec_horizon out of [1, P]");
    if (integration_steps < 1) throw std::invalid_argument("ChunkSpec: integration_steps < 1");
  }
};

// Per-dimension normalization; applied to net inputs, inverted on outputs.
struct NormStats {
  std::vector<double> obs_mean, obs_std;
  std::vector<double> act_mean, act_std;  // length D
};

NormStats compute_norm_stats(const Dataset& ds);

struct PolicyParams {
  DenseNet net;
  NormStats norm;
  ChunkSpec spec;
  bool mask_input = true;  // whether the net takes P prefix-mask features
  int obs_dim = 0;

  int expected_input_dim() const;
};

// Flow time is conditioned as the raw scalar plus sin/cos at 4 frequencies.
std::vector<double> time_features(double tau_flow);
constexpr int kTimeFeatureDim = 9;

std::vector<double> ones_mask_features(int horizon);

PolicyParams make_policy(const ChunkSpec& spec, int obs_dim, const std::vector<int>& hidden,
                         bool mask_input, Rng& rng);

Matrix normalize_chunk(const PolicyParams& p, const Matrix& chunk);
Matrix denormalize_chunk(const PolicyParams& p, const Matrix& chunk_norm);
std::vector<double> normalize_obs(const PolicyParams& p, const std::vector<double>& obs);

// Net input layout: [chunk (normalized, flattened P*D), obs (normalized),
// time features, mask features when enabled].
std::vector<double> assemble_input(const PolicyParams& p, const Matrix& chunk_norm,
                                   const std::vector<double>& obs_norm, double tau_flow,
                                   const std::vector<double>& mask_features);

// Flow estimate in raw action units for a raw-space chunk state.
Matrix velocity(const PolicyParams& p, const Matrix& chunk_state, const std::vector<double>& obs,
                double tau_flow, const std::vector<double>* mask_features = nullptr);

// Euler integration of the velocity field over tau = 0, 1/n, ..., (n-1)/n.
Matrix integrate(const PolicyParams& p, const std::vector<double>& obs, const Matrix& initial,
                 int n, const std::vector<double>* mask_features = nullptr);

// Draw from the policy's action-space prior (standard normal in normalized
// coordinates).
Matrix sample_chunk_prior(const PolicyParams& p, Rng& rng);

struct FlowSample {
  double s = 0.0;     // interpolation time in [0,1]
  Matrix noisy;       // (1-s) * noise + s * target
  Matrix noise;       // the initial draw
  Matrix target_flow; // target - noise
};

FlowSample make_flow_sample(const Matrix& target, Rng& rng);

struct PretrainConfig {
  int epochs = 60;
  int batch_size = 64;
  double learning_rate = 1e-3;
};

// Minibatch Adam on the l2 flow-matching objective; returns the per-epoch
// mean training loss. Aborts on non-finite loss.
std::vector<double> pretrain(PolicyParams& params, const Dataset& ds, const PretrainConfig& cfg,
                             Rng& rng);

void save_policy(const PolicyParams& p, const std::string& path);
PolicyParams load_policy(const std::string& path);

// Content hash of the float32 parameter payload, as written to disk.
uint64_t policy_hash(const PolicyParams& p);

}  // namespace remaclab
