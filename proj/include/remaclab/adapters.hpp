#pragma once

#include <string>
#include <vector>

#include "remaclab/policy.hpp"

namespace remaclab {

struct AdapterConfig {
  int rank = 4;
  double alpha = 4.0;  // scale; alpha = rank gives an effective scale of 1
  // Indices of net layers to adapt; empty selects every layer. The time
  // features enter as raw inputs here, so there is no time-projection layer
  // to exclude.
  std::vector<int> target_layers;
  bool mask_embedding = false;
};

struct LoraPair {
  Matrix down;  // r x in
  Matrix up;    // out x r, zero-initialized so attach is a no-op
};

struct AdaptedPolicy {
  PolicyParams base;  // frozen; never mutated by adapter training
  AdapterConfig cfg;
  std::vector<int> targets;
  std::vector<LoraPair> pairs;
  Matrix mask_proj;  // P x P, identity-initialized; used when mask_embedding
  bool enabled = true;
  bool merged = false;
};

AdaptedPolicy attach(const PolicyParams& base, const AdapterConfig& cfg, Rng& rng);

// Adapter parameters relative to the base parameter count.
double adapter_param_ratio(const AdaptedPolicy& a);

// Base net with W <- W + (alpha/r) * up * down on every target layer.
DenseNet effective_net(const AdaptedPolicy& a);

// Raw binary mask when mask_embedding is off, learned projection otherwise.
std::vector<double> mask_features(const AdaptedPolicy& a, const std::vector<double>& mask_raw);

Matrix forward_with_adapters(const AdaptedPolicy& a, const Matrix& chunk_state,
                             const std::vector<double>& obs, double tau_flow,
                             const std::vector<double>& mask_raw, bool enabled);

// Standalone merged parameters; the mask projection, when enabled, is folded
// into the first layer's mask-feature columns. Merging twice is an error.
PolicyParams merge(AdaptedPolicy& a);

// Flat adapter parameter vector: per target [down, up], then mask_proj.
std::vector<double> adapter_to_flat(const AdaptedPolicy& a);
void flat_to_adapter(const std::vector<double>& flat, AdaptedPolicy& a);

// Maps effective-net gradients back to adapter parameters. mask_raw is the
// raw mask fed to the projection for this sample.
std::vector<double> adapter_grads_from_net(const AdaptedPolicy& a, const NetGrads& net_grads,
                                           const std::vector<double>& mask_raw);

std::string adapter_param_name(const AdaptedPolicy& a, size_t flat_index);

void save_adapter(const AdaptedPolicy& a, const std::string& path);
AdaptedPolicy load_adapter(const std::string& path, const PolicyParams& base);

}  // namespace remaclab
