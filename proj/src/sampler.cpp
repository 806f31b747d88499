#include "remaclab/sampler.hpp"

namespace remaclab {

PriorChunk build_prior(const Matrix& prev_chunk, int exec_horizon, int horizon) {
  if (exec_horizon < 1 || exec_horizon > horizon)
    throw std::invalid_argument("build_prior: exec_horizon out of [1, P]");
  if (prev_chunk.rows != horizon)
    throw std::invalid_argument("build_prior: previous chunk has wrong horizon");
  PriorChunk prior;
  prior.actions = Matrix(horizon, prev_chunk.cols);
  prior.valid_prefix = horizon - exec_horizon;
  for (int r = 0; r < prior.valid_prefix; ++r)
    for (int c = 0; c < prev_chunk.cols; ++c)
      prior.actions(r, c) = prev_chunk(exec_horizon + r, c);
  return prior;
}

Matrix prefix_preserved_integrate(const PolicyParams& policy, const std::vector<double>& obs,
                                  const PriorChunk& prior, const PrefixMask& mask, int n) {
  if (n < 1) throw std::invalid_argument("prefix_preserved_integrate: n must be >= 1");
  if (mask.horizon() != policy.spec.horizon)
    throw std::invalid_argument("prefix_preserved_integrate: mask length mismatch");
  require_shape(prior.actions, policy.spec.horizon, policy.spec.action_dim,
                "prefix_preserved_integrate prior");

  Matrix state = prior.actions;  // initial action state comes from the prior
  const int D = policy.spec.action_dim;
  for (int k = 0; k < n; ++k) {
    Matrix v = velocity(policy, state, obs, static_cast<double>(k) / n, &mask.values);
    for (int t = 0; t < state.rows; ++t) {
      if (mask.values[t] != 0.0) {
        for (int c = 0; c < D; ++c) state(t, c) += v(t, c) / n;
      } else {
        for (int c = 0; c < D; ++c) state(t, c) = prior.actions(t, c);
      }
    }
  }
  return state;
}

Matrix first_chunk(const PolicyParams& policy, const std::vector<double>& obs,
                   const SamplerConfig& cfg, Rng& rng) {
  Matrix init(policy.spec.horizon, policy.spec.action_dim);
  if (cfg.first_chunk == FirstChunkInit::kGaussian) init = sample_chunk_prior(policy, rng);
  return integrate(policy, obs, init, cfg.integration_steps);
}

}  // namespace remaclab
