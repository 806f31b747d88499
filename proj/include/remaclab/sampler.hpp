#pragma once

#include "remaclab/policy.hpp"
#include "remaclab/remac.hpp"

namespace remaclab {

struct PriorChunk {
  Matrix actions;        // P x D; frozen prefix then zeros
  int valid_prefix = 0;  // P - h rows carried over from the previous chunk
  long source_chunk = -1;
};

enum class FreezeLength { kDelay, kOverlap };
enum class FirstChunkInit { kZeros, kGaussian };

struct SamplerConfig {
  FreezeLength freeze = FreezeLength::kDelay;
  FirstChunkInit first_chunk = FirstChunkInit::kZeros;
  int integration_steps = 10;
};

// Rows 0..P-h-1 copy the previous chunk's rows h..P-1; the rest are zero.
PriorChunk build_prior(const Matrix& prev_chunk, int exec_horizon, int horizon);

// Eq-style masked Euler update: masked-in rows integrate the velocity field,
// masked-out rows are copied from the prior every step (bit-exact freeze).
Matrix prefix_preserved_integrate(const PolicyParams& policy, const std::vector<double>& obs,
                                  const PriorChunk& prior, const PrefixMask& mask, int n);

// Rollout initialization: no executed actions exist yet, so integrate the
// plain rule from the configured init state.
Matrix first_chunk(const PolicyParams& policy, const std::vector<double>& obs,
                   const SamplerConfig& cfg, Rng& rng);

}  // namespace remaclab
