#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "remaclab/matrix.hpp"
#include "remaclab/rng.hpp"

namespace remaclab {

using Vec2 = std::array<double, 2>;

enum class EnvVariant { kPointReach, kTrackIntercept };

std::string env_variant_name(EnvVariant v);
EnvVariant env_variant_from_name(const std::string& name);

struct EnvConfig {
  EnvVariant variant = EnvVariant::kPointReach;
  double dynamics_noise = 0.0;        // std of per-step velocity noise
  double goal_jump_prob = 0.0;        // point-reach: goal teleport probability per step
  bool obstacle = false;
  double obstacle_radius = 0.15;
  int max_steps = 120;
  double success_tol = 0.07;
  // Dynamics constants. One env step is one controller tick.
  double accel_scale = 0.02;
  double drag = 0.1;
  double goal_speed = 0.02;           // track-intercept: magnitude scale of goal velocity
  int goal_revel_period = 25;         // track-intercept: ticks between goal velocity resamples

  void validate() const;
};

struct Obstacle {
  Vec2 center{0.0, 0.0};
  double radius = 0.15;
};

struct EnvState {
  Vec2 pos{0.0, 0.0};
  Vec2 vel{0.0, 0.0};
  Vec2 goal{0.0, 0.0};
  Vec2 goal_vel{0.0, 0.0};
  std::optional<Obstacle> obstacle;
  int tick = 0;
  int expert_mode = 1;  // +1 or -1: which side the scripted expert detours around
  Rng rng{0};
};

struct StepResult {
  bool done = false;
  bool success = false;
};

using Action = Vec2;  // acceleration command, clamped to [-1,1]^2 at execution

int obs_dim(const EnvConfig& cfg);
std::vector<double> observe(const EnvConfig& cfg, const EnvState& state);

EnvState env_reset(const EnvConfig& cfg, uint64_t seed);
StepResult env_step(const EnvConfig& cfg, EnvState& state, const Action& action);
Action expert_action(const EnvConfig& cfg, const EnvState& state);

struct Demonstration {
  std::vector<std::vector<double>> observations;
  std::vector<Action> actions;
  uint64_t seed = 0;
  int expert_mode = 1;
};

// One (observation, action-chunk) supervision pair; chunk is P x D row-major.
struct ChunkPair {
  std::vector<double> obs;
  Matrix chunk;
  bool padded = false;
};

struct Dataset {
  EnvConfig env;
  int horizon = 8;     // P
  int action_dim = 2;  // D
  uint64_t seed = 0;
  int episode_count = 0;
  std::vector<ChunkPair> pairs;
};

// Rolls out the scripted expert; only successful episodes are retained.
std::optional<Demonstration> run_expert_episode(const EnvConfig& cfg, uint64_t seed);

// Stride-1 chunk extraction with tail padding by final-action repetition.
// Throws if the expert fails on more than 20% of attempted episodes.
Dataset generate_dataset(const EnvConfig& cfg, int n_episodes, int horizon, uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace remaclab
