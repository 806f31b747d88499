#include "remaclab/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "remaclab/io.hpp"

namespace remaclab {

namespace {

constexpr double kArena = 1.0;
constexpr double kSpawn = 0.9;  // spawn margin from the walls
constexpr double kMinStartGoalDist = 0.5;
constexpr double kDetourMargin = 0.14;
constexpr double kExpertKp = 0.04;
constexpr double kExpertKd = 0.3;

double clampd(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

std::string env_variant_name(EnvVariant v) {
  return v == EnvVariant::kPointReach ? "point-reach" : "track-intercept";
}

EnvVariant env_variant_from_name(const std::string& name) {
  if (name == "point-reach") return EnvVariant::kPointReach;
  if (name == "track-intercept") return EnvVariant::kTrackIntercept;
  throw std::invalid_argument("unknown env variant: " + name);
}

void EnvConfig::validate() const {
  if (goal_jump_prob < 0.0 || goal_jump_prob > 1.0)
    throw std::invalid_argument("EnvConfig: goal_jump_prob out of [0,1]");
  if (success_tol <= 0.0) throw std::invalid_argument("EnvConfig: success_tol must be > 0");
  if (max_steps < 1) throw std::invalid_argument("EnvConfig: max_steps must be >= 1");
  if (dynamics_noise < 0.0) throw std::invalid_argument("EnvConfig: negative dynamics_noise");
}

int obs_dim(const EnvConfig& cfg) { return cfg.obstacle ? 8 : 6; }

std::vector<double> observe(const EnvConfig& cfg, const EnvState& s) {
  std::vector<double> o = {s.pos[0], s.pos[1], s.vel[0], s.vel[1],
                           s.goal[0] - s.pos[0], s.goal[1] - s.pos[1]};
  if (cfg.obstacle) {
    o.push_back(s.obstacle->center[0] - s.pos[0]);
    o.push_back(s.obstacle->center[1] - s.pos[1]);
  }
  return o;
}

EnvState env_reset(const EnvConfig& cfg, uint64_t seed) {
  cfg.validate();
  EnvState s;
  s.rng = Rng(seed, streams::kEpisode);
  for (;;) {
    s.pos = {s.rng.uniform(-kSpawn, kSpawn), s.rng.uniform(-kSpawn, kSpawn)};
    s.goal = {s.rng.uniform(-kSpawn, kSpawn), s.rng.uniform(-kSpawn, kSpawn)};
    if (dist(s.pos, s.goal) >= kMinStartGoalDist) break;
  }
  s.vel = {0.0, 0.0};
  if (cfg.variant == EnvVariant::kTrackIntercept) {
    s.goal_vel = {s.rng.uniform(-cfg.goal_speed, cfg.goal_speed),
                  s.rng.uniform(-cfg.goal_speed, cfg.goal_speed)};
  }
  if (cfg.obstacle) {
    Obstacle ob;
    ob.center = {0.5 * (s.pos[0] + s.goal[0]), 0.5 * (s.pos[1] + s.goal[1])};
    ob.radius = cfg.obstacle_radius;
    s.obstacle = ob;
  }
  s.expert_mode = s.rng.bernoulli(0.5) ? 1 : -1;
  s.tick = 0;
  return s;
}

StepResult env_step(const EnvConfig& cfg, EnvState& s, const Action& action) {
  // Position advances with the pre-update velocity; zero action leaves a
  // resting state unchanged.
  s.pos[0] += s.vel[0];
  s.pos[1] += s.vel[1];
  for (int i = 0; i < 2; ++i) {
    if (s.pos[i] > kArena) { s.pos[i] = kArena; s.vel[i] = 0.0; }
    if (s.pos[i] < -kArena) { s.pos[i] = -kArena; s.vel[i] = 0.0; }
  }

  for (int i = 0; i < 2; ++i) {
    double a = clampd(action[i], -1.0, 1.0);
    s.vel[i] += cfg.accel_scale * a - cfg.drag * s.vel[i];
    if (cfg.dynamics_noise > 0.0) s.vel[i] += s.rng.normal(0.0, cfg.dynamics_noise);
  }

  // Goal dynamics.
  if (cfg.variant == EnvVariant::kPointReach) {
    if (cfg.goal_jump_prob > 0.0 && s.rng.bernoulli(cfg.goal_jump_prob)) {
      s.goal = {s.rng.uniform(-kSpawn, kSpawn), s.rng.uniform(-kSpawn, kSpawn)};
    }
  } else {
    if (cfg.goal_revel_period > 0 && s.tick > 0 && s.tick % cfg.goal_revel_period == 0) {
      s.goal_vel = {s.rng.uniform(-cfg.goal_speed, cfg.goal_speed),
                    s.rng.uniform(-cfg.goal_speed, cfg.goal_speed)};
    }
    for (int i = 0; i < 2; ++i) {
      s.goal[i] += s.goal_vel[i];
      if (s.goal[i] > kSpawn) { s.goal[i] = kSpawn; s.goal_vel[i] = -s.goal_vel[i]; }
      if (s.goal[i] < -kSpawn) { s.goal[i] = -kSpawn; s.goal_vel[i] = -s.goal_vel[i]; }
    }
  }

  s.tick += 1;

  StepResult r;
  if (s.obstacle && dist(s.pos, s.obstacle->center) < s.obstacle->radius) {
    r.done = true;
    r.success = false;
    return r;
  }
  if (dist(s.pos, s.goal) < cfg.success_tol) {
    r.done = true;
    r.success = true;
    return r;
  }
  if (s.tick >= cfg.max_steps) r.done = true;
  return r;
}

Action expert_action(const EnvConfig& cfg, const EnvState& s) {
  Vec2 target = s.goal;
  if (s.obstacle) {
    const Vec2& c = s.obstacle->center;
    double gx = s.goal[0] - s.pos[0], gy = s.goal[1] - s.pos[1];
    double glen = std::hypot(gx, gy);
    if (glen > 1e-9) {
      double ux = gx / glen, uy = gy / glen;
      double cx = c[0] - s.pos[0], cy = c[1] - s.pos[1];
      double along = cx * ux + cy * uy;
      double lateral = -cx * uy + cy * ux;
      double clearance = s.obstacle->radius + kDetourMargin;
      if (along > 0.0 && along < glen && std::abs(lateral) < clearance) {
        // Detour via the tangent waypoint on the episode's chosen side.
        double px = -uy * s.expert_mode, py = ux * s.expert_mode;
        target = {c[0] + px * clearance, c[1] + py * clearance};
      }
    }
  }
  double ex = target[0] - s.pos[0], ey = target[1] - s.pos[1];
  Action a;
  a[0] = clampd((kExpertKp * ex - kExpertKd * s.vel[0]) / cfg.accel_scale, -1.0, 1.0);
  a[1] = clampd((kExpertKp * ey - kExpertKd * s.vel[1]) / cfg.accel_scale, -1.0, 1.0);
  return a;
}

std::optional<Demonstration> run_expert_episode(const EnvConfig& cfg, uint64_t seed) {
  EnvState s = env_reset(cfg, seed);
  Demonstration demo;
  demo.seed = seed;
  demo.expert_mode = s.expert_mode;
  for (;;) {
    Action a = expert_action(cfg, s);
    demo.observations.push_back(observe(cfg, s));
    demo.actions.push_back(a);
    StepResult r = env_step(cfg, s, a);
    if (r.done) {
      if (r.success) return demo;
      return std::nullopt;
    }
  }
}

Dataset generate_dataset(const EnvConfig& cfg, int n_episodes, int horizon, uint64_t seed) {
  if (horizon < 1) throw std::invalid_argument("generate_dataset: horizon must be >= 1");
  Dataset ds;
  ds.env = cfg;
  ds.horizon = horizon;
  ds.action_dim = 2;
  ds.seed = seed;

  Rng seeder(seed, streams::kData);
  int collected = 0, attempts = 0;
  std::vector<Demonstration> demos;
  while (collected < n_episodes) {
    uint64_t ep_seed = seeder.next_u64();
    ++attempts;
    auto demo = run_expert_episode(cfg, ep_seed);
    if (demo) {
      demos.push_back(std::move(*demo));
      ++collected;
    }
    if (attempts >= 20 && static_cast<double>(attempts - collected) > 0.2 * attempts)
      throw std::runtime_error("generate_dataset: expert failure rate exceeds 20%");
  }
  ds.episode_count = collected;

  for (const auto& demo : demos) {
    int len = static_cast<int>(demo.actions.size());
    for (int t = 0; t < len; ++t) {
      ChunkPair pair;
      pair.obs = demo.observations[t];
      pair.chunk = Matrix(horizon, 2);
      for (int i = 0; i < horizon; ++i) {
        int src = std::min(t + i, len - 1);
        pair.chunk(i, 0) = demo.actions[src][0];
        pair.chunk(i, 1) = demo.actions[src][1];
        if (t + i > len - 1) pair.padded = true;
      }
      ds.pairs.push_back(std::move(pair));
    }
  }
  return ds;
}

namespace {

void write_env_header(std::ostream& out, const EnvConfig& cfg) {
  out << "variant " << env_variant_name(cfg.variant) << "\n";
  out << "dynamics_noise " << fmt_double(cfg.dynamics_noise) << "\n";
  out << "goal_jump_prob " << fmt_double(cfg.goal_jump_prob) << "\n";
  out << "obstacle " << (cfg.obstacle ? 1 : 0) << "\n";
  out << "obstacle_radius " << fmt_double(cfg.obstacle_radius) << "\n";
  out << "max_steps " << cfg.max_steps << "\n";
  out << "success_tol " << fmt_double(cfg.success_tol) << "\n";
  out << "accel_scale " << fmt_double(cfg.accel_scale) << "\n";
  out << "drag " << fmt_double(cfg.drag) << "\n";
  out << "goal_speed " << fmt_double(cfg.goal_speed) << "\n";
  out << "goal_revel_period " << cfg.goal_revel_period << "\n";
}

std::map<std::string, std::string> read_header(std::istream& in, const std::string& magic) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("truncated header");
  if (line != magic)
    throw std::runtime_error("schema mismatch: expected '" + magic + "', got '" + line + "'");
  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    if (line == "payload") return kv;
    auto sp = line.find(' ');
    if (sp == std::string::npos) throw std::runtime_error("malformed header line: " + line);
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }
  throw std::runtime_error("header missing payload marker");
}

EnvConfig env_from_header(const std::map<std::string, std::string>& kv) {
  EnvConfig cfg;
  cfg.variant = env_variant_from_name(kv.at("variant"));
  cfg.dynamics_noise = std::stod(kv.at("dynamics_noise"));
  cfg.goal_jump_prob = std::stod(kv.at("goal_jump_prob"));
  cfg.obstacle = kv.at("obstacle") == "1";
  cfg.obstacle_radius = std::stod(kv.at("obstacle_radius"));
  cfg.max_steps = std::stoi(kv.at("max_steps"));
  cfg.success_tol = std::stod(kv.at("success_tol"));
  cfg.accel_scale = std::stod(kv.at("accel_scale"));
  cfg.drag = std::stod(kv.at("drag"));
  cfg.goal_speed = std::stod(kv.at("goal_speed"));
  cfg.goal_revel_period = std::stoi(kv.at("goal_revel_period"));
  return cfg;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out << "remac-dataset v1\n";
  write_env_header(out, ds.env);
  out << "horizon " << ds.horizon << "\n";
  out << "action_dim " << ds.action_dim << "\n";
  out << "obs_dim " << obs_dim(ds.env) << "\n";
  out << "seed " << ds.seed << "\n";
  out << "episodes " << ds.episode_count << "\n";
  out << "pairs " << ds.pairs.size() << "\n";
  out << "payload\n";
  for (const auto& p : ds.pairs) {
    write_f32(out, p.obs);
    write_f32(out, p.chunk.data);
    char pad = p.padded ? 1 : 0;
    out.write(&pad, 1);
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  auto kv = read_header(in, "remac-dataset v1");
  Dataset ds;
  ds.env = env_from_header(kv);
  ds.horizon = std::stoi(kv.at("horizon"));
  ds.action_dim = std::stoi(kv.at("action_dim"));
  ds.seed = std::stoull(kv.at("seed"));
  ds.episode_count = std::stoi(kv.at("episodes"));
  size_t n_pairs = std::stoull(kv.at("pairs"));
  int odim = std::stoi(kv.at("obs_dim"));
  for (size_t i = 0; i < n_pairs; ++i) {
    ChunkPair p;
    p.obs = read_f32(in, odim);
    p.chunk = Matrix(ds.horizon, ds.action_dim);
    p.chunk.data = read_f32(in, static_cast<size_t>(ds.horizon) * ds.action_dim);
    char pad = 0;
    in.read(&pad, 1);
    if (!in) throw std::runtime_error("load_dataset: truncated payload");
    p.padded = pad != 0;
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

}  // namespace remaclab
