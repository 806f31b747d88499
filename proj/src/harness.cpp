#include "remaclab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "remaclab/io.hpp"

namespace remaclab {

void ExperimentConfig::validate() const {
  env.validate();
  chunk.validate();
  train.interval.validate(chunk.horizon);
  if (episodes_per_cell < 1)
    throw std::invalid_argument("ExperimentConfig: episodes_per_cell must be >= 1");
  if (strategies.empty()) throw std::invalid_argument("ExperimentConfig: no strategies");
  for (int d : delays) {
    if (d < 0 || d > chunk.horizon - 1)
      throw std::invalid_argument("ExperimentConfig: delay out of [0, P-1]");
    if (sweep_valid_horizons(chunk.horizon, d).empty())
      throw std::invalid_argument("ExperimentConfig: no valid execution horizon for d=" +
                                  std::to_string(d));
  }
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.env.variant = EnvVariant::kPointReach;
  cfg.env.dynamics_noise = 0.004;
  cfg.env.goal_jump_prob = 0.01;
  cfg.env.obstacle = true;
  cfg.chunk.horizon = 8;
  cfg.chunk.action_dim = 2;
  cfg.chunk.exec_horizon = 4;
  cfg.chunk.integration_steps = 10;
  cfg.delay.period_ms = 20.0;
  cfg.train.interval.upper = 4;
  cfg.train.interval.lower = 0;
  return cfg;
}

namespace {

struct ConfigSchema {
  std::map<std::string, std::set<std::string>> sections = {
      {"env",
       {"variant", "dynamics_noise", "goal_jump_prob", "obstacle", "obstacle_radius",
        "max_steps", "success_tol", "accel_scale", "drag", "goal_speed", "goal_revel_period"}},
      {"dataset", {"episodes"}},
      {"pretrain", {"epochs", "batch_size", "learning_rate", "hidden"}},
      {"chunk", {"horizon", "action_dim", "exec_horizon", "integration_steps"}},
      {"train",
       {"epochs", "batch_size", "learning_rate", "weight_masked", "weight_delta", "q_max",
        "q_min", "anneal_fraction", "sigma_schedule", "delay_resample", "rank", "alpha",
        "mask_embedding"}},
      {"delay",
       {"period_ms", "base_latency_ms", "injection_ms", "corruption", "rtc_surcharge",
        "estimate_window", "estimate_prior"}},
      {"sweep", {"delays", "strategies", "episodes_per_cell"}},
      {"rollout", {"te_decay", "rtc_beta", "rtc_soft_width", "freeze", "first_chunk"}},
  };
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<int> parse_ints(const std::string& s) {
  std::istringstream in(s);
  std::vector<int> v;
  int x;
  while (in >> x) v.push_back(x);
  return v;
}

std::vector<std::string> parse_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> v;
  std::string w;
  while (in >> w) v.push_back(w);
  return v;
}

using SectionMap = std::map<std::string, std::map<std::string, std::string>>;

SectionMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  ConfigSchema schema;
  SectionMap sections;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      if (!schema.sections.count(section))
        throw std::runtime_error("config: unknown section [" + section + "] at line " +
                                 std::to_string(lineno));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw std::runtime_error("config: malformed line " + std::to_string(lineno) + ": " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!schema.sections.at(section).count(key))
      throw std::runtime_error("config: unknown key '" + key + "' in section [" + section +
                               "] at line " + std::to_string(lineno));
    sections[section][key] = value;
  }
  return sections;
}

bool has(const SectionMap& m, const std::string& s, const std::string& k) {
  auto it = m.find(s);
  return it != m.end() && it->second.count(k);
}

const std::string& get(const SectionMap& m, const std::string& s, const std::string& k) {
  return m.at(s).at(k);
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  ExperimentConfig cfg = default_experiment_config();
  SectionMap m = parse_config_file(path);

  if (has(m, "env", "variant")) cfg.env.variant = env_variant_from_name(get(m, "env", "variant"));
  if (has(m, "env", "dynamics_noise")) cfg.env.dynamics_noise = std::stod(get(m, "env", "dynamics_noise"));
  if (has(m, "env", "goal_jump_prob")) cfg.env.goal_jump_prob = std::stod(get(m, "env", "goal_jump_prob"));
  if (has(m, "env", "obstacle")) cfg.env.obstacle = get(m, "env", "obstacle") == "1";
  if (has(m, "env", "obstacle_radius")) cfg.env.obstacle_radius = std::stod(get(m, "env", "obstacle_radius"));
  if (has(m, "env", "max_steps")) cfg.env.max_steps = std::stoi(get(m, "env", "max_steps"));
  if (has(m, "env", "success_tol")) cfg.env.success_tol = std::stod(get(m, "env", "success_tol"));
  if (has(m, "env", "accel_scale")) cfg.env.accel_scale = std::stod(get(m, "env", "accel_scale"));
  if (has(m, "env", "drag")) cfg.env.drag = std::stod(get(m, "env", "drag"));
  if (has(m, "env", "goal_speed")) cfg.env.goal_speed = std::stod(get(m, "env", "goal_speed"));
  if (has(m, "env", "goal_revel_period")) cfg.env.goal_revel_period = std::stoi(get(m, "env", "goal_revel_period"));

  if (has(m, "dataset", "episodes")) cfg.dataset_episodes = std::stoi(get(m, "dataset", "episodes"));

  if (has(m, "pretrain", "epochs")) cfg.pretrain.epochs = std::stoi(get(m, "pretrain", "epochs"));
  if (has(m, "pretrain", "batch_size")) cfg.pretrain.batch_size = std::stoi(get(m, "pretrain", "batch_size"));
  if (has(m, "pretrain", "learning_rate")) cfg.pretrain.learning_rate = std::stod(get(m, "pretrain", "learning_rate"));
  if (has(m, "pretrain", "hidden")) cfg.hidden = parse_ints(get(m, "pretrain", "hidden"));

  if (has(m, "chunk", "horizon")) cfg.chunk.horizon = std::stoi(get(m, "chunk", "horizon"));
  if (has(m, "chunk", "action_dim")) cfg.chunk.action_dim = std::stoi(get(m, "chunk", "action_dim"));
  if (has(m, "chunk", "exec_horizon")) cfg.chunk.exec_horizon = std::stoi(get(m, "chunk", "exec_horizon"));
  if (has(m, "chunk", "integration_steps")) cfg.chunk.integration_steps = std::stoi(get(m, "chunk", "integration_steps"));

  if (has(m, "train", "epochs")) cfg.train.epochs = std::stoi(get(m, "train", "epochs"));
  if (has(m, "train", "batch_size")) cfg.train.batch_size = std::stoi(get(m, "train", "batch_size"));
  if (has(m, "train", "learning_rate")) cfg.train.learning_rate = std::stod(get(m, "train", "learning_rate"));
  if (has(m, "train", "weight_masked")) cfg.train.weight_masked = std::stod(get(m, "train", "weight_masked"));
  if (has(m, "train", "weight_delta")) cfg.train.weight_delta = std::stod(get(m, "train", "weight_delta"));
  if (has(m, "train", "q_max")) cfg.train.interval.upper = std::stoi(get(m, "train", "q_max"));
  if (has(m, "train", "q_min")) cfg.train.interval.lower = std::stoi(get(m, "train", "q_min"));
  if (has(m, "train", "anneal_fraction")) cfg.train.interval.anneal_fraction = std::stod(get(m, "train", "anneal_fraction"));
  if (has(m, "train", "sigma_schedule")) cfg.train.sigma_kind = sigma_schedule_from_name(get(m, "train", "sigma_schedule"));
  if (has(m, "train", "delay_resample")) {
    std::string v = get(m, "train", "delay_resample");
    if (v == "epoch") cfg.train.delay_resample = DelayResample::kEpoch;
    else if (v == "batch") cfg.train.delay_resample = DelayResample::kBatch;
    else throw std::runtime_error("config: delay_resample must be epoch or batch");
  }
  if (has(m, "train", "rank")) cfg.train.adapter.rank = std::stoi(get(m, "train", "rank"));
  if (has(m, "train", "alpha")) cfg.train.adapter.alpha = std::stod(get(m, "train", "alpha"));
  if (has(m, "train", "mask_embedding")) cfg.train.adapter.mask_embedding = get(m, "train", "mask_embedding") == "1";

  if (has(m, "delay", "period_ms")) cfg.delay.period_ms = std::stod(get(m, "delay", "period_ms"));
  if (has(m, "delay", "base_latency_ms")) cfg.delay.base_latency_ms = std::stod(get(m, "delay", "base_latency_ms"));
  if (has(m, "delay", "injection_ms")) cfg.delay.injection_ms = std::stod(get(m, "delay", "injection_ms"));
  if (has(m, "delay", "corruption")) cfg.delay.corruption = corruption_from_name(get(m, "delay", "corruption"));
  if (has(m, "delay", "rtc_surcharge")) cfg.delay.rtc_surcharge = std::stod(get(m, "delay", "rtc_surcharge"));
  if (has(m, "delay", "estimate_window")) cfg.delay.estimate_window = std::stoi(get(m, "delay", "estimate_window"));
  if (has(m, "delay", "estimate_prior")) cfg.delay.estimate_prior = std::stoi(get(m, "delay", "estimate_prior"));

  if (has(m, "sweep", "delays")) cfg.delays = parse_ints(get(m, "sweep", "delays"));
  if (has(m, "sweep", "strategies")) cfg.strategies = parse_words(get(m, "sweep", "strategies"));
  if (has(m, "sweep", "episodes_per_cell")) cfg.episodes_per_cell = std::stoi(get(m, "sweep", "episodes_per_cell"));

  if (has(m, "rollout", "te_decay")) cfg.te_decay = std::stod(get(m, "rollout", "te_decay"));
  if (has(m, "rollout", "rtc_beta")) cfg.rtc_beta = std::stod(get(m, "rollout", "rtc_beta"));
  if (has(m, "rollout", "rtc_soft_width")) cfg.rtc_soft_width = std::stoi(get(m, "rollout", "rtc_soft_width"));
  if (has(m, "rollout", "freeze")) {
    std::string v = get(m, "rollout", "freeze");
    if (v == "delay") cfg.sampler.freeze = FreezeLength::kDelay;
    else if (v == "overlap") cfg.sampler.freeze = FreezeLength::kOverlap;
    else throw std::runtime_error("config: freeze must be delay or overlap");
  }
  if (has(m, "rollout", "first_chunk")) {
    std::string v = get(m, "rollout", "first_chunk");
    if (v == "zeros") cfg.sampler.first_chunk = FirstChunkInit::kZeros;
    else if (v == "gaussian") cfg.sampler.first_chunk = FirstChunkInit::kGaussian;
    else throw std::runtime_error("config: first_chunk must be zeros or gaussian");
  }
  cfg.sampler.integration_steps = cfg.chunk.integration_steps;
  cfg.validate();
  return cfg;
}

const SummaryRow* MetricsSummary::find(const std::string& strategy, int d, int h,
                                       bool aggregated) const {
  for (const auto& r : rows)
    if (r.strategy == strategy && r.d == d && r.aggregated == aggregated &&
        (aggregated || r.h == h))
      return &r;
  return nullptr;
}

CellMetrics compute_metrics(const std::vector<EpisodeRecord>& records, int completion_cap) {
  if (records.empty()) throw std::invalid_argument("compute_metrics: no records");
  CellMetrics m;
  m.episodes = static_cast<int>(records.size());
  double ticks_sum = 0.0, speed_sum = 0.0, accel_sum = 0.0;
  long speed_n = 0, accel_n = 0;
  double boundary_sum = 0.0, within_sum = 0.0;
  long boundary_n = 0, within_n = 0;
  int successes = 0;
  for (const auto& rec : records) {
    if (rec.success) {
      ++successes;
      ticks_sum += rec.completion_tick;
    } else {
      ticks_sum += completion_cap;
    }
    for (size_t i = 0; i < rec.ticks.size(); ++i) {
      const auto& t = rec.ticks[i];
      if (t.obs.size() >= 4) {
        speed_sum += std::hypot(t.obs[2], t.obs[3]);
        ++speed_n;
        if (i > 0) {
          const auto& p = rec.ticks[i - 1];
          accel_sum += std::hypot(t.obs[2] - p.obs[2], t.obs[3] - p.obs[3]);
          ++accel_n;
        }
      }
      if (i > 0) {
        const auto& p = rec.ticks[i - 1];
        double jump = std::hypot(t.action[0] - p.action[0], t.action[1] - p.action[1]);
        if (t.chunk_id != p.chunk_id) {
          boundary_sum += jump;
          ++boundary_n;
        } else {
          within_sum += jump;
          ++within_n;
        }
      }
    }
  }
  m.success_rate = static_cast<double>(successes) / m.episodes;
  m.mean_ticks = ticks_sum / m.episodes;
  m.mean_speed = speed_n ? speed_sum / speed_n : 0.0;
  m.mean_accel = accel_n ? accel_sum / accel_n : 0.0;
  m.boundary_jump = boundary_n ? boundary_sum / boundary_n : 0.0;
  m.within_jump = within_n ? within_sum / within_n : 0.0;
  return m;
}

uint64_t episode_seed(uint64_t master, int d, int h, int episode) {
  uint64_t key[4] = {master, static_cast<uint64_t>(d), static_cast<uint64_t>(h),
                     static_cast<uint64_t>(episode)};
  return fnv1a(key, sizeof(key));
}

ExecStrategy make_strategy(const ExperimentConfig& cfg, const std::string& name) {
  ExecStrategy s;
  s.kind = strategy_from_name(name);
  s.te_decay = cfg.te_decay;
  s.rtc_beta = cfg.rtc_beta;
  s.rtc_soft_width = cfg.rtc_soft_width;
  s.sampler = cfg.sampler;
  return s;
}

int worker_thread_count() {
  if (const char* env = std::getenv("REMAC_LAB_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return std::max(1u, std::min(hw, 16u));
}

namespace {

template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
  int workers = std::min<size_t>(worker_thread_count(), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct SweepCell {
  std::string strategy;
  int d = 0;
  int h = 0;
};

}  // namespace

MetricsSummary run_sweep(const ExperimentConfig& cfg, const PolicyParams& base_policy,
                         const PolicyParams& remac_policy,
                         std::vector<EpisodeRecord>* all_records) {
  cfg.validate();
  const int P = cfg.chunk.horizon;

  std::vector<SweepCell> cells;
  for (const auto& strat : cfg.strategies) {
    StrategyKind kind = strategy_from_name(strat);
    for (int d : cfg.delays) {
      double latency = d * cfg.delay.period_ms + cfg.delay.injection_ms;
      int d_sim = discretize_delay(
          kind == StrategyKind::kRtcLite ? latency * (1.0 + cfg.delay.rtc_surcharge) : latency,
          cfg.delay.period_ms);
      // rtc-lite pays its latency surcharge, which shrinks its feasible
      // horizon set; sync never starves and shares the nominal set.
      int h_bound = kind == StrategyKind::kSync ? d : std::max(d, d_sim);
      for (int h : sweep_valid_horizons(P, h_bound)) cells.push_back({strat, d, h});
    }
  }

  std::vector<CellMetrics> cell_metrics(cells.size());
  std::vector<std::vector<EpisodeRecord>> cell_records(all_records ? cells.size() : 0);

  parallel_for(cells.size(), [&](size_t ci) {
    const SweepCell& cell = cells[ci];
    ChunkSpec spec = cfg.chunk;
    spec.exec_horizon = cell.h;
    DelaySpec delay = cfg.delay;
    delay.base_latency_ms = cell.d * cfg.delay.period_ms;
    ExecStrategy strat = make_strategy(cfg, cell.strategy);
    const PolicyParams& policy =
        strat.kind == StrategyKind::kRemac ? remac_policy : base_policy;
    std::vector<EpisodeRecord> records;
    records.reserve(cfg.episodes_per_cell);
    for (int e = 0; e < cfg.episodes_per_cell; ++e) {
      uint64_t seed = episode_seed(cfg.master_seed, cell.d, cell.h, e);
      records.push_back(run_episode(cfg.env, policy, strat, spec, delay, seed));
    }
    cell_metrics[ci] = compute_metrics(records, cfg.env.max_steps);
    if (all_records) cell_records[ci] = std::move(records);
  });

  MetricsSummary summary;
  for (const auto& strat : cfg.strategies) {
    for (int d : cfg.delays) {
      CellMetrics agg;
      int n_cells = 0;
      for (size_t ci = 0; ci < cells.size(); ++ci) {
        if (cells[ci].strategy != strat || cells[ci].d != d) continue;
        SummaryRow row;
        row.strategy = strat;
        row.d = d;
        row.h = cells[ci].h;
        row.metrics = cell_metrics[ci];
        summary.rows.push_back(row);
        agg.episodes += cell_metrics[ci].episodes;
        agg.success_rate += cell_metrics[ci].success_rate;
        agg.mean_ticks += cell_metrics[ci].mean_ticks;
        agg.mean_speed += cell_metrics[ci].mean_speed;
        agg.mean_accel += cell_metrics[ci].mean_accel;
        agg.boundary_jump += cell_metrics[ci].boundary_jump;
        agg.within_jump += cell_metrics[ci].within_jump;
        ++n_cells;
      }
      if (n_cells == 0) continue;
      SummaryRow row;
      row.strategy = strat;
      row.d = d;
      row.aggregated = true;
      row.metrics = agg;
      row.metrics.success_rate /= n_cells;
      row.metrics.mean_ticks /= n_cells;
      row.metrics.mean_speed /= n_cells;
      row.metrics.mean_accel /= n_cells;
      row.metrics.boundary_jump /= n_cells;
      row.metrics.within_jump /= n_cells;
      summary.rows.push_back(row);
    }
  }
  if (all_records) {
    for (auto& rs : cell_records)
      for (auto& r : rs) all_records->push_back(std::move(r));
  }
  return summary;
}

void write_summary_csv(const MetricsSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path);
  out << "strategy,d,h_or_avg,episodes,success_rate,mean_ticks,boundary_J,within_J\n";
  for (const auto& r : summary.rows) {
    out << r.strategy << "," << r.d << "," << (r.aggregated ? std::string("avg") : std::to_string(r.h))
        << "," << r.metrics.episodes << "," << fmt_fixed(r.metrics.success_rate) << ","
        << fmt_fixed(r.metrics.mean_ticks) << "," << fmt_fixed(r.metrics.boundary_jump) << ","
        << fmt_fixed(r.metrics.within_jump) << "\n";
  }
}

MetricsSummary load_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_summary_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "strategy,d,h_or_avg,episodes,success_rate,mean_ticks,boundary_J,within_J")
    throw std::runtime_error("load_summary_csv: unexpected header in " + path);
  MetricsSummary summary;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() != 8) throw std::runtime_error("load_summary_csv: malformed row: " + line);
    SummaryRow r;
    r.strategy = f[0];
    r.d = std::stoi(f[1]);
    r.aggregated = f[2] == "avg";
    r.h = r.aggregated ? 0 : std::stoi(f[2]);
    r.metrics.episodes = std::stoi(f[3]);
    r.metrics.success_rate = std::stod(f[4]);
    r.metrics.mean_ticks = std::stod(f[5]);
    r.metrics.boundary_jump = std::stod(f[6]);
    r.metrics.within_jump = std::stod(f[7]);
    summary.rows.push_back(r);
  }
  return summary;
}

VariantPolicy train_variant(const ExperimentConfig& cfg, const PolicyParams& base,
                            const Dataset& ds, const std::string& axis,
                            const std::string& variant) {
  VariantPolicy out;
  out.strategy = "remac";
  TrainConfig tc = cfg.train;
  if (axis == "component-stack") {
    if (variant == "naive") {
      out.policy = base;
      out.strategy = "naive-async";
      return out;
    }
    if (variant == "lora") {
      tc.interval.upper = tc.interval.lower = 0;  // always the unmasked case
      tc.sigma_kind = SigmaSchedule::kConstantOne;
      tc.weight_delta = 0.0;
      out.strategy = "naive-async";
    } else if (variant == "masking") {
      tc.sigma_kind = SigmaSchedule::kConstantOne;
      tc.weight_delta = 0.0;
    } else if (variant == "curriculum") {
      tc.weight_delta = 0.0;
    } else if (variant != "full") {
      throw std::invalid_argument("train_variant: unknown component-stack variant " + variant);
    }
  } else if (axis == "sigma-schedule") {
    tc.sigma_kind = sigma_schedule_from_name(variant);
  } else if (axis == "q-interval") {
    auto dash = variant.find('-');
    if (variant.empty() || variant[0] != 'q' || dash == std::string::npos)
      throw std::invalid_argument("train_variant: q-interval variant must look like q4-0");
    tc.interval.upper = std::stoi(variant.substr(1, dash - 1));
    tc.interval.lower = std::stoi(variant.substr(dash + 1));
  } else if (axis == "mask-embedding") {
    tc.adapter.mask_embedding = variant == "on";
  } else if (axis == "freeze-length") {
    // training identical; the rollout freeze rule differs (handled by caller)
  } else {
    throw std::invalid_argument("train_variant: unknown axis " + axis);
  }
  RemacResult r = remac_train(base, tc, ds);
  out.policy = merge(r.policy);
  return out;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, const PolicyParams& base,
                                      const Dataset& ds, const std::vector<std::string>& axes) {
  static const std::map<std::string, std::vector<std::string>> kVariants = {
      {"component-stack", {"naive", "lora", "masking", "curriculum", "full"}},
      {"sigma-schedule", {"piecewise-linear", "constant-1", "constant-0"}},
      {"q-interval", {"q4-0", "q2-0", "q4-2", "q6-0"}},
      {"mask-embedding", {"off", "on"}},
      {"freeze-length", {"delay", "overlap"}},
  };
  std::vector<AblationRow> rows;
  for (const auto& axis : axes) {
    if (!kVariants.count(axis)) throw std::invalid_argument("run_ablation: unknown axis " + axis);
    VariantPolicy shared;  // freeze-length trains once and reuses the policy
    bool shared_ready = false;
    for (const auto& variant : kVariants.at(axis)) {
      VariantPolicy vp;
      if (axis == "freeze-length") {
        if (!shared_ready) {
          shared = train_variant(cfg, base, ds, axis, variant);
          shared_ready = true;
        }
        vp = shared;
      } else {
        vp = train_variant(cfg, base, ds, axis, variant);
      }
      ExperimentConfig run_cfg = cfg;
      run_cfg.strategies = {vp.strategy};
      if (axis == "freeze-length")
        run_cfg.sampler.freeze = variant == "overlap" ? FreezeLength::kOverlap
                                                      : FreezeLength::kDelay;
      MetricsSummary summary = run_sweep(run_cfg, vp.policy, vp.policy);
      for (int d : cfg.delays) {
        const SummaryRow* row = summary.find(vp.strategy, d, 0, true);
        if (!row) continue;
        AblationRow ar;
        ar.axis = axis;
        ar.variant = variant;
        ar.d = d;
        ar.success_rate = row->metrics.success_rate;
        ar.mean_ticks = row->metrics.mean_ticks;
        rows.push_back(ar);
      }
    }
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_ablation_csv: cannot open " + path);
  out << "axis,variant,d,success_rate,mean_ticks\n";
  for (const auto& r : rows)
    out << r.axis << "," << r.variant << "," << r.d << "," << fmt_fixed(r.success_rate) << ","
        << fmt_fixed(r.mean_ticks) << "\n";
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  if (series.empty()) throw std::invalid_argument("write_line_plot: no series");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax <= xmin) { xmax = xmin + 1.0; xmin -= 1.0; }
  if (ymax <= ymin) { ymax = ymin + 1.0; ymin -= 1.0; }
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double W = 640, H = 480, L = 70, R = 150, T = 40, B = 50;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_line_plot: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n";
  out << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt_fixed(W / 2, 1) << "\" y=\"24\" text-anchor=\"middle\" "
         "font-size=\"16\">" << title << "</text>\n";
  out << "<line x1=\"" << fmt_fixed(L, 1) << "\" y1=\"" << fmt_fixed(H - B, 1) << "\" x2=\""
      << fmt_fixed(W - R, 1) << "\" y2=\"" << fmt_fixed(H - B, 1)
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt_fixed(L, 1) << "\" y1=\"" << fmt_fixed(T, 1) << "\" x2=\""
      << fmt_fixed(L, 1) << "\" y2=\"" << fmt_fixed(H - B, 1) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double xv = xmin + (xmax - xmin) * i / 4.0;
    double yv = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x=\"" << fmt_fixed(px(xv), 1) << "\" y=\"" << fmt_fixed(H - B + 18, 1)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt_fixed(xv, 2) << "</text>\n";
    out << "<text x=\"" << fmt_fixed(L - 8, 1) << "\" y=\"" << fmt_fixed(py(yv) + 4, 1)
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_fixed(yv, 2) << "</text>\n";
  }
  out << "<text x=\"" << fmt_fixed((L + W - R) / 2, 1) << "\" y=\"" << fmt_fixed(H - 12, 1)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << fmt_fixed((T + H - B) / 2, 1)
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << fmt_fixed((T + H - B) / 2, 1) << ")\">" << y_label << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : series[si].points)
      out << fmt_fixed(px(x), 2) << "," << fmt_fixed(py(y), 2) << " ";
    out << "\"/>\n";
    for (auto [x, y] : series[si].points)
      out << "<circle cx=\"" << fmt_fixed(px(x), 2) << "\" cy=\"" << fmt_fixed(py(y), 2)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    double ly = T + 16.0 * si;
    out << "<rect x=\"" << fmt_fixed(W - R + 10, 1) << "\" y=\"" << fmt_fixed(ly, 1)
        << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << fmt_fixed(W - R + 28, 1) << "\" y=\"" << fmt_fixed(ly + 6, 1)
        << "\" font-size=\"11\">" << series[si].name << "</text>\n";
  }
  out << "</svg>\n";
}

void emit_plots(const MetricsSummary& summary, const std::string& out_dir) {
  std::vector<std::string> strategies;
  for (const auto& r : summary.rows)
    if (r.aggregated &&
        std::find(strategies.begin(), strategies.end(), r.strategy) == strategies.end())
      strategies.push_back(r.strategy);
  if (strategies.empty()) throw std::invalid_argument("emit_plots: no strategies in summary");

  std::filesystem::create_directories(out_dir);
  std::vector<PlotSeries> success, ticks;
  for (const auto& strat : strategies) {
    PlotSeries s{strat, {}}, t{strat, {}};
    for (const auto& r : summary.rows) {
      if (!r.aggregated || r.strategy != strat) continue;
      s.points.emplace_back(r.d, r.metrics.success_rate);
      t.points.emplace_back(r.d, r.metrics.mean_ticks);
    }
    success.push_back(std::move(s));
    ticks.push_back(std::move(t));
  }
  write_line_plot(out_dir + "/success_vs_delay.svg", "Success rate vs inference delay",
                  "inference delay d (ticks)", "success rate", success);
  write_line_plot(out_dir + "/completion_vs_delay.svg", "Completion time vs inference delay",
                  "inference delay d (ticks)", "mean completion ticks", ticks);
}

void emit_kinematics_plot(const std::vector<std::pair<std::string, EpisodeRecord>>& episodes,
                          const std::string& path) {
  if (episodes.empty()) throw std::invalid_argument("emit_kinematics_plot: no episodes");
  std::vector<PlotSeries> series;
  for (const auto& [name, rec] : episodes) {
    PlotSeries s{name, {}};
    for (const auto& t : rec.ticks)
      if (t.obs.size() >= 4)
        s.points.emplace_back(t.tick, std::hypot(t.obs[2], t.obs[3]));
    series.push_back(std::move(s));
  }
  write_line_plot(path, "Robot speed over time", "tick", "|velocity|", series);
}

}  // namespace remaclab
