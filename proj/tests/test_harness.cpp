#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "remaclab/harness.hpp"

using namespace remaclab;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

EpisodeRecord toy_record(bool success, int completion_tick) {
  EpisodeRecord rec;
  rec.success = success;
  rec.completion_tick = completion_tick;
  // Three ticks: chunk boundary between tick 1 and 2.
  for (int i = 0; i < 3; ++i) {
    TickRow t;
    t.tick = i;
    t.obs = {0.0, 0.0, 0.1 * i, 0.0, 0.0, 0.0};  // speed ramps 0, .1, .2
    t.chunk_id = i < 2 ? 0 : 1;
    t.action = {0.1 * i, 0.0};
    rec.ticks.push_back(t);
  }
  return rec;
}

}  // namespace

TEST_CASE("config parser enforces the schema strictly") {
  std::string good = temp_path("remaclab_cfg_good.cfg");
  write_file(good,
             "[env]\n"
             "goal_jump_prob = 0.02\n"
             "obstacle = 0\n"
             "[sweep]\n"
             "episodes_per_cell = 7\n"
             "delays = 0 1 2\n"
             "strategies = sync remac\n");
  ExperimentConfig cfg = load_experiment_config(good);
  CHECK(cfg.env.goal_jump_prob == doctest::Approx(0.02));
  CHECK_FALSE(cfg.env.obstacle);
  CHECK(cfg.episodes_per_cell == 7);
  CHECK(cfg.delays == std::vector<int>{0, 1, 2});
  CHECK(cfg.strategies == std::vector<std::string>{"sync", "remac"});
  fs::remove(good);

  std::string bad_section = temp_path("remaclab_cfg_badsec.cfg");
  write_file(bad_section, "[nonsense]\nfoo = 1\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(bad_section),
                       doctest::Contains("unknown section"), std::runtime_error);
  fs::remove(bad_section);

  std::string bad_key = temp_path("remaclab_cfg_badkey.cfg");
  write_file(bad_key, "[env]\nnot_a_key = 1\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(bad_key),
                       doctest::Contains("unknown key"), std::runtime_error);
  fs::remove(bad_key);

  CHECK_THROWS(load_experiment_config(temp_path("remaclab_cfg_missing.cfg")));
}

TEST_CASE("metrics: failures cost the cap; jumps split at chunk boundaries") {
  std::vector<EpisodeRecord> records;
  records.push_back(toy_record(true, 30));
  records.push_back(toy_record(false, 55));
  CellMetrics m = compute_metrics(records, 120);
  CHECK(m.episodes == 2);
  CHECK(m.success_rate == doctest::Approx(0.5));
  CHECK(m.mean_ticks == doctest::Approx((30.0 + 120.0) / 2.0));
  // Per record: speeds 0, .1, .2 -> mean .1; both transitions jump by .1 in x.
  CHECK(m.mean_speed == doctest::Approx(0.1));
  CHECK(m.boundary_jump == doctest::Approx(0.1));
  CHECK(m.within_jump == doctest::Approx(0.1));
  CHECK_THROWS_AS(compute_metrics({}, 120), std::invalid_argument);
}

TEST_CASE("episode seeds are deterministic and distinct across coordinates") {
  uint64_t s = episode_seed(42, 2, 4, 7);
  CHECK(episode_seed(42, 2, 4, 7) == s);
  CHECK(episode_seed(43, 2, 4, 7) != s);
  CHECK(episode_seed(42, 3, 4, 7) != s);
  CHECK(episode_seed(42, 2, 5, 7) != s);
  CHECK(episode_seed(42, 2, 4, 8) != s);
}

TEST_CASE("strategy factory copies the configured knobs") {
  ExperimentConfig cfg = default_experiment_config();
  cfg.te_decay = 0.5;
  cfg.rtc_beta = 0.7;
  ExecStrategy s = make_strategy(cfg, "rtc-lite");
  CHECK(s.kind == StrategyKind::kRtcLite);
  CHECK(s.rtc_beta == 0.7);
  ExecStrategy te = make_strategy(cfg, "temporal-ensemble");
  CHECK(te.kind == StrategyKind::kTemporalEnsemble);
  CHECK(te.te_decay == 0.5);
  CHECK_THROWS(make_strategy(cfg, "bogus"));
}

TEST_CASE("REMAC_LAB_THREADS caps the worker count") {
  setenv("REMAC_LAB_THREADS", "3", 1);
  CHECK(worker_thread_count() == 3);
  setenv("REMAC_LAB_THREADS", "1", 1);
  CHECK(worker_thread_count() == 1);
  setenv("REMAC_LAB_THREADS", "garbage", 1);
  CHECK(worker_thread_count() >= 1);  // fallback to hardware clamp
  unsetenv("REMAC_LAB_THREADS");
  int n = worker_thread_count();
  CHECK(n >= 1);
  CHECK(n <= 16);
  setenv("REMAC_LAB_THREADS", "2", 1);  // keep the rest of the suite bounded
}

TEST_CASE("summary CSV round-trips through write and load") {
  MetricsSummary summary;
  SummaryRow row;
  row.strategy = "naive-async";
  row.d = 2;
  row.h = 3;
  row.metrics.episodes = 50;
  row.metrics.success_rate = 0.84;
  row.metrics.mean_ticks = 37.5;
  row.metrics.boundary_jump = 0.25;
  row.metrics.within_jump = 0.125;
  summary.rows.push_back(row);
  SummaryRow agg = row;
  agg.aggregated = true;
  agg.h = 0;
  summary.rows.push_back(agg);

  std::string path = temp_path("remaclab_summary_rt.csv");
  write_summary_csv(summary, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "strategy,d,h_or_avg,episodes,success_rate,mean_ticks,boundary_J,within_J");

  MetricsSummary loaded = load_summary_csv(path);
  REQUIRE(loaded.rows.size() == 2);
  const SummaryRow* found = loaded.find("naive-async", 2, 3, false);
  REQUIRE(found != nullptr);
  CHECK(found->metrics.success_rate == doctest::Approx(0.84));
  CHECK(found->metrics.mean_ticks == doctest::Approx(37.5));
  const SummaryRow* agg_found = loaded.find("naive-async", 2, 0, true);
  REQUIRE(agg_found != nullptr);
  CHECK(summary.find("naive-async", 9, 9, false) == nullptr);
  fs::remove(path);
}

TEST_CASE("a small sweep is deterministic end to end") {
  setenv("REMAC_LAB_THREADS", "2", 1);
  ExperimentConfig cfg = default_experiment_config();
  cfg.env.obstacle = false;
  cfg.env.goal_jump_prob = 0.0;
  cfg.env.max_steps = 60;
  cfg.chunk.horizon = 4;
  cfg.chunk.exec_horizon = 2;
  cfg.chunk.integration_steps = 5;
  cfg.train.interval.upper = 3;  // P=4 caps the delay interval
  cfg.hidden = {12};
  cfg.delays = {0, 1};
  cfg.strategies = {"naive-async"};
  cfg.episodes_per_cell = 3;
  cfg.master_seed = 9;

  Rng init_rng(9, streams::kInit);
  PolicyParams policy =
      make_policy(cfg.chunk, obs_dim(cfg.env), cfg.hidden, true, init_rng);

  MetricsSummary a = run_sweep(cfg, policy, policy);
  MetricsSummary b = run_sweep(cfg, policy, policy);
  REQUIRE(a.rows.size() == b.rows.size());
  CHECK_FALSE(a.rows.empty());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].strategy == b.rows[i].strategy);
    CHECK(a.rows[i].d == b.rows[i].d);
    CHECK(a.rows[i].h == b.rows[i].h);
    CHECK(a.rows[i].metrics.success_rate == b.rows[i].metrics.success_rate);
    CHECK(a.rows[i].metrics.mean_ticks == b.rows[i].metrics.mean_ticks);
    CHECK(a.rows[i].metrics.boundary_jump == b.rows[i].metrics.boundary_jump);
  }
  // Per-delay aggregate rows exist for every requested d.
  for (int d : cfg.delays) CHECK(a.find("naive-async", d, 0, true) != nullptr);
}

TEST_CASE("plots are emitted as non-empty deterministic SVG") {
  std::vector<PlotSeries> series;
  series.push_back({"one", {{0.0, 1.0}, {1.0, 0.5}, {2.0, 0.25}}});
  series.push_back({"two", {{0.0, 0.2}, {1.0, 0.4}, {2.0, 0.8}}});
  std::string path = temp_path("remaclab_plot.svg");
  write_line_plot(path, "title", "x", "y", series);
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.find("</svg>") != std::string::npos);
  CHECK(content.find("one") != std::string::npos);
  std::string path2 = temp_path("remaclab_plot2.svg");
  write_line_plot(path2, "title", "x", "y", series);
  std::ifstream in2(path2);
  std::string content2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
  CHECK(content == content2);
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("experiment config validation catches bad values") {
  ExperimentConfig cfg = default_experiment_config();
  cfg.validate();
  cfg.episodes_per_cell = 0;
  CHECK_THROWS(cfg.validate());
  cfg = default_experiment_config();
  cfg.strategies.clear();
  CHECK_THROWS(cfg.validate());
  cfg = default_experiment_config();
  cfg.delays = {8};  // out of [0, P-1]
  CHECK_THROWS(cfg.validate());
}
