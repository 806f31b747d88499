#include <cmath>
#include <deque>

#include "doctest.h"
#include "remaclab/env.hpp"
#include "remaclab/runtime.hpp"

using namespace remaclab;

namespace {

PolicyParams tiny_policy(uint64_t seed = 4) {
  ChunkSpec spec;
  spec.horizon = 8;
  spec.action_dim = 2;
  spec.exec_horizon = 4;
  spec.integration_steps = 5;
  Rng rng(seed, streams::kInit);
  return make_policy(spec, 6, {16}, true, rng);
}

EnvConfig plain_env() {
  EnvConfig env;
  env.goal_jump_prob = 0.0;
  env.obstacle = false;
  env.max_steps = 60;
  return env;
}

}  // namespace

TEST_CASE("latency discretization floors onto controller periods") {
  CHECK(discretize_delay(76.0, 20.0) == 3);
  CHECK(discretize_delay(134.0, 67.0) == 2);
  CHECK(discretize_delay(0.0, 20.0) == 0);
  CHECK(discretize_delay(19.999, 20.0) == 0);
  CHECK(discretize_delay(20.0, 20.0) == 1);
  CHECK_THROWS_AS(discretize_delay(10.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(discretize_delay(-1.0, 20.0), std::invalid_argument);
}

TEST_CASE("delay corruption has the advertised statistics") {
  const int trials = 20000;
  Rng rng(5, streams::kDelayModel);

  // none: identity.
  for (int i = 0; i < 50; ++i) CHECK(corrupt_delay(2, DelayCorruption::kNone, 4, rng) == 2);

  // noisy: +/-1 uniformly, clamped; each offset about 1/3 of the time.
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < trials; ++i) {
    int d = corrupt_delay(2, DelayCorruption::kNoisy, 4, rng);
    REQUIRE(d >= 1);
    REQUIRE(d <= 3);
    ++counts[d - 1];
  }
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(counts[k] / double(trials) - 1.0 / 3.0) < 0.03);

  // spiky: about 10% of reports jump to max_d.
  int spikes = 0;
  for (int i = 0; i < trials; ++i)
    if (corrupt_delay(1, DelayCorruption::kSpiky, 4, rng) == 4) ++spikes;
  CHECK(std::abs(spikes / double(trials) - 0.10) < 0.02);

  // clamping at the boundary.
  for (int i = 0; i < 50; ++i) {
    int d = corrupt_delay(0, DelayCorruption::kNoisy, 4, rng);
    CHECK(d >= 0);
  }
  CHECK(corruption_from_name("noisy+spiky") == DelayCorruption::kNoisySpiky);
  CHECK(corruption_name(DelayCorruption::kSpiky) == "spiky");
  CHECK_THROWS_AS(corruption_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("delay estimation is the max over the trailing window") {
  std::deque<int> hist = {1, 4, 2, 0, 3};
  CHECK(estimate_delay(hist, 3) == 3);   // window {2,0,3}
  CHECK(estimate_delay(hist, 2) == 3);   // window {0,3}
  CHECK(estimate_delay(hist, 10) == 4);  // whole history
  std::deque<int> one = {2};
  CHECK(estimate_delay(one, 3) == 2);
  CHECK_THROWS_AS(estimate_delay({}, 3), std::invalid_argument);
  CHECK_THROWS_AS(estimate_delay(hist, 0), std::invalid_argument);
}

TEST_CASE("horizon validation enforces max(1,d) <= h <= P+1-d") {
  CHECK(validate_horizon(4, 0, 8).ok);
  CHECK(validate_horizon(1, 0, 8).ok);
  CHECK(validate_horizon(9, 0, 8).ok);  // P+1-d = 9
  CHECK_FALSE(validate_horizon(1, 2, 8).ok);
  CHECK(validate_horizon(1, 2, 8).violation.find("below") != std::string::npos);
  CHECK_FALSE(validate_horizon(8, 2, 8).ok);
  CHECK(validate_horizon(8, 2, 8).violation.find("above") != std::string::npos);
  CHECK(validate_horizon(2, 2, 8).ok);
  CHECK(validate_horizon(7, 2, 8).ok);
}

TEST_CASE("steady-state sweep horizons count 8,7,5,3,1 for d=0..4 at P=8") {
  const int expected[] = {8, 7, 5, 3, 1};
  for (int d = 0; d <= 4; ++d) {
    auto hs = sweep_valid_horizons(8, d);
    CHECK(static_cast<int>(hs.size()) == expected[d]);
    for (int h : hs) {
      CHECK(validate_horizon(h, d, 8).ok);
      CHECK(h + d <= 8);
    }
  }
}

TEST_CASE("temporal ensembling weights members by exp(-decay * age)") {
  std::vector<EnsembleMember> members;
  members.push_back({Action{1.0, 0.0}, 0.0});
  members.push_back({Action{0.0, 1.0}, 1.0});
  double m = 0.5;
  Action out = temporal_ensemble_action(members, m);
  double w0 = 1.0, w1 = std::exp(-m);
  CHECK(out[0] == doctest::Approx(w0 / (w0 + w1)));
  CHECK(out[1] == doctest::Approx(w1 / (w0 + w1)));

  // Huge decay collapses onto the newest member.
  Action newest = temporal_ensemble_action(members, 1e6);
  CHECK(newest[0] == doctest::Approx(1.0));
  CHECK(newest[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_AS(temporal_ensemble_action({}, 0.01), std::invalid_argument);
}

TEST_CASE("rtc-lite with beta=0 matches prefix-preserved integration") {
  PolicyParams p = tiny_policy();
  std::vector<double> obs = {0.1, -0.3, 0.2, 0.0, 0.4, -0.1};
  Matrix prev(8, 2);
  for (size_t i = 0; i < prev.data.size(); ++i) prev.data[i] = 0.07 * double(i) - 0.25;
  PriorChunk prior = build_prior(prev, 4, 8);
  int d = 2;
  Matrix soft = rtc_lite_integrate(p, obs, prior, d, 0.0, 2, 5);
  Matrix hard = prefix_preserved_integrate(p, obs, prior, prefix_mask(d, 8), 5);
  CHECK(max_abs_diff(soft, hard) < 1e-12);

  // With beta > 0 the soft rows inside the carried prefix move toward the
  // prior relative to the unguided result.
  Matrix guided = rtc_lite_integrate(p, obs, prior, d, 0.9, 2, 5);
  CHECK(max_abs_diff(guided, hard) > 0.0);
  for (int t = 0; t < d; ++t)
    for (int c = 0; c < 2; ++c) CHECK(guided(t, c) == prior.actions(t, c));
}

TEST_CASE("episodes are deterministic and respect the strategy contract") {
  PolicyParams p = tiny_policy();
  EnvConfig env = plain_env();
  DelaySpec delay;
  delay.period_ms = 20.0;
  delay.base_latency_ms = 40.0;  // true d = 2
  ExecStrategy strat;
  strat.kind = StrategyKind::kNaiveAsync;
  ChunkSpec spec = p.spec;

  EpisodeRecord a = run_episode(env, p, strat, spec, delay, 314);
  EpisodeRecord b = run_episode(env, p, strat, spec, delay, 314);
  REQUIRE(a.ticks.size() == b.ticks.size());
  for (size_t i = 0; i < a.ticks.size(); ++i) {
    CHECK(a.ticks[i].action[0] == b.ticks[i].action[0]);
    CHECK(a.ticks[i].action[1] == b.ticks[i].action[1]);
    CHECK(a.ticks[i].obs == b.ticks[i].obs);
  }
  REQUIRE(a.chunks.size() == b.chunks.size());
  for (size_t i = 0; i < a.chunks.size(); ++i)
    CHECK(max_abs_diff(a.chunks[i].actions, b.chunks[i].actions) == 0.0);

  // Chunks after the warm-started first one arrive true_d ticks after their
  // request.
  for (const auto& chunk : a.chunks) {
    CHECK(chunk.true_d == 2);
    if (chunk.id > 0) CHECK(chunk.arrival_tick - chunk.request_tick == 2);
  }

  EpisodeRecord c = run_episode(env, p, strat, spec, delay, 315);
  bool differs = a.ticks.size() != c.ticks.size();
  for (size_t i = 0; !differs && i < a.ticks.size(); ++i)
    differs = a.ticks[i].obs != c.ticks[i].obs;
  CHECK(differs);
}

TEST_CASE("sync execution idles while waiting; zero-latency sync never idles") {
  PolicyParams p = tiny_policy();
  EnvConfig env = plain_env();
  ChunkSpec spec = p.spec;
  ExecStrategy strat;
  strat.kind = StrategyKind::kSync;

  DelaySpec lagged;
  lagged.period_ms = 20.0;
  lagged.base_latency_ms = 60.0;  // d = 3: three idle ticks per chunk
  EpisodeRecord rec = run_episode(env, p, strat, spec, lagged, 99);
  int idle = 0;
  for (const auto& t : rec.ticks) idle += t.idle ? 1 : 0;
  CHECK(idle > 0);
  for (const auto& t : rec.ticks)
    if (t.idle) {
      CHECK(t.action[0] == 0.0);
      CHECK(t.action[1] == 0.0);
    }

  DelaySpec instant;
  instant.period_ms = 20.0;
  instant.base_latency_ms = 0.0;
  EpisodeRecord fast = run_episode(env, p, strat, spec, instant, 99);
  for (const auto& t : fast.ticks) CHECK_FALSE(t.idle);
}

TEST_CASE("remac rollout preserves the reported prefix bitwise") {
  PolicyParams p = tiny_policy();
  EnvConfig env = plain_env();
  ChunkSpec spec = p.spec;
  ExecStrategy strat;
  strat.kind = StrategyKind::kRemac;
  DelaySpec delay;
  delay.period_ms = 20.0;
  delay.base_latency_ms = 45.0;  // d = 2

  EpisodeRecord rec = run_episode(env, p, strat, spec, delay, 2718);
  int checked = 0;
  for (const auto& chunk : rec.chunks) {
    if (!chunk.has_prior) continue;
    int freeze = std::min(chunk.d_hat, spec.horizon - 1);
    for (int t = 0; t < freeze; ++t)
      for (int c = 0; c < spec.action_dim; ++c)
        CHECK(chunk.actions(t, c) == chunk.prior(t, c));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("strategy names round-trip") {
  for (auto kind : {StrategyKind::kSync, StrategyKind::kNaiveAsync,
                    StrategyKind::kTemporalEnsemble, StrategyKind::kRtcLite,
                    StrategyKind::kRemac})
    CHECK(strategy_from_name(strategy_name(kind)) == kind);
  CHECK_THROWS_AS(strategy_from_name("bogus"), std::invalid_argument);
}
