#include <cmath>

#include "doctest.h"
#include "remaclab/env.hpp"
#include "remaclab/remac.hpp"

using namespace remaclab;

namespace {

Dataset tiny_dataset() {
  EnvConfig env;
  env.goal_jump_prob = 0.0;
  env.obstacle = false;
  return generate_dataset(env, 3, 4, 17);
}

PolicyParams tiny_base(const Dataset& ds) {
  ChunkSpec spec;
  spec.horizon = 4;
  spec.action_dim = 2;
  spec.exec_horizon = 2;
  spec.integration_steps = 4;
  Rng rng(5, streams::kInit);
  PolicyParams p = make_policy(spec, obs_dim(ds.env), {12}, true, rng);
  p.norm = compute_norm_stats(ds);
  return p;
}

}  // namespace

TEST_CASE("prefix mask selects exactly the suffix t >= d") {
  PrefixMask m = prefix_mask(3, 8);
  REQUIRE(m.horizon() == 8);
  CHECK(m.delay == 3);
  for (int t = 0; t < 8; ++t) CHECK(m.values[t] == (t >= 3 ? 1.0 : 0.0));
  PrefixMask all = prefix_mask(0, 4);
  for (double v : all.values) CHECK(v == 1.0);
  CHECK_THROWS_AS(prefix_mask(-1, 4), std::invalid_argument);
  CHECK_THROWS_AS(prefix_mask(5, 4), std::invalid_argument);
}

TEST_CASE("interval lower bound anneals q_max down to q_min") {
  MaskIntervalSchedule sched;
  sched.upper = 4;
  sched.lower = 0;
  sched.anneal_fraction = 1.0;
  CHECK(interval_lower_bound(0.0, sched) == 4);
  CHECK(interval_lower_bound(0.5, sched) == 2);
  CHECK(interval_lower_bound(1.0, sched) == 0);
  // Delays stay inside [q, upper] for many draws.
  Rng rng(1, streams::kCurriculum);
  for (int i = 0; i < 200; ++i) {
    int d = sample_delay(0.5, sched, rng);
    CHECK(d >= 2);
    CHECK(d <= 4);
  }
}

TEST_CASE("curriculum sigma schedules hit their anchor values") {
  CHECK(curriculum_sigma(0.0, SigmaSchedule::kPiecewiseLinear) == 1.0);
  CHECK(curriculum_sigma(0.1, SigmaSchedule::kPiecewiseLinear) == 1.0);  // plateau
  CHECK(curriculum_sigma(0.6, SigmaSchedule::kPiecewiseLinear) == doctest::Approx(0.5));
  CHECK(curriculum_sigma(1.0, SigmaSchedule::kPiecewiseLinear) == doctest::Approx(0.0));
  CHECK(curriculum_sigma(0.25, SigmaSchedule::kLinear) == doctest::Approx(0.75));
  CHECK(curriculum_sigma(0.5, SigmaSchedule::kCosine) == doctest::Approx(0.5));
  CHECK(curriculum_sigma(0.49, SigmaSchedule::kStep) == 1.0);
  CHECK(curriculum_sigma(0.51, SigmaSchedule::kStep) == 0.0);
  CHECK(curriculum_sigma(0.7, SigmaSchedule::kConstantOne) == 1.0);
  CHECK(curriculum_sigma(0.7, SigmaSchedule::kConstantZero) == 0.0);
  CHECK_THROWS_AS(curriculum_sigma(-0.1, SigmaSchedule::kLinear), std::invalid_argument);
  CHECK(sigma_schedule_from_name("piecewise-linear") == SigmaSchedule::kPiecewiseLinear);
  CHECK(sigma_schedule_name(SigmaSchedule::kCosine) == "cosine");
  CHECK_THROWS_AS(sigma_schedule_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("self-conditioning picks ground truth with probability sigma") {
  Matrix gt(2, 2, 1.0), gen(2, 2, -1.0);
  Rng rng(3, streams::kCurriculum);
  CHECK(max_abs_diff(self_condition_mix(gt, gen, 1.0, rng), gt) == 0.0);
  CHECK(max_abs_diff(self_condition_mix(gt, gen, 0.0, rng), gen) == 0.0);
  int gt_count = 0;
  for (int i = 0; i < 2000; ++i)
    if (self_condition_mix(gt, gen, 0.3, rng)(0, 0) == 1.0) ++gt_count;
  CHECK(gt_count / 2000.0 == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("masked loss matches a hand-computed value and ignores the prefix") {
  // P=3, D=2; mask d=1 keeps rows 1,2.
  Matrix pred(3, 2), target(3, 2, 0.0);
  pred(0, 0) = 100.0;  // masked out, must not matter
  pred(1, 0) = 1.0;
  pred(1, 1) = 2.0;
  pred(2, 0) = 3.0;
  PrefixMask m = prefix_mask(1, 3);
  // ((1+4) + 9) / 2 = 7.
  CHECK(masked_fm_loss(pred, target, m) == doctest::Approx(7.0));

  // Changing a masked-out row never changes the loss (locality).
  Matrix pred2 = pred;
  pred2(0, 1) = -55.0;
  CHECK(masked_fm_loss(pred2, target, m) == masked_fm_loss(pred, target, m));

  // All-zero mask divides by max(1, 0): loss is zero, not NaN.
  PrefixMask none;
  none.delay = 3;
  none.values.assign(3, 0.0);
  CHECK(masked_fm_loss(pred, target, none) == 0.0);
}

TEST_CASE("delta loss equals the masked loss rewritten around the base flow") {
  Rng rng(4, streams::kPolicy);
  Matrix pred(3, 2), base(3, 2), target(3, 2);
  for (double& v : pred.data) v = rng.normal();
  for (double& v : base.data) v = rng.normal();
  for (double& v : target.data) v = rng.normal();
  for (int d = 0; d <= 2; ++d) {
    PrefixMask m = prefix_mask(d, 3);
    // ||(pred-base) - (target-base)||^2 == ||pred-target||^2 row for row.
    CHECK(delta_loss(pred, base, target, m) ==
          doctest::Approx(masked_fm_loss(pred, target, m)).epsilon(1e-12));
  }
}

TEST_CASE("total loss applies the configured weights") {
  CHECK(total_loss(3.0, 5.0, 0.01, 0.01) == doctest::Approx(0.08));
  CHECK(total_loss(2.0, 0.0, 0.5, 0.25) == doctest::Approx(1.0));
}

TEST_CASE("remac_train leaves the base untouched and logs finite losses") {
  Dataset ds = tiny_dataset();
  PolicyParams base = tiny_base(ds);
  uint64_t base_hash = policy_hash(base);

  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.interval.upper = 2;
  cfg.seed = 77;
  RemacResult result = remac_train(base, cfg, ds);

  CHECK(policy_hash(base) == base_hash);
  CHECK(policy_hash(result.policy.base) == base_hash);
  REQUIRE(result.log.size() == 4);
  for (const auto& log : result.log) {
    CHECK(std::isfinite(log.loss.masked));
    CHECK(std::isfinite(log.loss.delta));
    CHECK(log.loss.total ==
          doctest::Approx(cfg.weight_masked * log.loss.masked +
                          cfg.weight_delta * log.loss.delta));
    CHECK(log.sigma >= 0.0);
    CHECK(log.sigma <= 1.0);
    CHECK_FALSE(log.delays_used.empty());
    for (int d : log.delays_used) {
      CHECK(d >= 0);
      CHECK(d <= cfg.interval.upper);
    }
  }
  // Adapters actually moved.
  auto flat = adapter_to_flat(result.policy);
  double norm = 0.0;
  for (double v : flat) norm += v * v;
  CHECK(norm > 0.0);
}

TEST_CASE("remac_train is deterministic in its seed") {
  Dataset ds = tiny_dataset();
  PolicyParams base = tiny_base(ds);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.interval.upper = 2;
  cfg.seed = 123;
  RemacResult a = remac_train(base, cfg, ds);
  RemacResult b = remac_train(base, cfg, ds);
  CHECK(adapter_to_flat(a.policy) == adapter_to_flat(b.policy));
  TrainConfig cfg2 = cfg;
  cfg2.seed = 124;
  RemacResult c = remac_train(base, cfg2, ds);
  CHECK(adapter_to_flat(a.policy) != adapter_to_flat(c.policy));
}
