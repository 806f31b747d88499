#include "remaclab/remac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "remaclab/io.hpp"

namespace remaclab {

PrefixMask prefix_mask(int delay, int horizon) {
  if (delay < 0 || delay > horizon - 1)
    throw std::invalid_argument("prefix_mask: delay out of [0, P-1]");
  PrefixMask m;
  m.delay = delay;
  m.values.assign(horizon, 0.0);
  for (int t = delay; t < horizon; ++t) m.values[t] = 1.0;
  return m;
}

void MaskIntervalSchedule::validate(int horizon) const {
  if (lower < 0 || lower > upper || upper > horizon - 1)
    throw std::invalid_argument("MaskIntervalSchedule: need 0 <= lower <= upper <= P-1");
  if (anneal_fraction <= 0.0 || anneal_fraction > 1.0)
    throw std::invalid_argument("MaskIntervalSchedule: anneal_fraction out of (0,1]");
}

int interval_lower_bound(double progress, const MaskIntervalSchedule& sched) {
  double frac = std::min(progress / sched.anneal_fraction, 1.0);
  return static_cast<int>(std::lround(sched.upper - (sched.upper - sched.lower) * frac));
}

int sample_delay(double progress, const MaskIntervalSchedule& sched, Rng& rng) {
  int q = interval_lower_bound(progress, sched);
  return rng.uniform_int(q, sched.upper);
}

std::string sigma_schedule_name(SigmaSchedule s) {
  switch (s) {
    case SigmaSchedule::kPiecewiseLinear: return "piecewise-linear";
    case SigmaSchedule::kLinear: return "linear";
    case SigmaSchedule::kCosine: return "cosine";
    case SigmaSchedule::kStep: return "step";
    case SigmaSchedule::kConstantOne: return "constant-1";
    case SigmaSchedule::kConstantZero: return "constant-0";
  }
  return "?";
}

SigmaSchedule sigma_schedule_from_name(const std::string& name) {
  if (name == "piecewise-linear") return SigmaSchedule::kPiecewiseLinear;
  if (name == "linear") return SigmaSchedule::kLinear;
  if (name == "cosine") return SigmaSchedule::kCosine;
  if (name == "step") return SigmaSchedule::kStep;
  if (name == "constant-1") return SigmaSchedule::kConstantOne;
  if (name == "constant-0") return SigmaSchedule::kConstantZero;
  throw std::invalid_argument("unknown sigma schedule: " + name);
}

double curriculum_sigma(double progress, SigmaSchedule kind) {
  if (progress < 0.0 || progress > 1.0)
    throw std::invalid_argument("curriculum_sigma: progress out of [0,1]");
  switch (kind) {
    case SigmaSchedule::kPiecewiseLinear:
      return progress < 0.2 ? 1.0 : 1.0 - (progress - 0.2) / 0.8;
    case SigmaSchedule::kLinear:
      return 1.0 - progress;
    case SigmaSchedule::kCosine:
      return 0.5 * (1.0 + std::cos(M_PI * progress));
    case SigmaSchedule::kStep:
      return progress < 0.5 ? 1.0 : 0.0;
    case SigmaSchedule::kConstantOne:
      return 1.0;
    case SigmaSchedule::kConstantZero:
      return 0.0;
  }
  return 0.0;
}

Matrix self_condition_mix(const Matrix& ground_truth, const Matrix& generated, double sigma,
                          Rng& rng) {
  if (!ground_truth.same_shape(generated))
    throw std::invalid_argument("self_condition_mix: shape mismatch");
  if (sigma < 0.0 || sigma > 1.0)
    throw std::invalid_argument("self_condition_mix: sigma out of [0,1]");
  bool use_ground_truth = rng.bernoulli(sigma);
  return use_ground_truth ? ground_truth : generated;
}

double masked_fm_loss(const Matrix& pred_flow, const Matrix& target_flow, const PrefixMask& mask) {
  if (!pred_flow.same_shape(target_flow))
    throw std::invalid_argument("masked_fm_loss: shape mismatch");
  if (mask.horizon() != pred_flow.rows)
    throw std::invalid_argument("masked_fm_loss: mask length mismatch");
  double num = 0.0, denom = 0.0;
  for (int t = 0; t < pred_flow.rows; ++t) {
    denom += mask.values[t];
    if (mask.values[t] == 0.0) continue;
    double sq = 0.0;
    for (int c = 0; c < pred_flow.cols; ++c) {
      double r = pred_flow(t, c) - target_flow(t, c);
      sq += r * r;
    }
    num += mask.values[t] * sq;
  }
  return num / std::max(1.0, denom);
}

double delta_loss(const Matrix& pred_flow, const Matrix& base_flow, const Matrix& target_flow,
                  const PrefixMask& mask) {
  if (!pred_flow.same_shape(base_flow) || !pred_flow.same_shape(target_flow))
    throw std::invalid_argument("delta_loss: shape mismatch");
  if (mask.horizon() != pred_flow.rows)
    throw std::invalid_argument("delta_loss: mask length mismatch");
  double num = 0.0, denom = 0.0;
  for (int t = 0; t < pred_flow.rows; ++t) {
    double m = mask.values[t];
    denom += m;
    double sq = 0.0;
    for (int c = 0; c < pred_flow.cols; ++c) {
      double residual = m * (target_flow(t, c) - base_flow(t, c));
      double correction = m * (pred_flow(t, c) - base_flow(t, c));
      double r = residual - correction;
      sq += r * r;
    }
    num += sq;
  }
  return num / std::max(1.0, denom);
}

double total_loss(double loss_masked, double loss_delta, double weight_masked,
                  double weight_delta) {
  return weight_masked * loss_masked + weight_delta * loss_delta;
}

RemacResult remac_train(const PolicyParams& base, const TrainConfig& cfg, const Dataset& ds) {
  if (ds.pairs.empty()) throw std::invalid_argument("remac_train: empty dataset");
  const int P = base.spec.horizon, D = base.spec.action_dim;
  cfg.interval.validate(P);

  Rng rng_init(cfg.seed, streams::kInit);
  Rng rng_data(cfg.seed, streams::kData);
  Rng rng_curr(cfg.seed, streams::kCurriculum);
  Rng rng_policy(cfg.seed, streams::kPolicy);
  Rng rng_delay(cfg.seed, streams::kDelayModel);

  RemacResult result;
  result.policy = attach(base, cfg.adapter, rng_init);
  AdaptedPolicy& adapted = result.policy;
  if (cfg.epochs == 0) return result;

  auto flat = adapter_to_flat(adapted);
  OptimState opt(flat.size(), cfg.learning_rate);
  auto ones = ones_mask_features(P);

  std::vector<size_t> order(ds.pairs.size());
  std::iota(order.begin(), order.end(), 0);
  size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  double total_steps = static_cast<double>(cfg.epochs) * n_batches;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng_data.uniform_int(0, static_cast<int>(i) - 1)]);

    EpochLog log;
    log.epoch = epoch;
    double epoch_masked = 0.0, epoch_delta = 0.0, epoch_grad = 0.0;
    double epoch_progress = static_cast<double>(epoch) / cfg.epochs;
    log.sigma = curriculum_sigma(epoch_progress, cfg.sigma_kind);

    int delay = sample_delay(epoch_progress, cfg.interval, rng_delay);
    if (cfg.delay_resample == DelayResample::kEpoch) log.delays_used.push_back(delay);

    size_t batch_idx = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_idx) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      double progress = (epoch * static_cast<double>(n_batches) + batch_idx) / total_steps;
      if (cfg.delay_resample == DelayResample::kBatch) {
        delay = sample_delay(progress, cfg.interval, rng_delay);
        log.delays_used.push_back(delay);
      }
      PrefixMask mask = prefix_mask(delay, P);
      double sigma = curriculum_sigma(progress, cfg.sigma_kind);

      DenseNet eff = effective_net(adapted);
      auto feats = mask_features(adapted, mask.values);
      std::vector<double> grad_acc(flat.size(), 0.0);
      double batch_masked = 0.0, batch_delta = 0.0;
      double inv_batch = 1.0 / static_cast<double>(end - start);
      double mask_sum = std::max(1.0, std::accumulate(mask.values.begin(), mask.values.end(), 0.0));

      for (size_t bi = start; bi < end; ++bi) {
        const ChunkPair& pair = ds.pairs[order[bi]];
        auto obs_n = normalize_obs(base, pair.obs);
        Matrix target_n = normalize_chunk(base, pair.chunk);

        // Self-conditioning chunk from the frozen base policy; no gradient
        // flows into it. The same initial draw seeds both the generation and
        // the interpolation below, so self-conditioned inputs lie on the base
        // policy's own sampling path.
        Matrix prior_draw = sample_chunk_prior(base, rng_policy);
        Matrix generated = integrate(base, pair.obs, prior_draw, base.spec.integration_steps);
        Matrix generated_n = normalize_chunk(base, generated);
        Matrix mixed = self_condition_mix(target_n, generated_n, sigma, rng_curr);

        FlowSample fs;
        fs.noise = normalize_chunk(base, prior_draw);
        fs.s = rng_policy.uniform();
        fs.noisy = Matrix(P, D);
        for (size_t i = 0; i < fs.noisy.data.size(); ++i)
          fs.noisy.data[i] = (1.0 - fs.s) * fs.noise.data[i] + fs.s * mixed.data[i];
        // The mixture only shapes the interpolated input; the regression
        // target remains the ground-truth flow for the same noise draw.
        Matrix target_flow = added(target_n, scaled(fs.noise, -1.0));

        auto x = assemble_input(base, fs.noisy, obs_n, fs.s, feats);
        ForwardCache cache;
        auto pred = net_forward(eff, x, &cache);

        auto x_base = assemble_input(base, fs.noisy, obs_n, fs.s, ones);
        auto base_pred = net_forward(base.net, x_base);  // adapters disabled, detached

        Matrix pred_m(P, D), base_m(P, D);
        pred_m.data.assign(pred.begin(), pred.end());
        base_m.data.assign(base_pred.begin(), base_pred.end());
        batch_masked += masked_fm_loss(pred_m, target_flow, mask) * inv_batch;
        batch_delta += delta_loss(pred_m, base_m, target_flow, mask) * inv_batch;

        std::vector<double> dy(pred.size(), 0.0);
        for (int t = 0; t < P; ++t) {
          double m = mask.values[t];
          if (m == 0.0) continue;
          for (int c = 0; c < D; ++c) {
            size_t i = static_cast<size_t>(t) * D + c;
            double d_masked = 2.0 * m * (pred[i] - target_flow.data[i]) / mask_sum;
            double d_delta = 2.0 * m *
                             ((pred[i] - base_pred[i]) -
                              (target_flow.data[i] - base_pred[i])) / mask_sum;
            dy[i] = (cfg.weight_masked * d_masked + cfg.weight_delta * d_delta) * inv_batch;
          }
        }
        NetGrads g = net_backward(eff, cache, dy);
        auto aflat = adapter_grads_from_net(adapted, g, mask.values);
        for (size_t i = 0; i < grad_acc.size(); ++i) grad_acc[i] += aflat[i];
      }

      double batch_total = total_loss(batch_masked, batch_delta, cfg.weight_masked,
                                      cfg.weight_delta);
      if (!std::isfinite(batch_total))
        throw std::runtime_error("remac_train: non-finite loss at epoch " +
                                 std::to_string(epoch) + " batch " + std::to_string(batch_idx));

      adam_step(flat, grad_acc, opt,
                [&adapted](size_t i) { return adapter_param_name(adapted, i); });
      flat_to_adapter(flat, adapted);

      epoch_masked += batch_masked;
      epoch_delta += batch_delta;
      double gn = 0.0;
      for (double g : grad_acc) gn += g * g;
      epoch_grad += std::sqrt(gn);
    }

    log.loss.masked = epoch_masked / n_batches;
    log.loss.delta = epoch_delta / n_batches;
    log.loss.total = total_loss(log.loss.masked, log.loss.delta, cfg.weight_masked,
                                cfg.weight_delta);
    log.grad_norm = epoch_grad / n_batches;
    result.log.push_back(std::move(log));
  }
  return result;
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_training_log: cannot open " + path);
  out << "remac-train-log v1\n";
  for (const auto& e : log) {
    out << "epoch " << e.epoch << " delays ";
    for (size_t i = 0; i < e.delays_used.size(); ++i) {
      if (i) out << ",";
      out << e.delays_used[i];
    }
    out << " sigma " << fmt_fixed(e.sigma) << " loss_masked " << fmt_double(e.loss.masked)
        << " loss_delta " << fmt_double(e.loss.delta) << " loss " << fmt_double(e.loss.total)
        << " grad_norm " << fmt_double(e.grad_norm) << "\n";
  }
}

}  // namespace remaclab
