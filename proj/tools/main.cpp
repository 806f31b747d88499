#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "remaclab/harness.hpp"
#include "remaclab/io.hpp"

namespace fs = std::filesystem;
using namespace remaclab;

namespace {

struct CommonArgs {
  std::string config;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "experiment config file");
  cmd->add_option("--seed", args.seed, "master seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--out", args.out, "output directory")->required();
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg =
      args.config.empty() ? default_experiment_config() : load_experiment_config(args.config);
  if (args.seed_set) cfg.master_seed = args.seed;
  cfg.train.seed = cfg.master_seed;
  return cfg;
}

PolicyParams build_pretrained(const ExperimentConfig& cfg, const Dataset& ds,
                              std::vector<double>* curve = nullptr) {
  Rng init_rng(cfg.master_seed, streams::kInit);
  PolicyParams policy = make_policy(cfg.chunk, obs_dim(ds.env), cfg.hidden, true, init_rng);
  policy.norm = compute_norm_stats(ds);
  Rng data_rng(cfg.master_seed, streams::kData);
  auto losses = pretrain(policy, ds, cfg.pretrain, data_rng);
  if (curve) *curve = losses;
  return policy;
}

void write_loss_curve(const std::vector<double>& losses, const std::string& path) {
  std::ofstream out(path);
  out << "epoch,loss\n";
  for (size_t i = 0; i < losses.size(); ++i) out << i << "," << fmt_double(losses[i]) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"delayed-inference action-chunking lab"};
  app.require_subcommand(1);

  CommonArgs gen_a, pre_a, remac_a, eval_a, sweep_a, abl_a, plot_a;

  auto* gen = app.add_subcommand("gen-data", "generate an expert demonstration dataset");
  add_common(gen, gen_a);

  auto* pre = app.add_subcommand("pretrain", "pretrain the base chunked flow policy");
  add_common(pre, pre_a);
  std::string pre_data;
  pre->add_option("--data", pre_data, "dataset file (default: generate fresh)");

  auto* rem = app.add_subcommand("remac", "fine-tune delay-aware adapters and merge them");
  add_common(rem, remac_a);
  std::string rem_data, rem_policy;
  rem->add_option("--data", rem_data, "dataset file");
  rem->add_option("--policy", rem_policy, "pretrained policy checkpoint");

  auto* ev = app.add_subcommand("eval", "run rollout episodes for one strategy/delay cell");
  add_common(ev, eval_a);
  std::string ev_policy, ev_strategy = "naive-async";
  int ev_d = 0, ev_h = -1, ev_episodes = 20;
  ev->add_option("--policy", ev_policy, "policy checkpoint")->required();
  ev->add_option("--strategy", ev_strategy, "sync|naive-async|temporal-ensemble|rtc-lite|remac");
  ev->add_option("-d,--delay", ev_d, "inference delay in ticks");
  ev->add_option("--exec-horizon", ev_h, "execution horizon (default: config value)");
  ev->add_option("--episodes", ev_episodes, "episode count");

  auto* sw = app.add_subcommand("sweep", "strategy x delay x horizon evaluation grid");
  add_common(sw, sweep_a);
  std::string sw_base, sw_remac;
  sw->add_option("--policy", sw_base, "base policy checkpoint")->required();
  sw->add_option("--remac-policy", sw_remac, "merged delay-aware checkpoint");

  auto* ab = app.add_subcommand("ablate", "train and evaluate ablation variants");
  add_common(ab, abl_a);
  std::string ab_data, ab_policy;
  std::vector<std::string> ab_axes = {"component-stack"};
  ab->add_option("--data", ab_data, "dataset file");
  ab->add_option("--policy", ab_policy, "pretrained policy checkpoint");
  ab->add_option("--axes", ab_axes, "ablation axes");

  auto* pl = app.add_subcommand("plot", "render SVG plots from a summary CSV");
  add_common(pl, plot_a);
  std::string pl_summary;
  pl->add_option("--summary", pl_summary, "summary CSV file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      ExperimentConfig cfg = resolve_config(gen_a);
      fs::create_directories(gen_a.out);
      Dataset ds =
          generate_dataset(cfg.env, cfg.dataset_episodes, cfg.chunk.horizon, cfg.master_seed);
      save_dataset(ds, gen_a.out + "/dataset.bin");
      std::cout << "wrote " << gen_a.out << "/dataset.bin (" << ds.pairs.size() << " pairs from "
                << ds.episode_count << " episodes)\n";
    } else if (*pre) {
      ExperimentConfig cfg = resolve_config(pre_a);
      fs::create_directories(pre_a.out);
      Dataset ds = pre_data.empty()
                       ? generate_dataset(cfg.env, cfg.dataset_episodes, cfg.chunk.horizon,
                                          cfg.master_seed)
                       : load_dataset(pre_data);
      std::vector<double> curve;
      PolicyParams policy = build_pretrained(cfg, ds, &curve);
      save_policy(policy, pre_a.out + "/policy.bin");
      write_loss_curve(curve, pre_a.out + "/pretrain_loss.csv");
      std::cout << "wrote " << pre_a.out << "/policy.bin (final loss "
                << fmt_fixed(curve.empty() ? 0.0 : curve.back()) << ")\n";
    } else if (*rem) {
      ExperimentConfig cfg = resolve_config(remac_a);
      fs::create_directories(remac_a.out);
      Dataset ds = rem_data.empty()
                       ? generate_dataset(cfg.env, cfg.dataset_episodes, cfg.chunk.horizon,
                                          cfg.master_seed)
                       : load_dataset(rem_data);
      PolicyParams base;
      if (rem_policy.empty()) {
        base = build_pretrained(cfg, ds);
        save_policy(base, remac_a.out + "/policy.bin");
      } else {
        base = load_policy(rem_policy);
      }
      RemacResult result = remac_train(base, cfg.train, ds);
      save_adapter(result.policy, remac_a.out + "/adapter.bin");
      write_training_log(result.log, remac_a.out + "/train_log.csv");
      PolicyParams merged = merge(result.policy);
      save_policy(merged, remac_a.out + "/merged.bin");
      std::cout << "wrote " << remac_a.out << "/adapter.bin and merged.bin\n";
    } else if (*ev) {
      ExperimentConfig cfg = resolve_config(eval_a);
      fs::create_directories(eval_a.out);
      PolicyParams policy = load_policy(ev_policy);
      ChunkSpec spec = cfg.chunk;
      if (ev_h > 0) spec.exec_horizon = ev_h;
      DelaySpec delay = cfg.delay;
      delay.base_latency_ms = ev_d * cfg.delay.period_ms;
      ExecStrategy strat = make_strategy(cfg, ev_strategy);
      std::vector<EpisodeRecord> records;
      for (int e = 0; e < ev_episodes; ++e) {
        uint64_t seed = episode_seed(cfg.master_seed, ev_d, spec.exec_horizon, e);
        records.push_back(run_episode(cfg.env, policy, strat, spec, delay, seed));
        save_record(records.back(), eval_a.out + "/episode_" + std::to_string(e) + ".txt");
      }
      CellMetrics m = compute_metrics(records, cfg.env.max_steps);
      std::ofstream mo(eval_a.out + "/metrics.csv");
      mo << "strategy,d,h_or_avg,episodes,success_rate,mean_ticks,boundary_J,within_J\n";
      mo << ev_strategy << "," << ev_d << "," << spec.exec_horizon << "," << m.episodes << ","
         << fmt_fixed(m.success_rate) << "," << fmt_fixed(m.mean_ticks) << ","
         << fmt_fixed(m.boundary_jump) << "," << fmt_fixed(m.within_jump) << "\n";
      std::cout << ev_strategy << " d=" << ev_d << " h=" << spec.exec_horizon
                << " success=" << fmt_fixed(m.success_rate)
                << " ticks=" << fmt_fixed(m.mean_ticks) << "\n";
    } else if (*sw) {
      ExperimentConfig cfg = resolve_config(sweep_a);
      fs::create_directories(sweep_a.out);
      PolicyParams base = load_policy(sw_base);
      PolicyParams remac_policy = sw_remac.empty() ? base : load_policy(sw_remac);
      if (sw_remac.empty()) {
        for (const auto& s : cfg.strategies)
          if (s == "remac")
            throw std::runtime_error("sweep: strategy 'remac' requires --remac-policy");
      }
      MetricsSummary summary = run_sweep(cfg, base, remac_policy);
      write_summary_csv(summary, sweep_a.out + "/summary.csv");
      emit_plots(summary, sweep_a.out);
      std::cout << "wrote " << sweep_a.out << "/summary.csv (" << summary.rows.size()
                << " rows) and plots\n";
    } else if (*ab) {
      ExperimentConfig cfg = resolve_config(abl_a);
      fs::create_directories(abl_a.out);
      Dataset ds = ab_data.empty()
                       ? generate_dataset(cfg.env, cfg.dataset_episodes, cfg.chunk.horizon,
                                          cfg.master_seed)
                       : load_dataset(ab_data);
      PolicyParams base;
      if (ab_policy.empty()) {
        base = build_pretrained(cfg, ds);
        save_policy(base, abl_a.out + "/policy.bin");
      } else {
        base = load_policy(ab_policy);
      }
      auto rows = run_ablation(cfg, base, ds, ab_axes);
      write_ablation_csv(rows, abl_a.out + "/ablation.csv");
      std::cout << "wrote " << abl_a.out << "/ablation.csv (" << rows.size() << " rows)\n";
    } else if (*pl) {
      fs::create_directories(plot_a.out);
      MetricsSummary summary = load_summary_csv(pl_summary);
      emit_plots(summary, plot_a.out);
      std::cout << "wrote plots to " << plot_a.out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
