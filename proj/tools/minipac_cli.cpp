// Command-line front end: training, evaluation and planning experiments.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "minipac/harness.hpp"

namespace fs = std::filesystem;
using namespace minipac;
using harness::ExperimentConfig;

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path,
                  "flat key=value config file (defaults apply when omitted)");
  cmd->add_option("--set", opts.overrides,
                  "config override, key=value (repeatable)");
}

ExperimentConfig resolve(const CommonOpts& opts) {
  ExperimentConfig cfg = opts.config_path.empty()
                             ? ExperimentConfig{}
                             : ExperimentConfig::from_file(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set expects key=value, got '" + kv + "'");
    cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void write_resolved(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  cfg.write(cfg.out_dir + "/config_resolved.txt");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minipacman bootstrapped forward-model planning"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a forward model");
  CommonOpts train_opts;
  std::string train_tag = "model";
  std::string buffer_out;
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--tag", train_tag, "checkpoint name stem");
  train_cmd->add_option("--save-buffer", buffer_out,
                        "also snapshot the replay buffer to this path");

  // eval-accuracy
  auto* acc_cmd =
      app.add_subcommand("eval-accuracy", "next-step prediction accuracy");
  CommonOpts acc_opts;
  std::string acc_ckpt, acc_mode = "voting";
  bool acc_ec = false;
  add_common(acc_cmd, acc_opts);
  acc_cmd->add_option("--checkpoint", acc_ckpt)->required();
  acc_cmd->add_option("--consolidation", acc_mode,
                      "average | voting | sampling");
  acc_cmd->add_flag("--ec", acc_ec, "enable error correction");

  // eval-planning
  auto* plan_cmd =
      app.add_subcommand("eval-planning", "RHE game scores per horizon");
  CommonOpts plan_opts;
  std::string plan_ckpt;
  bool plan_perfect = false;
  add_common(plan_cmd, plan_opts);
  plan_cmd->add_option("--checkpoint", plan_ckpt,
                       "learned model checkpoint (omit with --perfect)");
  plan_cmd->add_flag("--perfect", plan_perfect,
                     "plan on the simulator instead of a learned model");

  // compare
  auto* cmp_cmd = app.add_subcommand(
      "compare", "accuracy/planning grid over SH, BTF and BTF+RPF");
  CommonOpts cmp_opts;
  harness::CompareInputs cmp_in;
  bool cmp_no_planning = false;
  add_common(cmp_cmd, cmp_opts);
  cmp_cmd->add_option("--sh", cmp_in.sh_checkpoint)->required();
  cmp_cmd->add_option("--btf", cmp_in.btf_checkpoint)->required();
  cmp_cmd->add_option("--rpf", cmp_in.rpf_checkpoint)->required();
  cmp_cmd->add_flag("--no-planning", cmp_no_planning,
                    "accuracy grid only (much faster)");

  // play-perfect
  auto* play_cmd = app.add_subcommand(
      "play-perfect", "play episodes with RHE on the simulator");
  CommonOpts play_opts;
  bool play_dump = false;
  add_common(play_cmd, play_opts);
  play_cmd->add_flag("--dump-frames", play_dump,
                     "write per-step ASCII frames under out_dir/frames");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const ExperimentConfig cfg = resolve(train_opts);
      write_resolved(cfg);
      const auto result = harness::train(cfg, train_tag);
      std::cout << "checkpoint: " << result.checkpoint_path << "\n"
                << "loss log:   " << result.loss_log_path << "\n";
      if (!buffer_out.empty()) {
        // Re-collect the same stream to snapshot the buffer contents.
        Env env(cfg.env);
        ReplayBuffer buf(cfg.buffer_capacity, cfg.model.num_heads);
        std::mt19937_64 policy(harness::mix_seed(cfg.seed, 2));
        std::mt19937_64 mask(harness::mix_seed(cfg.seed, 3));
        std::uint64_t episode = 0;
        GameState s = env.reset(harness::mix_seed(cfg.seed, 100));
        for (int t = 0; t < cfg.train_steps; ++t) {
          const Frame before = s.frame();
          const Action a = draw_action(policy);
          const StepResult sr = env.step(s, a);
          buf.push(before, a, sr.reward_class, s.frame(), sr.done, mask);
          if (sr.done) s = env.reset(harness::mix_seed(cfg.seed, 100 + ++episode));
        }
        buf.save(buffer_out);
        std::cout << "buffer:     " << buffer_out << "\n";
      }
    } else if (*acc_cmd) {
      const ExperimentConfig cfg = resolve(acc_opts);
      write_resolved(cfg);
      const Env env(cfg.env);
      const EnsembleModel model = EnsembleModel::load(acc_ckpt);
      const auto rep = harness::eval_accuracy(
          model, env, cfg.eval_episodes, consolidation_from_string(acc_mode),
          acc_ec, cfg.seed);
      harness::write_accuracy_csv({{fs::path(acc_ckpt).stem().string(), rep}},
                                  cfg.out_dir + "/accuracy.csv");
      std::cout << "frame " << rep.frame_accuracy << "  reward "
                << rep.reward_accuracy << "  pacman "
                << rep.category_accuracy.at("Pacman") << "  ghost "
                << rep.category_accuracy.at("Ghost") << "\n"
                << "wrote " << cfg.out_dir << "/accuracy.csv\n";
    } else if (*plan_cmd) {
      const ExperimentConfig cfg = resolve(plan_opts);
      write_resolved(cfg);
      const Env env(cfg.env);
      harness::ScoreReport report;
      if (plan_perfect) {
        for (int h : cfg.horizons)
          report.rows.push_back(harness::eval_planning_perfect(
              env, cfg.planner, h, cfg.plan_episodes, cfg.seed));
      } else {
        if (plan_ckpt.empty())
          throw CLI::ValidationError("--checkpoint or --perfect required");
        const EnsembleModel model = EnsembleModel::load(plan_ckpt);
        for (int h : cfg.horizons)
          report.rows.push_back(harness::eval_planning_learned(
              model, env, cfg.planner, h, cfg.plan_episodes, cfg.seed,
              fs::path(plan_ckpt).stem().string()));
      }
      harness::write_score_csv(report, cfg.out_dir + "/scores.csv");
      for (const auto& row : report.rows)
        std::cout << row.variant << " T=" << row.horizon << " mean "
                  << row.mean << "\n";
      std::cout << "wrote " << cfg.out_dir << "/scores.csv\n";
    } else if (*cmp_cmd) {
      const ExperimentConfig cfg = resolve(cmp_opts);
      write_resolved(cfg);
      harness::compare_variants(cfg, cmp_in, !cmp_no_planning);
      std::cout << "wrote " << cfg.out_dir << "/table1.csv";
      if (!cmp_no_planning) std::cout << " and fig3.csv";
      std::cout << "\n";
    } else if (*play_cmd) {
      const ExperimentConfig cfg = resolve(play_opts);
      write_resolved(cfg);
      const Env env(cfg.env);
      std::ofstream dump;
      if (play_dump) {
        fs::create_directories(cfg.out_dir + "/frames");
        dump.open(cfg.out_dir + "/frames/episodes.txt");
      }
      harness::ScoreReport report;
      harness::ScoreRow row;
      for (int ep = 0; ep < cfg.plan_episodes; ++ep) {
        std::mt19937_64 rng(harness::mix_seed(cfg.seed, 5000 + ep));
        GameState s = env.reset(harness::mix_seed(cfg.seed, 6000 + ep));
        std::optional<ActionSequence> prev;
        while (!s.done) {
          const auto out =
              plan(make_perfect_evaluator(env, s), prev, cfg.planner, rng);
          env.step(s, out.action);
          prev = out.best_sequence;
          if (play_dump)
            dump << "episode " << ep << " step " << s.step_count << " score "
                 << s.score << "\n"
                 << harness::frame_to_ascii(s.frame()) << "\n";
        }
        row.scores.push_back(s.score);
        std::cout << "episode " << ep << " score " << s.score << "\n";
      }
      row.variant = "perfect";
      row.consolidation = to_string(cfg.planner.consolidation);
      row.horizon = cfg.planner.horizon;
      double sum = 0;
      for (int v : row.scores) sum += v;
      row.mean = row.scores.empty() ? 0 : sum / row.scores.size();
      report.rows.push_back(row);
      harness::write_score_csv(report, cfg.out_dir + "/scores.csv");
      std::cout << "mean " << row.mean << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
