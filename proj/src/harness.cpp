#include "minipac/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace minipac::harness {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw std::invalid_argument("config: bad boolean '" + v + "'");
}

}  // namespace

void ExperimentConfig::apply_override(const std::string& key,
                                      const std::string& value) {
  if (key == "maze_path") env.maze_path = value;
  else if (key == "chase_prob") env.chase_prob = std::stod(value);
  else if (key == "pill_duration") env.pill_duration = std::stoi(value);
  else if (key == "episode_cap") env.episode_cap = std::stoi(value);
  else if (key == "num_heads") model.num_heads = std::stoi(value);
  else if (key == "prior_scale") model.prior_scale = std::stod(value);
  else if (key == "use_prior") model.use_prior = parse_bool(value);
  else if (key == "learning_rate") model.learning_rate = std::stod(value);
  else if (key == "batch_size") model.batch_size = std::stoi(value);
  else if (key == "trunk_width") model.trunk_width = std::stoi(value);
  else if (key == "trunk_layers") model.trunk_layers = std::stoi(value);
  else if (key == "pool_inject") model.pool_inject = parse_bool(value);
  else if (key == "horizon") planner.horizon = std::stoi(value);
  else if (key == "population") planner.population = std::stoi(value);
  else if (key == "mutation_rate") planner.mutation_rate = std::stod(value);
  else if (key == "shift_buffer") planner.shift_buffer = parse_bool(value);
  else if (key == "use_correction") planner.use_correction = parse_bool(value);
  else if (key == "consolidation")
    planner.consolidation = consolidation_from_string(value);
  else if (key == "train_steps") train_steps = std::stoi(value);
  else if (key == "warmup_steps") warmup_steps = std::stoi(value);
  else if (key == "buffer_capacity") buffer_capacity = std::stoi(value);
  else if (key == "log_every") log_every = std::stoi(value);
  else if (key == "eval_episodes") eval_episodes = std::stoi(value);
  else if (key == "plan_episodes") plan_episodes = std::stoi(value);
  else if (key == "horizons") horizons = parse_int_list(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "out_dir") out_dir = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty()) cfg.apply_override(key, value);
  }
  return cfg;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  o << "maze_path=" << env.maze_path << "\n"
    << "chase_prob=" << fmt(env.chase_prob) << "\n"
    << "pill_duration=" << env.pill_duration << "\n"
    << "episode_cap=" << env.episode_cap << "\n"
    << "num_heads=" << model.num_heads << "\n"
    << "prior_scale=" << fmt(model.prior_scale) << "\n"
    << "use_prior=" << (model.use_prior ? 1 : 0) << "\n"
    << "learning_rate=" << fmt(model.learning_rate) << "\n"
    << "batch_size=" << model.batch_size << "\n"
    << "trunk_width=" << model.trunk_width << "\n"
    << "trunk_layers=" << model.trunk_layers << "\n"
    << "pool_inject=" << (model.pool_inject ? 1 : 0) << "\n"
    << "horizon=" << planner.horizon << "\n"
    << "population=" << planner.population << "\n"
    << "mutation_rate=" << fmt(planner.mutation_rate) << "\n"
    << "shift_buffer=" << (planner.shift_buffer ? 1 : 0) << "\n"
    << "use_correction=" << (planner.use_correction ? 1 : 0) << "\n"
    << "consolidation=" << to_string(planner.consolidation) << "\n"
    << "train_steps=" << train_steps << "\n"
    << "warmup_steps=" << warmup_steps << "\n"
    << "buffer_capacity=" << buffer_capacity << "\n"
    << "log_every=" << log_every << "\n"
    << "eval_episodes=" << eval_episodes << "\n"
    << "plan_episodes=" << plan_episodes << "\n";
  o << "horizons=";
  for (size_t i = 0; i < horizons.size(); ++i)
    o << (i ? "," : "") << horizons[i];
  o << "\nseed=" << seed << "\nout_dir=" << out_dir << "\n";
  return o.str();
}

void ExperimentConfig::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << to_text();
}

TrainResult train(const ExperimentConfig& cfg, const std::string& tag) {
  fs::create_directories(cfg.out_dir);
  const Env env(cfg.env);
  EnsembleModel model(cfg.model, mix_seed(cfg.seed, 1));
  ReplayBuffer buffer(cfg.buffer_capacity, cfg.model.num_heads);

  std::mt19937_64 policy_rng(mix_seed(cfg.seed, 2));
  std::mt19937_64 mask_rng(mix_seed(cfg.seed, 3));
  std::mt19937_64 batch_rng(mix_seed(cfg.seed, 4));

  TrainResult result;
  result.checkpoint_path = cfg.out_dir + "/" + tag + ".ckpt";
  result.loss_log_path = cfg.out_dir + "/" + tag + "_loss.csv";

  std::ofstream log(result.loss_log_path);
  log << "step,total_loss";
  for (int k = 0; k < cfg.model.num_heads; ++k)
    log << ",state_loss_" << k << ",reward_loss_" << k;
  log << "\n";

  std::uint64_t episode = 0;
  GameState state = env.reset(mix_seed(cfg.seed, 100 + episode));
  bool first_logged = false;
  try {
    for (int t = 0; t < cfg.train_steps; ++t) {
      const Frame before = state.frame();
      const Action action = draw_action(policy_rng);
      const StepResult sr = env.step(state, action);
      buffer.push(before, action, sr.reward_class, state.frame(), sr.done,
                  mask_rng);
      if (sr.done) state = env.reset(mix_seed(cfg.seed, 100 + ++episode));

      if (t + 1 < cfg.warmup_steps || buffer.size() < cfg.model.batch_size)
        continue;
      const auto batch =
          buffer.sample_minibatch(cfg.model.batch_size, batch_rng);
      const TrainStats stats = model.train_step(batch);
      ++result.steps_trained;
      if (t % cfg.log_every == 0 || t + 1 == cfg.train_steps) {
        log << t << "," << fmt(stats.total_loss);
        for (int k = 0; k < cfg.model.num_heads; ++k)
          log << "," << fmt(stats.state_loss[k]) << ","
              << fmt(stats.reward_loss[k]);
        log << "\n";
        if (!first_logged) {
          result.first_logged_loss = stats.total_loss;
          first_logged = true;
        }
        result.last_logged_loss = stats.total_loss;
      }
    }
  } catch (...) {
    log.flush();  // keep the partial loss log for post-mortems
    throw;
  }
  model.save(result.checkpoint_path);
  return result;
}

Predictor model_predictor(const EnsembleModel& model) {
  return [&model](const GameState& s, Action a) {
    return EnsemblePrediction::from_head_outputs(
        model.forward_all_heads(s.frame(), a));
  };
}

Predictor oracle_predictor(const Env& env) {
  return [&env](const GameState& s, Action a) {
    GameState clone = Env::clone_state(s);
    const StepResult sr = env.step(clone, a);
    // One pseudo-head with probability 1 on the true outcome.
    HeadOutput h;
    h.state_logits.assign(kNumCells * kNumCellClasses, 0.0);
    const Frame next = clone.frame();
    for (int i = 0; i < kNumCells; ++i)
      h.state_logits[i * kNumCellClasses +
                     static_cast<int>(next.cells[i])] = 50.0;
    h.reward_logits.assign(kNumRewardClasses, 0.0);
    h.reward_logits[sr.reward_class] = 50.0;
    return EnsemblePrediction::from_head_outputs({h});
  };
}

AccuracyReport eval_accuracy_core(const Predictor& predict, const Env& env,
                                  int episodes, ConsolidationMode mode,
                                  bool error_correction, std::uint64_t seed) {
  AccuracyReport rep;
  std::array<long, kNumCellClasses> class_total{}, class_correct{};
  long reward_correct = 0;
  std::array<long, kNumCellClasses> fulfil{};

  for (int ep = 0; ep < episodes; ++ep) {
    std::mt19937_64 policy_rng(mix_seed(seed, 1000 + ep));
    std::mt19937_64 eval_rng(mix_seed(seed, 2000 + ep));
    GameState state = env.reset(mix_seed(seed, 3000 + ep));
    while (!state.done) {
      const Frame current = state.frame();
      const Action action = draw_action(policy_rng);
      const EnsemblePrediction pred = predict(state, action);
      UnifiedPrediction u = consolidate(pred, mode, eval_rng);
      if (error_correction) {
        // One-step protocol: memory and constraints reset from the real frame.
        const ConstraintSet constraints = ConstraintSet::from_frame(current);
        RolloutMemory memory = RolloutMemory::from_frame(current);
        u.frame = apply_corrections(u.frame, pred, constraints, memory, mode,
                                    eval_rng)
                      .first;
      }
      const StepResult sr = env.step(state, action);
      const Frame truth = state.frame();

      for (int i = 0; i < kNumCells; ++i) {
        const int gt = static_cast<int>(truth.cells[i]);
        ++class_total[gt];
        ++rep.total_cells;
        if (u.frame.cells[i] == truth.cells[i]) {
          ++class_correct[gt];
          ++rep.correct_cells;
        }
      }
      reward_correct += (u.reward == sr.reward_class);
      for (CellClass c :
           {CellClass::Pacman, CellClass::Ghost, CellClass::Food})
        fulfil[static_cast<int>(c)] +=
            (u.frame.count(c) == truth.count(c));
      ++rep.steps;
    }
  }

  auto ratio = [](long num, long den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / den;
  };
  const auto cls = [&](CellClass c) { return static_cast<int>(c); };
  rep.category_accuracy["Food"] =
      ratio(class_correct[cls(CellClass::Food)], class_total[cls(CellClass::Food)]);
  rep.category_accuracy["Eaten"] =
      ratio(class_correct[cls(CellClass::Eaten)], class_total[cls(CellClass::Eaten)]);
  rep.category_accuracy["Pacman"] =
      ratio(class_correct[cls(CellClass::Pacman)], class_total[cls(CellClass::Pacman)]);
  rep.category_accuracy["Ghost"] =
      ratio(class_correct[cls(CellClass::Ghost)], class_total[cls(CellClass::Ghost)]);
  rep.frame_accuracy = ratio(rep.correct_cells, rep.total_cells);
  rep.reward_accuracy = ratio(reward_correct, rep.steps);
  rep.constraint_fulfilment["Pacman"] =
      ratio(fulfil[cls(CellClass::Pacman)], rep.steps);
  rep.constraint_fulfilment["Ghost"] =
      ratio(fulfil[cls(CellClass::Ghost)], rep.steps);
  rep.constraint_fulfilment["Food"] =
      ratio(fulfil[cls(CellClass::Food)], rep.steps);
  return rep;
}

AccuracyReport eval_accuracy(const EnsembleModel& model, const Env& env,
                             int episodes, ConsolidationMode mode,
                             bool error_correction, std::uint64_t seed) {
  return eval_accuracy_core(model_predictor(model), env, episodes, mode,
                            error_correction, seed);
}

namespace {

ScoreRow run_planning_episodes(
    const Env& env, PlannerConfig planner, int horizon, int episodes,
    std::uint64_t seed, const std::string& variant,
    const std::function<SequenceEvaluator(const GameState&)>& make_evaluator) {
  planner.horizon = horizon;
  ScoreRow row;
  row.variant = variant;
  row.consolidation = to_string(planner.consolidation);
  row.error_correction = planner.use_correction;
  row.horizon = horizon;
  for (int ep = 0; ep < episodes; ++ep) {
    std::mt19937_64 plan_rng(mix_seed(seed, 5000 + ep));
    GameState state = env.reset(mix_seed(seed, 6000 + ep));
    std::optional<ActionSequence> prev;
    while (!state.done) {
      const PlanOutcome out =
          plan(make_evaluator(state), prev, planner, plan_rng);
      env.step(state, out.action);
      prev = out.best_sequence;
    }
    row.scores.push_back(state.score);
  }
  double sum = 0.0;
  for (int s : row.scores) sum += s;
  row.mean = row.scores.empty() ? 0.0 : sum / row.scores.size();
  return row;
}

}  // namespace

ScoreRow eval_planning_learned(const EnsembleModel& model, const Env& env,
                               PlannerConfig planner, int horizon,
                               int episodes, std::uint64_t seed,
                               const std::string& variant) {
  return run_planning_episodes(
      env, planner, horizon, episodes, seed, variant,
      [&model, planner](const GameState& s) {
        return make_learned_evaluator(model, planner, s.frame());
      });
}

ScoreRow eval_planning_perfect(const Env& env, PlannerConfig planner,
                               int horizon, int episodes, std::uint64_t seed) {
  planner.use_correction = false;
  return run_planning_episodes(
      env, planner, horizon, episodes, seed, "perfect",
      [&env](const GameState& s) { return make_perfect_evaluator(env, s); });
}

void write_score_csv(const ScoreReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "variant,consolidation,error_correction,horizon,mean,scores\n";
  for (const auto& row : report.rows) {
    out << row.variant << "," << row.consolidation << ","
        << (row.error_correction ? 1 : 0) << "," << row.horizon << ","
        << fmt(row.mean) << ",";
    for (size_t i = 0; i < row.scores.size(); ++i)
      out << (i ? ";" : "") << row.scores[i];
    out << "\n";
  }
}

void write_accuracy_csv(
    const std::vector<std::pair<std::string, AccuracyReport>>& reports,
    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "run,food,eaten,pacman,ghost,frame,reward,"
         "fulfil_pacman,fulfil_ghost,fulfil_food,steps\n";
  for (const auto& [name, r] : reports) {
    out << name << "," << fmt(r.category_accuracy.at("Food")) << ","
        << fmt(r.category_accuracy.at("Eaten")) << ","
        << fmt(r.category_accuracy.at("Pacman")) << ","
        << fmt(r.category_accuracy.at("Ghost")) << ","
        << fmt(r.frame_accuracy) << "," << fmt(r.reward_accuracy) << ","
        << fmt(r.constraint_fulfilment.at("Pacman")) << ","
        << fmt(r.constraint_fulfilment.at("Ghost")) << ","
        << fmt(r.constraint_fulfilment.at("Food")) << "," << r.steps << "\n";
  }
}

void compare_variants(const ExperimentConfig& cfg, const CompareInputs& in,
                      bool include_planning) {
  fs::create_directories(cfg.out_dir);
  const Env env(cfg.env);

  const std::vector<std::pair<std::string, std::string>> variants = {
      {"single_head", in.sh_checkpoint},
      {"boot", in.btf_checkpoint},
      {"rpf", in.rpf_checkpoint}};
  for (const auto& [name, path] : variants)
    if (!fs::exists(path))
      throw std::runtime_error("compare: missing checkpoint for variant '" +
                               name + "': " + path);

  const EnsembleModel sh = EnsembleModel::load(in.sh_checkpoint);
  const EnsembleModel btf = EnsembleModel::load(in.btf_checkpoint);
  const EnsembleModel rpf = EnsembleModel::load(in.rpf_checkpoint);

  const std::array<ConsolidationMode, 3> modes = {ConsolidationMode::Average,
                                                  ConsolidationMode::Voting,
                                                  ConsolidationMode::Sampling};

  // SH is evaluated once (K=1 makes consolidation trivial) and without EC;
  // its EC cells are written as dashes.
  const AccuracyReport sh_rep = eval_accuracy(
      sh, env, cfg.eval_episodes, ConsolidationMode::Average, false, cfg.seed);

  std::map<std::string, AccuracyReport> grid;
  std::vector<std::pair<std::string, AccuracyReport>> flat{{"single_head",
                                                            sh_rep}};
  for (const auto* m : {&btf, &rpf}) {
    const std::string mname = m == &btf ? "boot" : "rpf";
    for (ConsolidationMode mode : modes) {
      for (bool ec : {false, true}) {
        const std::string key =
            mname + "_" + to_string(mode) + (ec ? "_ec" : "");
        grid[key] =
            eval_accuracy(*m, env, cfg.eval_episodes, mode, ec, cfg.seed);
        flat.emplace_back(key, grid[key]);
      }
    }
  }
  write_accuracy_csv(flat, cfg.out_dir + "/accuracy_runs.csv");

  // Summary table: one metric per row, seven model columns.
  {
    std::ofstream out(cfg.out_dir + "/table1.csv");
    if (!out) throw std::runtime_error("cannot write table1.csv");
    out << "metric,single_head,average_boot,average_rpf,voting_boot,"
           "voting_rpf,sampling_boot,sampling_rpf\n";
    auto cell = [&](const std::string& model, ConsolidationMode mode, bool ec,
                    auto getter) -> std::string {
      const std::string key =
          model + "_" + to_string(mode) + (ec ? "_ec" : "");
      return fmt(getter(grid.at(key)));
    };
    auto row = [&](const std::string& label, bool ec, bool sh_blank,
                   auto getter) {
      out << label;
      if (sh_blank)
        out << ",-";
      else
        out << "," << fmt(getter(sh_rep));
      for (ConsolidationMode mode : modes)
        for (const std::string model : {"boot", "rpf"})
          out << "," << cell(model, mode, ec, getter);
      out << "\n";
    };
    row("fruit", false, false,
        [](const AccuracyReport& r) { return r.category_accuracy.at("Food"); });
    row("eaten_cell", false, false, [](const AccuracyReport& r) {
      return r.category_accuracy.at("Eaten");
    });
    row("pacman", false, false, [](const AccuracyReport& r) {
      return r.category_accuracy.at("Pacman");
    });
    row("pacman_ec", true, true, [](const AccuracyReport& r) {
      return r.category_accuracy.at("Pacman");
    });
    row("ghost", false, false, [](const AccuracyReport& r) {
      return r.category_accuracy.at("Ghost");
    });
    row("ghost_ec", true, true, [](const AccuracyReport& r) {
      return r.category_accuracy.at("Ghost");
    });
    row("reward", false, false,
        [](const AccuracyReport& r) { return r.reward_accuracy; });
    row("frame", false, false,
        [](const AccuracyReport& r) { return r.frame_accuracy; });
    row("fulfil_fruit", false, false, [](const AccuracyReport& r) {
      return r.constraint_fulfilment.at("Food");
    });
    row("fulfil_pacman", false, false, [](const AccuracyReport& r) {
      return r.constraint_fulfilment.at("Pacman");
    });
    row("fulfil_pacman_ec", true, true, [](const AccuracyReport& r) {
      return r.constraint_fulfilment.at("Pacman");
    });
    row("fulfil_ghost", false, false, [](const AccuracyReport& r) {
      return r.constraint_fulfilment.at("Ghost");
    });
    row("fulfil_ghost_ec", true, true, [](const AccuracyReport& r) {
      return r.constraint_fulfilment.at("Ghost");
    });
  }

  if (!include_planning) return;

  ScoreReport scores;
  for (int horizon : cfg.horizons) {
    PlannerConfig base = cfg.planner;
    base.use_correction = false;
    scores.rows.push_back(eval_planning_learned(
        sh, env, base, horizon, cfg.plan_episodes, cfg.seed, "single_head"));
    for (const auto* m : {&btf, &rpf}) {
      const std::string mname = m == &btf ? "boot" : "rpf";
      for (bool ec : {false, true}) {
        PlannerConfig p = cfg.planner;
        p.use_correction = ec;
        scores.rows.push_back(eval_planning_learned(
            *m, env, p, horizon, cfg.plan_episodes, cfg.seed, mname));
      }
    }
  }
  write_score_csv(scores, cfg.out_dir + "/fig3.csv");
}

std::string frame_to_ascii(const Frame& f) {
  static constexpr char glyph[] = {'#', '.', ' ', 'o', 'P', 'G'};
  std::string out;
  out.reserve(kNumCells + kFrameHeight);
  for (int r = 0; r < kFrameHeight; ++r) {
    for (int c = 0; c < kFrameWidth; ++c)
      out += glyph[static_cast<int>(f.at(r, c))];
    out += '\n';
  }
  return out;
}

}  // namespace minipac::harness
