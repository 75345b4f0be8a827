// pybind11 surface over the core operations: environment, replay, model,
// consolidation, error correction, planning and the evaluation harness.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "minipac/harness.hpp"

namespace py = pybind11;
using namespace minipac;

namespace {

py::array_t<std::uint8_t> frame_to_array(const Frame& f) {
  py::array_t<std::uint8_t> arr({kFrameHeight, kFrameWidth});
  auto buf = arr.mutable_unchecked<2>();
  for (int r = 0; r < kFrameHeight; ++r)
    for (int c = 0; c < kFrameWidth; ++c)
      buf(r, c) = static_cast<std::uint8_t>(f.at(r, c));
  return arr;
}

Frame frame_from_array(const py::array_t<std::uint8_t>& arr) {
  if (arr.ndim() != 2 || arr.shape(0) != kFrameHeight ||
      arr.shape(1) != kFrameWidth)
    throw std::invalid_argument("frame array must be 15x19 uint8");
  Frame f;
  auto buf = arr.unchecked<2>();
  for (int r = 0; r < kFrameHeight; ++r)
    for (int c = 0; c < kFrameWidth; ++c) {
      if (buf(r, c) >= kNumCellClasses)
        throw std::invalid_argument("cell class out of range");
      f.set(r, c, static_cast<CellClass>(buf(r, c)));
    }
  return f;
}

}  // namespace

PYBIND11_MODULE(_minipac, m) {
  m.doc() = "Minipacman simulator, bootstrapped forward models, error "
            "correction and rolling horizon evolution";

  py::enum_<CellClass>(m, "CellClass")
      .value("Wall", CellClass::Wall)
      .value("Food", CellClass::Food)
      .value("Eaten", CellClass::Eaten)
      .value("PowerPill", CellClass::PowerPill)
      .value("Pacman", CellClass::Pacman)
      .value("Ghost", CellClass::Ghost);

  py::enum_<Action>(m, "Action")
      .value("Up", Action::Up)
      .value("Down", Action::Down)
      .value("Left", Action::Left)
      .value("Right", Action::Right)
      .value("Noop", Action::Noop);

  py::enum_<ConsolidationMode>(m, "ConsolidationMode")
      .value("Average", ConsolidationMode::Average)
      .value("Voting", ConsolidationMode::Voting)
      .value("Sampling", ConsolidationMode::Sampling);

  m.attr("REWARD_VALUES") = py::make_tuple(-1, 0, 1, 3, 6);
  m.attr("FRAME_HEIGHT") = kFrameHeight;
  m.attr("FRAME_WIDTH") = kFrameWidth;

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("maze_path", &EnvConfig::maze_path)
      .def_readwrite("chase_prob", &EnvConfig::chase_prob)
      .def_readwrite("pill_duration", &EnvConfig::pill_duration)
      .def_readwrite("episode_cap", &EnvConfig::episode_cap);

  py::class_<GameState>(m, "GameState")
      .def_property_readonly("frame",
                             [](const GameState& s) {
                               return frame_to_array(s.frame());
                             })
      .def_readonly("power_timer", &GameState::power_timer)
      .def_readonly("step_count", &GameState::step_count)
      .def_readonly("score", &GameState::score)
      .def_readonly("done", &GameState::done)
      .def("clone", [](const GameState& s) { return Env::clone_state(s); });

  py::class_<Env>(m, "Env")
      .def(py::init<EnvConfig>(), py::arg("config") = EnvConfig{})
      .def("reset", &Env::reset, py::arg("seed"))
      .def(
          "step",
          [](const Env& env, GameState& s, Action a) {
            const StepResult r = env.step(s, a);
            return py::make_tuple(r.reward_value, r.reward_class, r.done);
          },
          py::arg("state"), py::arg("action"));

  m.def("encode_input", [](const py::array_t<std::uint8_t>& frame, Action a) {
    const auto x = encode_input(frame_from_array(frame), a);
    py::array_t<double> arr({kFrameHeight, kFrameWidth, kInputChannels});
    std::copy(x.begin(), x.end(), arr.mutable_data());
    return arr;
  });

  py::class_<ReplayBuffer>(m, "ReplayBuffer")
      .def(py::init<int, int>(), py::arg("capacity"), py::arg("num_heads"))
      .def("push",
           [](ReplayBuffer& buf, const py::array_t<std::uint8_t>& s, Action a,
              int reward_class, const py::array_t<std::uint8_t>& s_next,
              bool done, std::uint64_t seed) {
             std::mt19937_64 rng(seed);
             buf.push(frame_from_array(s), a,
                      static_cast<RewardClass>(reward_class),
                      frame_from_array(s_next), done, rng);
           },
           py::arg("s"), py::arg("action"), py::arg("reward_class"),
           py::arg("s_next"), py::arg("done"), py::arg("seed"))
      .def("__len__", &ReplayBuffer::size)
      .def_property_readonly("capacity", &ReplayBuffer::capacity)
      .def("save", &ReplayBuffer::save)
      .def_static("load", &ReplayBuffer::load);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("num_heads", &ModelConfig::num_heads)
      .def_readwrite("prior_scale", &ModelConfig::prior_scale)
      .def_readwrite("use_prior", &ModelConfig::use_prior)
      .def_readwrite("learning_rate", &ModelConfig::learning_rate)
      .def_readwrite("batch_size", &ModelConfig::batch_size)
      .def_readwrite("trunk_width", &ModelConfig::trunk_width)
      .def_readwrite("trunk_layers", &ModelConfig::trunk_layers)
      .def_readwrite("pool_inject", &ModelConfig::pool_inject);

  py::class_<EnsemblePrediction>(m, "EnsemblePrediction")
      .def_readonly("num_heads", &EnsemblePrediction::num_heads)
      .def("head_frame", [](const EnsemblePrediction& p, int k) {
        Frame f;
        for (int i = 0; i < kNumCells; ++i) f.cells[i] = p.head_cell(k, i);
        return frame_to_array(f);
      });

  py::class_<UnifiedPrediction>(m, "UnifiedPrediction")
      .def_property_readonly(
          "frame",
          [](const UnifiedPrediction& u) { return frame_to_array(u.frame); })
      .def_readonly("reward_class", &UnifiedPrediction::reward);

  py::class_<EnsembleModel>(m, "EnsembleModel")
      .def(py::init<ModelConfig, std::uint64_t>(), py::arg("config"),
           py::arg("seed"))
      .def("predict",
           [](const EnsembleModel& model, const py::array_t<std::uint8_t>& f,
              Action a) {
             return EnsemblePrediction::from_head_outputs(
                 model.forward_all_heads(frame_from_array(f), a));
           })
      .def("train_on",
           [](EnsembleModel& model, ReplayBuffer& buf, int batch_size,
              std::uint64_t seed) {
             std::mt19937_64 rng(seed);
             const auto stats =
                 model.train_step(buf.sample_minibatch(batch_size, rng));
             return stats.total_loss;
           },
           py::arg("buffer"), py::arg("batch_size"), py::arg("seed"))
      .def("save", &EnsembleModel::save)
      .def_static("load", &EnsembleModel::load);

  m.def("consolidate",
        [](const EnsemblePrediction& p, ConsolidationMode mode,
           std::uint64_t seed) {
          std::mt19937_64 rng(seed);
          return consolidate(p, mode, rng);
        },
        py::arg("prediction"), py::arg("mode"), py::arg("seed") = 0);

  m.def("apply_corrections",
        [](const py::array_t<std::uint8_t>& unified,
           const EnsemblePrediction& heads,
           const py::array_t<std::uint8_t>& last_real_frame,
           ConsolidationMode mode, std::uint64_t seed) {
          const Frame real = frame_from_array(last_real_frame);
          std::mt19937_64 rng(seed);
          const auto [frame, memory] = apply_corrections(
              frame_from_array(unified), heads, ConstraintSet::from_frame(real),
              RolloutMemory::from_frame(real), mode, rng);
          return frame_to_array(frame);
        },
        py::arg("unified"), py::arg("heads"), py::arg("last_real_frame"),
        py::arg("mode"), py::arg("seed") = 0);

  py::class_<PlannerConfig>(m, "PlannerConfig")
      .def(py::init<>())
      .def_readwrite("horizon", &PlannerConfig::horizon)
      .def_readwrite("population", &PlannerConfig::population)
      .def_readwrite("mutation_rate", &PlannerConfig::mutation_rate)
      .def_readwrite("shift_buffer", &PlannerConfig::shift_buffer)
      .def_readwrite("use_correction", &PlannerConfig::use_correction)
      .def_readwrite("consolidation", &PlannerConfig::consolidation);

  m.def("plan_perfect",
        [](const Env& env, const GameState& state, const PlannerConfig& cfg,
           std::uint64_t seed) {
          std::mt19937_64 rng(seed);
          const auto out =
              plan(make_perfect_evaluator(env, state), std::nullopt, cfg, rng);
          return py::make_tuple(out.action, out.fitness);
        },
        py::arg("env"), py::arg("state"), py::arg("config"), py::arg("seed"));

  m.def("plan_learned",
        [](const EnsembleModel& model, const py::array_t<std::uint8_t>& frame,
           const PlannerConfig& cfg, std::uint64_t seed) {
          std::mt19937_64 rng(seed);
          const Frame f = frame_from_array(frame);
          const auto out =
              plan(make_learned_evaluator(model, cfg, f), std::nullopt, cfg, rng);
          return py::make_tuple(out.action, out.fitness);
        },
        py::arg("model"), py::arg("frame"), py::arg("config"), py::arg("seed"));
}
