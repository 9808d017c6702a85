#include "cli.hpp"

#include "forge/amplify.hpp"
#include "forge/corpus.hpp"
#include "forge/cues.hpp"
#include "forge/expr.hpp"
#include "forge/puzzle.hpp"
#include "forge/scorer.hpp"
#include "forge/tracegen.hpp"
#include "forge/version.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace forge;

namespace {

Profile profile_arg(const std::string& name) {
  auto p = profile_from_name(name);
  if (!p) throw py::value_error("unknown profile: " + name);
  return *p;
}

py::dict counts_dict(const BehaviorCounts& c) {
  py::dict d;
  for (Behavior b : kBehaviors) d[py::str(std::string(behavior_name(b)))] = c[b];
  return d;
}

py::dict trace_dict(const Trace& t) {
  py::dict d;
  d["puzzle_id"] = t.puzzle_id;
  d["profile"] = std::string(profile_name(t.profile));
  d["thinking"] = t.thinking;
  d["answer"] = t.answer;
  d["correct"] = t.correct;
  d["word_count"] = t.word_count;
  return d;
}

py::list examples_list(const std::vector<Example>& rows) {
  py::list out;
  for (const Example& ex : rows) {
    py::dict d = trace_dict(ex.trace);
    d["numbers"] = ex.puzzle.numbers;
    d["target"] = ex.puzzle.target;
    d["prompt"] = countdown_prompt(ex.puzzle);
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Countdown puzzles, behavior-tagged traces, annotation, corpora and amplification";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ExprParseError", PyExc_ValueError);
  py::register_exception<QtaValidationError>(m, "QtaValidationError", PyExc_ValueError);

  py::class_<Puzzle>(m, "Puzzle")
      .def(py::init([](std::string id, std::vector<std::int64_t> numbers, std::int64_t target, std::uint64_t seed) {
             Puzzle p{std::move(id), std::move(numbers), target, seed};
             check_puzzle(p);
             return p;
           }),
           py::arg("id"), py::arg("numbers"), py::arg("target"), py::arg("seed") = 0)
      .def_readonly("id", &Puzzle::id)
      .def_readonly("numbers", &Puzzle::numbers)
      .def_readonly("target", &Puzzle::target)
      .def_readonly("seed", &Puzzle::seed)
      .def("__eq__", [](const Puzzle& a, const Puzzle& b) { return a == b; })
      .def("__repr__", [](const Puzzle& p) {
        std::ostringstream s;
        s << "Puzzle(id='" << p.id << "', numbers=[";
        for (std::size_t i = 0; i < p.numbers.size(); ++i) s << (i ? ", " : "") << p.numbers[i];
        s << "], target=" << p.target << ")";
        return s.str();
      });

  m.def(
      "generate",
      [](std::uint64_t seed, std::size_t count, std::int64_t min_number, std::int64_t max_number,
         std::int64_t min_target, std::int64_t max_target, bool solvable, unsigned threads) {
        GenConfig cfg;
        cfg.min_number = min_number;
        cfg.max_number = max_number;
        cfg.min_target = min_target;
        cfg.max_target = max_target;
        cfg.require_solvable = solvable;
        cfg.threads = threads;
        py::gil_scoped_release release;
        return generate(seed, count, cfg);
      },
      py::arg("seed"), py::arg("count"), py::arg("min_number") = 1, py::arg("max_number") = 99,
      py::arg("min_target") = 10, py::arg("max_target") = 999, py::arg("solvable") = true, py::arg("threads") = 0);

  m.def(
      "solve",
      [](std::vector<std::int64_t> numbers, std::int64_t target, std::optional<std::uint64_t> budget) {
        SolveResult r = solve_numbers(numbers, target, budget);
        py::dict d;
        d["status"] = std::string(to_string(r.status));
        d["witness"] = r.witness ? py::object(py::str(render(*r.witness))) : py::object(py::none());
        d["explored"] = r.explored;
        return d;
      },
      py::arg("numbers"), py::arg("target"), py::arg("budget") = py::none());

  m.def(
      "evaluate",
      [](const std::string& text) { return eval(parse(text)).str(); },
      py::arg("expression"), "Exact value of an arithmetic expression, as 'p' or 'p/q'.");

  m.def(
      "score",
      [](const std::string& response, const Puzzle& puzzle) {
        RewardBreakdown r = score(parse_response(response), puzzle);
        py::dict d;
        d["format_ok"] = r.format_ok;
        d["answer_correct"] = r.answer_correct;
        d["total"] = r.total();
        return d;
      },
      py::arg("response"), py::arg("puzzle"));
  m.def("format_response", &format_response, py::arg("thinking"), py::arg("answer"));

  m.def("profiles", [] {
    std::vector<std::string> names;
    for (Profile p : kProfiles) names.emplace_back(profile_name(p));
    return names;
  });
  m.def(
      "synthesize",
      [](const Puzzle& p, const std::string& profile, std::uint64_t seed) {
        return trace_dict(synthesize(p, profile_arg(profile), seed));
      },
      py::arg("puzzle"), py::arg("profile"), py::arg("seed"));
  m.def(
      "build_dataset",
      [](const std::string& profile, std::uint64_t seed, std::size_t total, std::size_t eval, unsigned threads) {
        DatasetOptions opts;
        opts.total = total;
        opts.eval = eval;
        opts.threads = threads;
        DatasetSplit split;
        {
          py::gil_scoped_release release;
          split = build_dataset(profile_arg(profile), seed, opts);
        }
        return py::make_tuple(examples_list(split.train), examples_list(split.eval));
      },
      py::arg("profile"), py::arg("seed"), py::arg("total") = 1200, py::arg("eval") = 200, py::arg("threads") = 0);

  m.def(
      "count_behaviors", [](const std::string& text) { return counts_dict(count_rules(text)); }, py::arg("text"),
      "Rule-based behavior counts.");

  m.def("to_first_person", &to_first_person, py::arg("text"));
  m.def(
      "templated_qta", [](const std::string& text) { return serialize_qta(templated_qta(text)); }, py::arg("text"));
  m.def(
      "parse_qta",
      [](const std::string& text) {
        QTADocument d = parse_qta(text);
        return py::make_tuple(d.question, d.thinking, d.answer);
      },
      py::arg("text"));

  m.def(
      "run_experiment",
      [](const std::string& settings) {
        ExperimentConfig cfg = ExperimentConfig::from_key_values(parse_key_values(settings));
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        py::dict d;
        d["initial_eval_reward"] = r.initial_eval_reward;
        d["final_eval_reward"] = r.final_eval_reward;
        py::dict probs;
        const auto& strategies = r.training.final_state.strategies();
        std::vector<double> p = r.training.final_state.probabilities();
        for (std::size_t k = 0; k < strategies.size(); ++k) probs[py::str(strategies[k].name)] = p[k];
        d["final_probabilities"] = probs;
        d["metrics_csv"] = metrics_csv(r.training.final_state, r.training.steps);
        return d;
      },
      py::arg("settings"), "Runs an amplification experiment from key = value settings text.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::dispatch(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a forge command in-process; returns (exit_code, stdout, stderr).");
}
