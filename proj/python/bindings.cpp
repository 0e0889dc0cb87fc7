#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "psqlab/agents.hpp"
#include "psqlab/environments.hpp"
#include "psqlab/harness.hpp"
#include "psqlab/mdp.hpp"
#include "psqlab/posterior.hpp"

namespace py = pybind11;
using namespace psqlab;

namespace {

EnvironmentInstance generate(const std::string& env, std::uint64_t seed, int instance, int horizon) {
  ExperimentConfig config;
  config.env = parse_env_family(env);
  config.master_seed = seed;
  config.chain.horizon = config.grid.horizon = horizon;
  return generate_instance(config, instance);
}

/// v*(h, s) as a nested list indexed [h - 1][s], h = 1..H.
std::vector<std::vector<double>> optimal_values(const TabularMDP& mdp) {
  const ValueTables values = solve_optimal(mdp);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(mdp.horizon()));
  for (int h = 1; h <= mdp.horizon(); ++h) {
    for (int s = 0; s < mdp.num_states(); ++s) out[static_cast<std::size_t>(h - 1)].push_back(values.v(h, s));
  }
  return out;
}

py::dict run(const std::string& config_text) {
  std::istringstream in(config_text);
  ExperimentConfig config = config_from_key_values(parse_key_values(in));
  ExperimentResult result;
  {
    py::gil_scoped_release release;
    result = run_experiment(config);
  }
  py::list curves;
  for (const auto& c : result.curves) {
    py::dict d;
    d["agent"] = c.agent;
    d["instance"] = c.instance;
    d["seed"] = c.seed;
    d["episode_return"] = c.episode_return;
    d["cumulative_regret"] = c.cumulative_regret;
    curves.append(d);
  }
  py::dict aggregate;
  for (const auto& a : result.aggregate) aggregate[py::str(a.agent)] = py::make_tuple(a.mean, a.stddev);
  py::dict out;
  out["v_star"] = result.v_star;
  out["curves"] = curves;
  out["aggregate"] = aggregate;
  return out;
}

}  // namespace

PYBIND11_MODULE(psqlab, m) {
  m.doc() = "Tabular episodic RL: posterior-sampling Q-learning, baselines and regret harness";
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def("learning_rate", &learning_rate, py::arg("n"), py::arg("horizon"));
  m.def("update_mean", &update_mean, py::arg("mean"), py::arg("target"), py::arg("n"),
        py::arg("horizon"));
  m.def("alpha_weights", &alpha_weights, py::arg("n"), py::arg("horizon"));
  m.def(
      "variance",
      [](long n, int horizon, const std::string& mode, double sigma_sq, double c_tuned, double v_max) {
        VarianceParams p;
        p.mode = parse_variance_mode(mode);
        if (p.mode == VarianceMode::kBernstein) {
          throw ValidationError("bernstein variance needs accumulators; use an agent instead");
        }
        p.sigma_sq = sigma_sq;
        p.c_tuned = c_tuned;
        p.v_max = v_max;
        return variance(n, horizon, p);
      },
      py::arg("n"), py::arg("horizon"), py::arg("mode") = "tuned", py::arg("sigma_sq") = 0.0,
      py::arg("c_tuned") = 0.02, py::arg("v_max") = 1.0);
  m.def("compute_J", &compute_J, py::arg("delta"), py::arg("num_states"), py::arg("num_actions"),
        py::arg("total_steps"), py::arg("horizon"));
  m.def(
      "relbo_posterior",
      [](double prior_mean, long prior_count, double sigma_sq, double z, int horizon) {
        const GaussianPosterior post = relbo_posterior(prior_mean, prior_count, sigma_sq, z, horizon);
        return py::make_tuple(post.mean, post.count, post.variance);
      },
      py::arg("prior_mean"), py::arg("prior_count"), py::arg("sigma_sq"), py::arg("z"),
      py::arg("horizon"));

  py::class_<TabularMDP>(m, "TabularMDP")
      .def_property_readonly("horizon", &TabularMDP::horizon)
      .def_property_readonly("num_states", &TabularMDP::num_states)
      .def_property_readonly("num_actions", &TabularMDP::num_actions)
      .def_property_readonly("start_state", &TabularMDP::start_state)
      .def("reward", &TabularMDP::reward, py::arg("h"), py::arg("s"), py::arg("a"))
      .def("probability", &TabularMDP::probability, py::arg("h"), py::arg("s"), py::arg("a"),
           py::arg("next"));

  m.def(
      "build_chain", [](double p, int length, int horizon) { return build_chain({p, length, horizon}); },
      py::arg("p"), py::arg("length"), py::arg("horizon") = 32);
  m.def(
      "build_grid",
      [](std::vector<int> holes, int horizon) { return build_grid({std::move(holes), horizon}); },
      py::arg("holes"), py::arg("horizon") = 32);
  m.def(
      "generate_mdp",
      [](const std::string& env, std::uint64_t seed, int instance, int horizon) {
        return generate(env, seed, instance, horizon).mdp;
      },
      py::arg("env"), py::arg("seed"), py::arg("instance") = 0, py::arg("horizon") = 32,
      "The instance `run` would generate for this master seed and index.");
  m.def(
      "dump_env",
      [](const std::string& env, std::uint64_t seed, int instance, int horizon) {
        std::ostringstream out;
        write_instance(out, generate(env, seed, instance, horizon));
        return out.str();
      },
      py::arg("env"), py::arg("seed"), py::arg("instance") = 0, py::arg("horizon") = 32);
  m.def(
      "load_env",
      [](const std::string& text) {
        std::istringstream in(text);
        return read_instance(in).mdp;
      },
      py::arg("text"));
  m.def("optimal_values", &optimal_values, py::arg("mdp"));

  m.def("agent_names", &agent_names);
  m.def("run_experiment", &run, py::arg("config"),
        "Runs an experiment from `key = value` config text and returns curves and aggregates.");
}
