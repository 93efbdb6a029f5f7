// Python bindings for the proxdiff core: schedule math, oracle targets,
// samplers, checkpoints, metrics, and the experiment runner.
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "proxdiff/checkpoint.hpp"
#include "proxdiff/config.hpp"
#include "proxdiff/experiment.hpp"
#include "proxdiff/grpo.hpp"
#include "proxdiff/metrics.hpp"
#include "proxdiff/net.hpp"
#include "proxdiff/pretrain.hpp"
#include "proxdiff/samplers.hpp"
#include "proxdiff/schedule.hpp"
#include "proxdiff/targets.hpp"

namespace py = pybind11;
using namespace proxdiff;

namespace {

MixtureTarget make_target(const NoiseSchedule& schedule, int dim,
                          const std::vector<std::vector<std::tuple<double, Eigen::VectorXd,
                                                                   double>>>& per_label) {
  std::vector<std::vector<Component>> components;
  components.reserve(per_label.size());
  for (const auto& label : per_label) {
    std::vector<Component> list;
    list.reserve(label.size());
    for (const auto& [w, mean, var] : label) list.push_back(Component{w, mean, var});
    components.push_back(std::move(list));
  }
  return MixtureTarget(schedule, dim, std::move(components));
}

ConditionToken token_from_id(int id) {
  return id < 0 ? ConditionToken::null() : ConditionToken::label(id);
}

Eigen::MatrixXd sample_matrix(const StepRule& rule, const TimeGrid& grid, int dim,
                              const SamplerFns& fns, const std::vector<int>& label_ids, int n,
                              std::uint64_t seed) {
  std::vector<ConditionToken> labels;
  labels.reserve(label_ids.size());
  for (int id : label_ids) labels.push_back(token_from_id(id));
  const auto rows = sample_batch(rule, grid, dim, fns, labels, n, seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), dim);
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = rows[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conditional proximal diffusion sampling (C++ core)";

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def(py::init<>())
      .def(py::init([](double beta_min, double beta_max) {
             NoiseSchedule s;
             s.beta_min = beta_min;
             s.beta_max = beta_max;
             return s;
           }),
           py::arg("beta_min"), py::arg("beta_max"))
      .def_readwrite("beta_min", &NoiseSchedule::beta_min)
      .def_readwrite("beta_max", &NoiseSchedule::beta_max);

  m.def("beta_at", &beta_at, py::arg("schedule"), py::arg("t"));
  m.def("alpha_at", &alpha_at, py::arg("schedule"), py::arg("t"));

  py::class_<TimeGrid>(m, "TimeGrid")
      .def_readonly("steps", &TimeGrid::steps)
      .def_readonly("times", &TimeGrid::times)
      .def_readonly("gammas", &TimeGrid::gammas)
      .def("t", &TimeGrid::t, py::arg("k"))
      .def("gamma", &TimeGrid::gamma, py::arg("k"));

  m.def("make_time_grid", &make_time_grid, py::arg("schedule"), py::arg("steps"),
        py::arg("t_min"));

  py::class_<MixtureTarget>(m, "MixtureTarget")
      .def(py::init(&make_target), py::arg("schedule"), py::arg("dim"), py::arg("per_label"),
           "per_label: list (one entry per label) of lists of (weight, mean, var) components")
      .def_property_readonly("dim", &MixtureTarget::dim)
      .def_property_readonly("num_labels", &MixtureTarget::num_labels);

  m.def(
      "oracle_logpdf",
      [](const MixtureTarget& target, int label, const Eigen::VectorXd& x, double t) {
        return oracle_logpdf(target, token_from_id(label), x, t);
      },
      py::arg("target"), py::arg("label"), py::arg("x"), py::arg("t"),
      "label -1 queries the unconditional marginal");
  m.def(
      "oracle_score",
      [](const MixtureTarget& target, int label, const Eigen::VectorXd& x, double t) {
        return oracle_score(target, token_from_id(label), x, t);
      },
      py::arg("target"), py::arg("label"), py::arg("x"), py::arg("t"));
  m.def(
      "oracle_prox",
      [](const MixtureTarget& target, const Eigen::VectorXd& x, double t, double lam,
         int label) {
        const ProxQuery q{x, t, lam, token_from_id(label)};
        if (target.components(q.c).size() == 1) return oracle_prox_gaussian(target, q);
        return bruteforce_prox(target, q);
      },
      py::arg("target"), py::arg("x"), py::arg("t"), py::arg("lam"), py::arg("label"),
      "closed form on single-Gaussian conditionals, damped Newton otherwise");
  m.def(
      "prox_residual",
      [](const MixtureTarget& target, const Eigen::VectorXd& u, const Eigen::VectorXd& x,
         double t, double lam, int label) {
        return prox_residual(target, u, ProxQuery{x, t, lam, token_from_id(label)});
      },
      py::arg("target"), py::arg("u"), py::arg("x"), py::arg("t"), py::arg("lam"),
      py::arg("label"));

  m.def("target_samples",
        [](const MixtureTarget& target, const std::vector<int>& labels, int n,
           std::uint64_t seed) {
          CounterRng rng({0x74736d70u, seed});
          Eigen::MatrixXd out(n, target.dim());
          for (int i = 0; i < n; ++i) {
            out.row(i) = target.sample(
                token_from_id(labels[static_cast<std::size_t>(i) % labels.size()]), rng);
          }
          return out;
        },
        py::arg("target"), py::arg("labels"), py::arg("n"), py::arg("seed"),
        "draws from p_data with labels assigned round-robin");

  py::class_<Net>(m, "Net")
      .def_property_readonly("dim", [](const Net& n) { return n.arch().dim; })
      .def_property_readonly("num_labels", [](const Net& n) { return n.arch().num_labels; })
      .def_property_readonly("kind",
                             [](const Net& n) {
                               return n.arch().kind == NetKind::Prox ? "prox" : "score";
                             })
      .def_property_readonly("param_count", &Net::param_count)
      .def(
          "prox",
          [](const Net& n, const Eigen::VectorXd& x, double t, double lam, int label) {
            return n.prox_forward(x, t, lam, token_from_id(label));
          },
          py::arg("x"), py::arg("t"), py::arg("lam"), py::arg("label"))
      .def(
          "score",
          [](const Net& n, const Eigen::VectorXd& x, double t, int label) {
            return n.score_forward(x, t, token_from_id(label));
          },
          py::arg("x"), py::arg("t"), py::arg("label"))
      .def("save", [](const Net& n, const std::string& path) { save_checkpoint(n, path); },
           py::arg("path"));

  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "sample_chain",
      [](const Net& net, const std::string& sampler, double omega, int steps, int n,
         const std::vector<int>& labels, std::uint64_t seed) {
        const StepRule rule{rule_from_string(sampler), omega};
        const TimeGrid grid = make_time_grid(net.meta().schedule, steps, net.meta().t_min);
        return sample_matrix(rule, grid, net.arch().dim, net_fns(net), labels, n, seed);
      },
      py::arg("net"), py::arg("sampler"), py::arg("omega"), py::arg("steps"), py::arg("n"),
      py::arg("labels"), py::arg("seed"), "reverse-chain samples from a trained net");
  m.def(
      "sample_oracle",
      [](const MixtureTarget& target, const std::string& sampler, double omega, int steps,
         double t_min, int n, const std::vector<int>& labels, std::uint64_t seed) {
        const StepRule rule{rule_from_string(sampler), omega};
        const TimeGrid grid = make_time_grid(target.schedule(), steps, t_min);
        return sample_matrix(rule, grid, target.dim(), oracle_fns(target), labels, n, seed);
      },
      py::arg("target"), py::arg("sampler"), py::arg("omega"), py::arg("steps"),
      py::arg("t_min"), py::arg("n"), py::arg("labels"), py::arg("seed"),
      "reverse-chain samples using the oracle score/prox maps");

  m.def("pda_hybrid_gaussian_moments",
        [](const NoiseSchedule& s, int steps, double t_min, double mu, double sigma2) {
          const GaussianChainMoments mm =
              pda_hybrid_gaussian_moments(s, make_time_grid(s, steps, t_min), mu, sigma2);
          return py::make_tuple(mm.mean, mm.var);
        },
        py::arg("schedule"), py::arg("steps"), py::arg("t_min"), py::arg("mu"),
        py::arg("sigma2"), "closed-form (mean, var) of X_0 per coordinate");

  m.def("energy_distance", &energy_distance, py::arg("a"), py::arg("b"),
        py::arg("max_points") = 10000);

  m.def(
      "run_experiment",
      [](const std::string& config_path) {
        const ExperimentResult res = run_experiment(load_experiment_config(config_path));
        return py::make_tuple(res.out_dir, res.files);
      },
      py::arg("config_path"), "staged pipeline; returns (out_dir, manifest file list)");
}
