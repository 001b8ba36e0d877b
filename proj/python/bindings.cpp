/**
 * Copyright 2026 The Hybrid-DCA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Python bindings (module hybrid_dca._core).

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hdca/errors.hpp"
#include "hdca/runtime.hpp"

namespace py = pybind11;

namespace {

hdca::Config make_config(const std::string& loss, double lambda, std::size_t nodes, std::size_t cores,
                         std::size_t barrier, std::size_t delay_bound, std::size_t local_iters, double nu,
                         std::optional<double> sigma, std::size_t rounds, std::uint64_t seed,
                         const std::string& mode, std::optional<double> gap_target, bool sim_time,
                         std::optional<std::map<std::size_t, std::vector<double>>> delays,
                         const std::string& subproblem_scale, const std::string& local_view, bool unsafe_sigma,
                         bool track_gain) {
  hdca::Config c;
  c.loss = hdca::parse_loss(loss);
  c.lambda = lambda;
  c.nodes = nodes;
  c.cores = cores;
  c.barrier = barrier;
  c.delay_bound = delay_bound;
  c.local_iters = local_iters;
  c.nu = nu;
  c.sigma = sigma;
  c.rounds = rounds;
  c.seed = seed;
  c.mode = hdca::parse_mode(mode);
  c.gap_target = gap_target;
  c.clock = sim_time ? hdca::Clock::kSimulated : hdca::Clock::kWall;
  if (delays) {
    hdca::DelaySchedule s;
    for (auto& [k, costs] : *delays) s.set(k, costs);
    c.delays = std::move(s);
  }
  if (subproblem_scale == "nk") {
    c.scale = hdca::SubproblemScale::kNode;
  } else if (subproblem_scale != "n") {
    throw hdca::ConfigError("subproblem_scale must be 'n' or 'nk'");
  }
  if (local_view == "literal") {
    c.view = hdca::LocalView::kLiteral;
  } else if (local_view != "scaled") {
    throw hdca::ConfigError("local_view must be 'scaled' or 'literal'");
  }
  c.unsafe_sigma = unsafe_sigma;
  c.track_gain = track_gain;
  return c;
}

py::dict report_to_dict(const hdca::RunReport& r) {
  py::list trace;
  for (const auto& rec : r.trace) {
    py::dict d;
    d["round"] = rec.round;
    d["wall_ms"] = rec.wall_ms;
    d["sim_ticks"] = rec.sim_ticks;
    d["primal"] = rec.primal;
    d["dual"] = rec.dual;
    d["gap"] = rec.gap;
    d["contributors"] = rec.contributors;
    d["msgs"] = rec.msgs;
    trace.append(d);
  }
  py::dict out;
  out["trace"] = trace;
  out["w"] = r.final_v;
  out["alpha"] = r.final_alpha;
  out["alpha_checksum"] = r.final_alpha_checksum;
  out["total_messages"] = r.total_messages;
  out["rounds"] = r.rounds_completed;
  out["sigma"] = *r.effective.sigma;
  out["barrier"] = r.effective.barrier;
  out["q_gains"] = r.q_gains;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid dual coordinate ascent solver";

  auto base = py::register_exception<hdca::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<hdca::ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<hdca::DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
  (void)base;

  py::class_<hdca::Dataset>(m, "Dataset")
      .def_property_readonly("n", &hdca::Dataset::n)
      .def_readonly("dim", &hdca::Dataset::dim)
      .def_readonly("nnz", &hdca::Dataset::nnz)
      .def_property_readonly("labels", [](const hdca::Dataset& d) {
        std::vector<double> y;
        for (const auto& p : d.points) y.push_back(p.label);
        return y;
      })
      .def("__len__", &hdca::Dataset::n)
      .def("__repr__", [](const hdca::Dataset& d) {
        return "<Dataset n=" + std::to_string(d.n()) + " dim=" + std::to_string(d.dim) + ">";
      });

  m.def("load_libsvm", &hdca::load_libsvm, py::arg("path"), py::arg("dim") = py::none());
  m.def("parse_libsvm", &hdca::parse_libsvm_string, py::arg("text"), py::arg("dim") = py::none());
  m.def("from_dense",
        [](const std::vector<std::vector<double>>& rows, const std::vector<double>& labels) {
          if (rows.size() != labels.size()) throw hdca::ConfigError("rows and labels differ in length");
          std::string text;
          char buf[64];
          for (std::size_t i = 0; i < rows.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", labels[i]);
            text += buf;
            for (std::size_t j = 0; j < rows[i].size(); ++j) {
              if (rows[i][j] == 0.0) continue;
              std::snprintf(buf, sizeof buf, " %zu:%.17g", j + 1, rows[i][j]);
              text += buf;
            }
            text += '\n';
          }
          const std::size_t dim = rows.empty() ? 0 : rows.front().size();
          return hdca::parse_libsvm_string(text, dim);
        },
        py::arg("rows"), py::arg("labels"), "Build a dataset from dense rows.");

  m.def("primal_objective",
        [](const hdca::Dataset& d, const std::vector<double>& w, double lambda, const std::string& loss) {
          return hdca::primal_objective(d, w, lambda, hdca::parse_loss(loss));
        },
        py::arg("data"), py::arg("w"), py::arg("lambda_"), py::arg("loss") = "hinge");
  m.def("dual_objective",
        [](const hdca::Dataset& d, const std::vector<double>& a, double lambda, const std::string& loss) {
          return hdca::dual_objective(d, a, lambda, hdca::parse_loss(loss));
        },
        py::arg("data"), py::arg("alpha"), py::arg("lambda_"), py::arg("loss") = "hinge");
  m.def("duality_gap",
        [](const hdca::Dataset& d, const std::vector<double>& v, const std::vector<double>& a, double lambda,
           const std::string& loss) { return hdca::duality_gap(d, v, a, lambda, hdca::parse_loss(loss)); },
        py::arg("data"), py::arg("v"), py::arg("alpha"), py::arg("lambda_"), py::arg("loss") = "hinge");
  m.def("primal_from_dual",
        [](const hdca::Dataset& d, const std::vector<double>& a, double lambda) {
          return hdca::primal_from_dual(d, a, lambda);
        },
        py::arg("data"), py::arg("alpha"), py::arg("lambda_"));

  m.def("run",
        [](const hdca::Dataset& data, const std::string& loss, double lambda, std::size_t nodes, std::size_t cores,
           std::size_t barrier, std::size_t delay_bound, std::size_t local_iters, double nu,
           std::optional<double> sigma, std::size_t rounds, std::uint64_t seed, const std::string& mode,
           std::optional<double> gap_target, bool sim_time,
           std::optional<std::map<std::size_t, std::vector<double>>> delays, const std::string& subproblem_scale,
           const std::string& local_view, bool unsafe_sigma, bool track_gain) {
          hdca::Config c = make_config(loss, lambda, nodes, cores, barrier, delay_bound, local_iters, nu, sigma,
                                       rounds, seed, mode, gap_target, sim_time, std::move(delays),
                                       subproblem_scale, local_view, unsafe_sigma, track_gain);
          hdca::RunReport r;
          {
            py::gil_scoped_release release;
            r = hdca::run(c, data);
          }
          return report_to_dict(r);
        },
        py::arg("data"), py::arg("loss") = "hinge", py::arg("lambda_") = 1e-4, py::arg("nodes") = 1,
        py::arg("cores") = 1, py::arg("barrier") = 0, py::arg("delay_bound") = 1,
        py::arg("local_iters") = 40000, py::arg("nu") = 1.0, py::arg("sigma") = py::none(),
        py::arg("rounds") = 100, py::arg("seed") = 0, py::arg("mode") = "hybrid",
        py::arg("gap_target") = py::none(), py::arg("sim_time") = false, py::arg("delays") = py::none(),
        py::arg("subproblem_scale") = "n", py::arg("local_view") = "scaled", py::arg("unsafe_sigma") = false, py::arg("track_gain") = false,
        "Run the solver and return the trace and final iterates.");
}
