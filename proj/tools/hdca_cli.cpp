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

// Command-line driver: loads a LIBSVM file, runs the solver, writes the
// gap trace as CSV.
//
// Exit codes: 0 ok, 2 bad configuration, 3 unreadable data, 4 divergence.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hdca/errors.hpp"
#include "hdca/runtime.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitDivergence = 4;

constexpr std::size_t kDeskLocalIters = 2000;

int run_cli(int argc, char** argv) {
  CLI::App app{"Hybrid dual coordinate ascent for L2-regularized linear models"};
  app.set_version_flag("--version", "hdca 0.1.0");

  hdca::Config cfg;
  std::string data_path, loss = "hinge", mode = "hybrid", sigma = "auto", scale = "n", view = "scaled";
  std::string trace_path, schedule_path, protocol_path, model_path;
  std::optional<std::size_t> dim;
  double gap_target = -1.0;
  bool sim_time = false, desk = false;

  app.add_option("--data", data_path, "LIBSVM training file (.gz accepted)")->required();
  app.add_option("--loss", loss, "hinge | squared-hinge | logistic")
      ->check(CLI::IsMember({"hinge", "squared-hinge", "logistic"}));
  app.add_option("--lambda", cfg.lambda, "regularization strength");
  app.add_option("--nodes", cfg.nodes, "number of workers K");
  app.add_option("--cores", cfg.cores, "threads per worker R");
  app.add_option("--barrier", cfg.barrier, "updates merged per round S (default K)");
  app.add_option("--delay-bound", cfg.delay_bound, "max merges a worker may miss");
  auto* iters = app.add_option("--local-iters", cfg.local_iters, "coordinate steps per thread per round H");
  app.add_option("--nu", cfg.nu, "aggregation weight");
  app.add_option("--sigma", sigma, "subproblem scaling, or 'auto' for nu*S");
  app.add_option("--rounds", cfg.rounds, "number of merges");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--mode", mode, "hybrid | sequential | cocoa | passcode")
      ->check(CLI::IsMember({"hybrid", "sequential", "cocoa", "passcode"}));
  app.add_option("--gap-target", gap_target, "stop once the duality gap is at most this");
  app.add_option("--trace", trace_path, "write the gap trace CSV here");
  app.add_flag("--sim-time", sim_time, "deterministic simulated clock instead of threads");
  app.add_option("--delay-schedule", schedule_path, "per-worker round costs");
  app.add_option("--tick-ms", cfg.tick_ms, "wall-clock length of one schedule tick");
  app.add_option("--subproblem-scale", scale, "conjugate term divisor: n or nk")
      ->check(CLI::IsMember({"n", "nk"}));
  app.add_option("--local-view", view, "running v inside a round: scaled (by sigma) or literal")
      ->check(CLI::IsMember({"scaled", "literal"}));
  app.add_flag("--wild", cfg.wild, "racy shared-vector writes (experimental)");
  app.add_flag("--unsafe-sigma", cfg.unsafe_sigma, "allow sigma < nu*S");
  app.add_flag("--desk", desk, "small-corpus preset (H = 2000 unless given)");
  app.add_option("--dim", dim, "feature dimension (default: largest index seen)");
  app.add_option("--protocol-trace", protocol_path, "log master receive/merge/broadcast events");
  app.add_option("--model-out", model_path, "write the final w, one value per line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    cfg.loss = hdca::parse_loss(loss);
    cfg.mode = hdca::parse_mode(mode);
    cfg.scale = scale == "nk" ? hdca::SubproblemScale::kNode : hdca::SubproblemScale::kGlobal;
    cfg.view = view == "literal" ? hdca::LocalView::kLiteral : hdca::LocalView::kScaled;
    cfg.clock = sim_time ? hdca::Clock::kSimulated : hdca::Clock::kWall;
    if (sigma != "auto") {
      try {
        std::size_t used = 0;
        cfg.sigma = std::stod(sigma, &used);
        if (used != sigma.size()) throw std::invalid_argument(sigma);
      } catch (const std::exception&) {
        throw hdca::ConfigError("--sigma expects a number or 'auto'");
      }
    }
    if (app.count("--gap-target") > 0) cfg.gap_target = gap_target;
    if (desk && iters->count() == 0) cfg.local_iters = kDeskLocalIters;
    // Shape checks that do not need the data, so they fail fast.
    if (cfg.mode == hdca::Mode::kHybrid && cfg.barrier > cfg.nodes) {
      throw hdca::ConfigError("barrier S = " + std::to_string(cfg.barrier) + " exceeds K = " +
                              std::to_string(cfg.nodes));
    }
    if (!schedule_path.empty()) cfg.delays = hdca::DelaySchedule::load(schedule_path);

    std::unique_ptr<std::ofstream> protocol_out;
    if (!protocol_path.empty()) {
      protocol_out = std::make_unique<std::ofstream>(protocol_path);
      if (!*protocol_out) throw hdca::ConfigError("cannot write '" + protocol_path + "'");
      *protocol_out << "event,t,worker,gamma\n";
      cfg.protocol_log = [out = protocol_out.get()](const hdca::ProtocolEvent& e) {
        hdca::write_protocol_event(*out, e);
      };
    }

    const hdca::Dataset data = hdca::load_libsvm(data_path, dim);
    const hdca::RunReport report = hdca::run(cfg, data);

    if (!trace_path.empty()) {
      std::ofstream out(trace_path);
      if (!out) throw hdca::ConfigError("cannot write '" + trace_path + "'");
      hdca::write_trace_csv(out, report.trace);
    }
    if (!model_path.empty()) {
      std::ofstream out(model_path);
      if (!out) throw hdca::ConfigError("cannot write '" + model_path + "'");
      char buf[32];
      for (double w : report.final_v) {
        std::snprintf(buf, sizeof buf, "%.17g\n", w);
        out << buf;
      }
    }
    const hdca::Config& eff = report.effective;
    std::printf("mode=%s K=%zu R=%zu S=%zu gamma=%zu sigma=%g rounds=%llu msgs=%zu",
                std::string(hdca::mode_name(eff.mode)).c_str(), eff.nodes, eff.cores, eff.barrier,
                eff.delay_bound, *eff.sigma, static_cast<unsigned long long>(report.rounds_completed),
                report.total_messages);
    if (!report.trace.empty()) {
      const auto& last = report.trace.back();
      std::printf(" primal=%.10g dual=%.10g gap=%.3e", last.primal, last.dual, last.gap);
    }
    std::printf("\n");
    return 0;
  } catch (const hdca::ParseError& e) {
    std::cerr << "hdca: parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const hdca::DivergenceError& e) {
    std::cerr << "hdca: diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const hdca::ConfigError& e) {
    std::cerr << "hdca: config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "hdca: " << e.what() << "\n";
    return 1;
  }
}
