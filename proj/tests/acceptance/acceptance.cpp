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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "../common/datasets.hpp"
#include "../common/oracle.hpp"
#include "hdca/aggregator.hpp"
#include "hdca/local_solver.hpp"
#include "hdca/metrics.hpp"
#include "hdca/runtime.hpp"

using namespace hdca;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

// Smallest gap seen at any checkpoint in this binary.
double min_gap = std::numeric_limits<double>::infinity();
std::size_t checkpoints_seen = 0;

void note(const RunReport& r) {
  for (const auto& rec : r.trace) {
    min_gap = std::min(min_gap, rec.gap);
    ++checkpoints_seen;
  }
}

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("[%s] %d. %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              in_time ? "" : ", over time budget");
  std::fflush(stdout);
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::set<std::size_t> workers_of(const MergeRecord& rec) {
  std::set<std::size_t> s;
  for (const auto& c : rec.contributors) s.insert(c.worker + 1);  // 1-based, as in the figure
  return s;
}

Outcome coordinate_step_oracle() {
  std::mt19937_64 rng(20240);
  bool ok = true;
  std::string detail;
  for (LossKind kind : {LossKind::kHinge, LossKind::kSquaredHinge, LossKind::kLogistic}) {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      SparsePoint p;
      const StepContext ctx = oracle::random_context(kind, rng, p);
      worst = std::max(worst, std::abs(coordinate_step(kind, ctx) - oracle::ternary_step(kind, ctx)));
    }
    ok = ok && worst <= 1e-8;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(loss_name(kind)) + " max|err|=" +
              fmt("%.2e", worst);
  }
  return {ok, detail + " (tol 1e-8)"};
}

Outcome mode_collapse() {
  const Dataset ds = testing::gaussian_classes(200, 20, 0.3, 42);
  Config seq;
  seq.mode = Mode::kSequential;
  seq.lambda = 1e-3;
  seq.local_iters = 2000;
  seq.rounds = 10;
  seq.seed = 7;
  seq.record_alpha = true;
  Config hyb = seq;
  hyb.mode = Mode::kHybrid;
  hyb.nodes = hyb.cores = hyb.barrier = hyb.delay_bound = 1;
  hyb.nu = 1.0;
  hyb.sigma = 1.0;
  const RunReport a = run(seq, ds);
  const RunReport b = run(hyb, ds);
  note(a);
  note(b);
  const bool same = a.alpha_trajectory.size() == 10 && a.alpha_trajectory == b.alpha_trajectory;
  return {same, std::string(same ? "alpha trajectories identical bitwise" : "alpha trajectories differ") +
                    " over 10 rounds, checksum " + std::to_string(a.final_alpha_checksum) + " vs " +
                    std::to_string(b.final_alpha_checksum)};
}

const Dataset& convergence_data() {
  static const Dataset ds = testing::gaussian_classes(2000, 50, 0.3, 1);
  return ds;
}

Outcome smooth_convergence() {
  Config c;
  c.loss = LossKind::kSquaredHinge;
  c.mode = Mode::kCocoa;
  c.nodes = 4;
  c.lambda = 1e-3;
  c.local_iters = 500;
  c.rounds = 200;
  c.gap_target = 1e-6;
  c.seed = 3;
  const RunReport r = run(c, convergence_data());
  note(r);
  const double last = r.trace.back().gap;
  // Least-squares slope of log10(gap) against the round index.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (const auto& rec : r.trace) {
    if (!(rec.gap > 0.0)) continue;
    const double x = static_cast<double>(rec.round), y = std::log10(rec.gap);
    sx += x, sy += y, sxx += x * x, sxy += x * y, m += 1;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const bool ok = last <= 1e-6 && r.rounds_completed <= 200 && slope < 0.0;
  return {ok, "gap " + fmt("%.3e", last) + " after " + std::to_string(r.rounds_completed) +
                  " rounds, log10-gap slope " + fmt("%.4f", slope) + "/round"};
}

Outcome lipschitz_convergence() {
  Config c;
  c.loss = LossKind::kHinge;
  c.mode = Mode::kSequential;
  c.lambda = 1e-3;
  c.local_iters = 2000;
  c.rounds = 5000;
  c.gap_target = 1e-6;
  c.seed = 3;
  const RunReport r = run(c, convergence_data());
  note(r);
  const double last = r.trace.back().gap;
  return {last <= 1e-6, "gap " + fmt("%.3e", last) + " after " + std::to_string(r.rounds_completed) +
                            " rounds of H=2000"};
}

Outcome protocol_staleness() {
  const Dataset ds = testing::sparse_random(64, 8, 0.5, 5);
  const std::size_t K = 8;
  std::string detail;
  bool ok = true;
  std::size_t runs = 0;
  for (std::size_t S : {2u, 4u, 6u}) {
    for (std::size_t G : {1u, 2u, 4u, 10u}) {
      std::size_t stale = 0, bad_msgs = 0, worst = 0;
      for (std::uint64_t sched = 0; sched < 100; ++sched) {
        std::mt19937_64 rng(sched * 7919 + 1);
        std::uniform_real_distribution<double> speed(0.2, 20.0);
        DelaySchedule ds_sched;
        for (std::size_t k = 0; k < K; ++k) {
          std::vector<double> costs(1 + rng() % 4);
          const double base = speed(rng);
          for (double& x : costs) x = base * std::uniform_real_distribution<double>(0.5, 1.5)(rng);
          ds_sched.set(k, costs);
        }
        Config c;
        c.mode = Mode::kHybrid;
        c.nodes = K;
        c.barrier = S;
        c.delay_bound = G;
        c.nu = 1.0;
        c.lambda = 1e-2;
        c.local_iters = 4;
        c.rounds = 60;
        c.seed = sched;
        c.clock = Clock::kSimulated;
        c.delays = ds_sched;
        const RunReport r = run(c, ds);
        note(r);
        ++runs;
        for (const auto& rec : r.history) {
          if (rec.messages != transmissions_per_round(S)) ++bad_msgs;
          for (const auto& cb : rec.contributors) {
            worst = std::max<std::size_t>(worst, cb.staleness);
            if (cb.staleness > G) ++stale;
          }
        }
        stale += freshness_violations(r.history, K, G).size() > 0 && stale == 0 ? 1 : 0;
      }
      const bool combo_ok = stale == 0 && bad_msgs == 0;
      ok = ok && combo_ok;
      if (!combo_ok) {
        detail += " S=" + std::to_string(S) + ",G=" + std::to_string(G) + ": " + std::to_string(stale) +
                  " stale merges (max " + std::to_string(worst) + ")," + std::to_string(bad_msgs) + " bad counts;";
      }
    }
  }
  if (ok) detail = " all merges within the delay bound, 2S messages each";
  return {ok, std::to_string(runs) + " runs;" + detail};
}

Outcome fig3_replay() {
  const Dataset ds = testing::gaussian_classes(12, 3, 0.5, 11);
  Config c;
  c.mode = Mode::kHybrid;
  c.nodes = 3;
  c.cores = 2;
  c.barrier = 2;
  c.delay_bound = 2;
  c.nu = 1.0;
  c.local_iters = 1;
  c.rounds = 3;
  c.clock = Clock::kSimulated;
  c.delays = DelaySchedule::load(HDCA_TEST_DATA "/fig3.toml");
  RunReport r = run(c, ds);
  note(r);
  const RunReport again = run(c, ds);
  const auto a = workers_of(r.history.at(0)), b = workers_of(r.history.at(1)), d = workers_of(r.history.at(2));
  auto show = [](const std::set<std::size_t>& s) {
    std::string out = "{";
    for (std::size_t k : s) out += (out.size() > 1 ? "," : "") + std::to_string(k);
    return out + "}";
  };
  const bool ok = a == std::set<std::size_t>{2, 3} && b == std::set<std::size_t>{2, 3} && d.count(1) == 1 &&
                  again.final_alpha_checksum == r.final_alpha_checksum;
  return {ok, "merges " + show(a) + " " + show(b) + " " + show(d)};
}

Outcome bookkeeping() {
  double worst = 0.0;
  std::size_t rounds = 0;
  for (std::size_t R : {1u, 2u, 4u, 8u}) {
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
      const Dataset ds = testing::sparse_random(160, 30, 0.2, trial * 13 + R);
      const Partition part = partition(ds, 2, R, trial);
      LocalConfig lc;
      lc.loss = trial % 3 == 0 ? LossKind::kHinge : trial % 3 == 1 ? LossKind::kSquaredHinge : LossKind::kLogistic;
      lc.lambda = 1e-2;
      lc.sigma = 2.0;
      lc.barrier = 2;
      lc.seed = trial;
      WorkerState state(ds, part, trial % 2, lc);
      SharedPrimal shared(ds.dim);
      const LocalRoundResult res = local_round(state, shared, 200);
      std::vector<double> expect(ds.dim, 0.0);
      const double ln = lc.lambda * static_cast<double>(ds.n());
      for (std::size_t e = 0; e < res.delta.size(); ++e) {
        const SparsePoint& p = ds.points[res.delta.index[e]];
        for (std::size_t j = 0; j < p.nnz(); ++j) expect[p.indices[j]] += res.delta.value[e] / ln * p.values[j];
      }
      double err = 0.0, scale = 0.0;
      for (std::size_t j = 0; j < ds.dim; ++j) {
        err = std::max(err, std::abs(res.delta_v[j] - expect[j]));
        scale = std::max(scale, std::abs(res.delta_v[j]));
      }
      worst = std::max(worst, err / (1.0 + scale));
      ++rounds;
    }
  }
  return {worst <= 1e-8, std::to_string(rounds) + " rounds, max |dv - Xd/(lambda n)| / (1+|dv|) = " +
                             fmt("%.2e", worst)};
}

Outcome weak_duality() {
  const Dataset ds = testing::gaussian_classes(50, 5, 0.3, 2);
  const std::vector<double> w0(ds.dim, 0.0), a0(ds.n(), 0.0);
  const double gap0 = duality_gap(ds, w0, a0, 1e-3, LossKind::kHinge);
  const double d0 = dual_objective(ds, a0, 1e-3, LossKind::kHinge);
  const bool ok = gap0 == 1.0 && d0 == 0.0 && min_gap >= -1e-8 && checkpoints_seen > 0;
  return {ok, "gap(0,0)=" + fmt("%.17g", gap0) + ", D(0)=" + fmt("%.17g", d0) + ", min gap over " +
                  std::to_string(checkpoints_seen) + " checkpoints " + fmt("%.3e", min_gap)};
}

Outcome theta_trend() {
  const Dataset ds = testing::gaussian_classes(500, 20, 0.3, 9);
  const Partition part = partition(ds, 1, 1, 0);
  const std::vector<double> zero(ds.dim, 0.0);
  const std::size_t hs[] = {100, 1000, 10000};
  double mean[3] = {0, 0, 0};
  bool in_range = true;
  // The exact optimum does not depend on the seed.
  LocalConfig base;
  base.loss = LossKind::kHinge;
  base.lambda = 1e-3;
  base.sigma = 1.0;
  const WorkerState ref(ds, part, 0, base);
  const SparseDelta best = solve_subproblem(ref, zero);
  const double q_star = subproblem_objective(ref, zero, best);
  const double q_zero = subproblem_objective(ref, zero, {});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (int h = 0; h < 3; ++h) {
      LocalConfig lc = base;
      lc.seed = seed;
      WorkerState state(ds, part, 0, lc);
      SharedPrimal shared(ds.dim);
      const auto res = local_round(state, shared, hs[h]);
      const double q = subproblem_objective(state, zero, res.delta);
      const double theta = std::max(0.0, q_star - q) / (q_star - q_zero);
      // Cross-check with the library's own measurement on one seed.
      if (seed == 0 && std::abs(theta - measure_theta(state, zero, res.delta)) > 1e-9) in_range = false;
      in_range = in_range && theta >= 0.0 && theta < 1.0;
      mean[h] += theta / 20.0;
    }
  }
  const bool ok = in_range && mean[1] <= mean[0] && mean[2] <= mean[1];
  return {ok, "mean theta H=100: " + fmt("%.4f", mean[0]) + ", H=1000: " + fmt("%.4f", mean[1]) +
                  ", H=10000: " + fmt("%.2e", mean[2])};
}

}  // namespace

int main() {
  criterion(1, "coordinate step vs ternary-search oracle", 5.0, coordinate_step_oracle);
  criterion(2, "mode collapse hybrid(1,1,1,1) == sequential", 1.0, mode_collapse);
  criterion(3, "smooth loss convergence (squared hinge, cocoa K=4)", 30.0, smooth_convergence);
  criterion(4, "Lipschitz loss convergence (hinge, sequential)", 30.0, lipschitz_convergence);
  criterion(5, "protocol staleness and 2S messages (K=8)", 20.0, protocol_staleness);
  criterion(6, "slow-worker replay K=3 R=2 S=2 G=2", 1.0, fig3_replay);
  criterion(7, "primal-dual bookkeeping R in {1,2,4,8}", 10.0, bookkeeping);
  criterion(9, "theta diagnostic range and trend", 60.0, theta_trend);
  criterion(8, "weak duality and trivial anchors", 1.0, weak_duality);
  std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
