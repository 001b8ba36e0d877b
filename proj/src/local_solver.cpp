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

#include "hdca/local_solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "hdca/errors.hpp"
#include "hdca/rng.hpp"
#include "hdca/summation.hpp"

namespace hdca {

SharedPrimal::SharedPrimal(std::size_t dim) : dim_(dim), v_(new std::atomic<double>[dim]) {
  for (std::size_t j = 0; j < dim_; ++j) v_[j].store(0.0, std::memory_order_relaxed);
}

SharedPrimal::SharedPrimal(std::span<const double> init) : SharedPrimal(init.size()) { assign(init); }

void SharedPrimal::assign(std::span<const double> values) {
  if (values.size() != dim_) throw std::invalid_argument("SharedPrimal::assign: size mismatch");
  for (std::size_t j = 0; j < dim_; ++j) v_[j].store(values[j], std::memory_order_relaxed);
}

std::vector<double> SharedPrimal::snapshot() const {
  std::vector<double> out(dim_);
  for (std::size_t j = 0; j < dim_; ++j) out[j] = v_[j].load(std::memory_order_relaxed);
  return out;
}

WorkerState::WorkerState(const Dataset& data, const Partition& part, std::size_t worker,
                         LocalConfig config)
    : data_(&data), worker_(worker), config_(config) {
  if (worker >= part.num_nodes) throw ConfigError("worker index out of range");
  if (!(config_.lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(config_.sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (config_.barrier == 0) throw ConfigError("barrier must be >= 1");

  points_ = part.node_members(worker);
  local_of_.assign(data.n(), std::uint32_t(-1));
  for (std::size_t l = 0; l < points_.size(); ++l) local_of_[points_[l]] = static_cast<std::uint32_t>(l);

  cores_.resize(part.cores_per_node);
  for (std::size_t r = 0; r < part.cores_per_node; ++r) {
    for (std::size_t i : part.members[worker][r]) {
      if (data.points[i].squared_norm > 0.0) cores_[r].push_back({i, local_of_[i]});
    }
  }
  alpha_.assign(points_.size(), 0.0);
}

std::size_t WorkerState::local_of(std::size_t global) const {
  if (global >= local_of_.size() || local_of_[global] == std::uint32_t(-1)) {
    throw std::out_of_range("point " + std::to_string(global) + " is not owned by worker " +
                            std::to_string(worker_));
  }
  return local_of_[global];
}

void WorkerState::apply(const SparseDelta& delta, double nu) {
  for (std::size_t e = 0; e < delta.size(); ++e) {
    double& a = alpha_[local_of(delta.index[e])];
    a = a + nu * delta.value[e];
  }
}

double WorkerState::conj_divisor() const noexcept {
  return config_.scale == SubproblemScale::kNode ? static_cast<double>(points_.size())
                                                 : static_cast<double>(data_->n());
}

struct LocalRoundAccess {
  using Entry = WorkerState::Entry;
  static auto& cores(WorkerState& s) { return s.cores_; }
  static auto& alpha(WorkerState& s) { return s.alpha_; }
  static auto& round(WorkerState& s) { return s.round_; }
};

namespace {

struct CoreJob {
  const Dataset* data;
  const LocalConfig* config;
  std::span<const LocalRoundAccess::Entry> entries;
  std::span<const double> alpha;
  std::span<double> delta;  // local-indexed, core-exclusive entries
  double conj_n;
  std::uint64_t seed;
};

// Returns false if a step produced a non-finite value.
bool run_core(const CoreJob& job, SharedPrimal& shared, std::size_t local_iters) {
  if (job.entries.empty()) return true;
  const std::size_t n = job.data->n();
  const double lambda_n = job.config->lambda * static_cast<double>(n);
  std::mt19937_64 rng(job.seed);

  StepContext ctx;
  ctx.lambda = job.config->lambda;
  ctx.n = n;
  ctx.sigma = job.config->sigma;
  ctx.conj_n = job.conj_n;

  for (std::size_t h = 0; h < local_iters; ++h) {
    const auto& e = job.entries[uniform_below(rng, job.entries.size())];
    const SparsePoint& p = job.data->points[e.global];
    ctx.point = &p;
    ctx.v_dot_x = p.dot(shared);
    ctx.alpha_i = job.alpha[e.local] + job.delta[e.local];
    const double eps = coordinate_step(job.config->loss, ctx);
    if (!std::isfinite(eps)) return false;
    if (eps == 0.0) continue;
    job.delta[e.local] += eps;
    double coef = eps / lambda_n;
    if (job.config->view == LocalView::kScaled) coef *= job.config->sigma;
    if (job.config->wild) {
      for (std::size_t j = 0; j < p.nnz(); ++j) shared.add_racy(p.indices[j], coef * p.values[j]);
    } else {
      for (std::size_t j = 0; j < p.nnz(); ++j) shared.add(p.indices[j], coef * p.values[j]);
    }
  }
  return true;
}

}  // namespace

LocalRoundResult local_round(WorkerState& state, SharedPrimal& shared, std::size_t local_iters) {
  const Dataset& data = state.data();
  if (shared.size() != data.dim) throw std::invalid_argument("local_round: v has wrong dimension");

  auto& cores = LocalRoundAccess::cores(state);
  auto& round = LocalRoundAccess::round(state);
  const std::vector<double> v_old = shared.snapshot();
  std::vector<double> delta(state.local_size(), 0.0);

  std::vector<CoreJob> jobs;
  jobs.reserve(cores.size());
  for (std::size_t r = 0; r < cores.size(); ++r) {
    jobs.push_back({&data, &state.config(), cores[r], state.alpha(), delta, state.conj_divisor(),
                    stream_seed(state.config().seed, state.worker(), r, round)});
  }

  bool ok = true;
  if (jobs.size() == 1) {
    ok = run_core(jobs[0], shared, local_iters);
  } else {
    std::vector<char> core_ok(jobs.size(), 1);
    std::vector<std::exception_ptr> errors(jobs.size());
    {
      std::vector<std::jthread> threads;
      threads.reserve(jobs.size());
      for (std::size_t r = 0; r < jobs.size(); ++r) {
        threads.emplace_back([&, r] {
          try {
            core_ok[r] = run_core(jobs[r], shared, local_iters) ? 1 : 0;
          } catch (...) {
            errors[r] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    ok = std::all_of(core_ok.begin(), core_ok.end(), [](char c) { return c != 0; });
  }
  if (!ok) {
    throw DivergenceError("worker " + std::to_string(state.worker()) + " round " +
                          std::to_string(round) + ": non-finite coordinate step");
  }
  ++round;

  LocalRoundResult res;
  res.steps_taken = cores.size() * local_iters;
  const auto pts = state.points();
  std::vector<std::size_t> order;
  for (std::size_t l = 0; l < delta.size(); ++l) {
    if (delta[l] != 0.0) order.push_back(l);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
  res.delta.index.reserve(order.size());
  res.delta.value.reserve(order.size());
  for (std::size_t l : order) {
    res.delta.index.push_back(pts[l]);
    res.delta.value.push_back(delta[l]);
  }

  res.delta_v = shared.snapshot();
  const double unscale = state.config().view == LocalView::kScaled ? state.config().sigma : 1.0;
  for (std::size_t j = 0; j < res.delta_v.size(); ++j) res.delta_v[j] = (res.delta_v[j] - v_old[j]) / unscale;

  if (state.config().track_gain) {
    res.q_gain = subproblem_objective(state, v_old, res.delta) - subproblem_objective(state, v_old, {});
  }
  return res;
}

double subproblem_objective(const WorkerState& state, std::span<const double> v_old,
                            const SparseDelta& delta) {
  const Dataset& data = state.data();
  const LocalConfig& cfg = state.config();
  const double n = static_cast<double>(data.n());
  const double lambda_n = cfg.lambda * n;

  std::vector<double> d_local(state.local_size(), 0.0);
  for (std::size_t e = 0; e < delta.size(); ++e) d_local[state.local_of(delta.index[e])] += delta.value[e];

  CompensatedSum conj, lin;
  std::vector<double> u(data.dim, 0.0);  // (1/(lambda n)) X delta
  const auto pts = state.points();
  const auto alpha = state.alpha();
  for (std::size_t l = 0; l < pts.size(); ++l) {
    const SparsePoint& p = data.points[pts[l]];
    const double c = conjugate(cfg.loss, alpha[l] + d_local[l], p.label);
    if (!std::isfinite(c)) return -kInfinity;
    conj.add(c);
    if (d_local[l] != 0.0) {
      lin.add(d_local[l] * p.dot(v_old));
      const double coef = d_local[l] / lambda_n;
      for (std::size_t j = 0; j < p.nnz(); ++j) u[p.indices[j]] += coef * p.values[j];
    }
  }
  CompensatedSum uu;
  for (double x : u) uu.add(x * x);
  return -conj.value() / state.conj_divisor() - cfg.lambda / static_cast<double>(cfg.barrier) * gstar(v_old) -
         lin.value() / n - 0.5 * cfg.lambda * cfg.sigma * uu.value();
}

SparseDelta solve_subproblem(const WorkerState& state, std::span<const double> v_old, double tol,
                             std::size_t max_epochs) {
  const Dataset& data = state.data();
  const LocalConfig& cfg = state.config();
  const std::size_t n = data.n();
  const double lambda_n = cfg.lambda * static_cast<double>(n);
  const auto pts = state.points();
  const auto alpha = state.alpha();

  std::vector<std::size_t> eligible;
  for (std::size_t l = 0; l < pts.size(); ++l) {
    if (data.points[pts[l]].squared_norm > 0.0) eligible.push_back(l);
  }
  std::vector<double> d_local(pts.size(), 0.0);
  std::vector<double> u(data.dim, 0.0);

  StepContext ctx;
  ctx.lambda = cfg.lambda;
  ctx.n = n;
  ctx.sigma = cfg.sigma;
  ctx.conj_n = state.conj_divisor();

  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5eed5eedULL));
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    for (std::size_t i = eligible.size(); i > 1; --i) std::swap(eligible[i - 1], eligible[uniform_below(rng, i)]);
    double max_move = 0.0;
    for (std::size_t l : eligible) {
      const SparsePoint& p = data.points[pts[l]];
      ctx.point = &p;
      // gradient of the sigma-weighted quadratic enters through u
      ctx.v_dot_x = p.dot(v_old) + cfg.sigma * p.dot(u);
      ctx.alpha_i = alpha[l] + d_local[l];
      const double eps = coordinate_step(cfg.loss, ctx);
      if (eps == 0.0) continue;
      d_local[l] += eps;
      const double coef = eps / lambda_n;
      for (std::size_t j = 0; j < p.nnz(); ++j) u[p.indices[j]] += coef * p.values[j];
      max_move = std::max(max_move, std::abs(eps));
    }
    if (max_move <= tol) break;
  }

  std::vector<std::size_t> order;
  for (std::size_t l = 0; l < d_local.size(); ++l) {
    if (d_local[l] != 0.0) order.push_back(l);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
  SparseDelta out;
  for (std::size_t l : order) {
    out.index.push_back(pts[l]);
    out.value.push_back(d_local[l]);
  }
  return out;
}

double measure_theta(const WorkerState& state, std::span<const double> v_old, const SparseDelta& delta) {
  const SparseDelta best = solve_subproblem(state, v_old);
  const double q_star = subproblem_objective(state, v_old, best);
  const double q_zero = subproblem_objective(state, v_old, {});
  const double q = subproblem_objective(state, v_old, delta);
  const double denom = q_star - q_zero;
  if (!(denom > 0.0)) return 0.0;
  return std::max(0.0, q_star - q) / denom;
}

}  // namespace hdca
