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

#pragma once

// One worker's inner loop: R computing threads, H asynchronous coordinate
// steps each, against a primal estimate shared through element-atomic adds.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hdca/data.hpp"
#include "hdca/losses.hpp"

namespace hdca {

/// Divisor of the conjugate term in the local subproblem.
enum class SubproblemScale {
  kGlobal,  // 1/n on every term
  kNode,    // 1/n_k on the conjugate term
};

/// Length-d vector with element-atomic accumulation. Whole-vector reads are
/// not snapshot-consistent while writers run.
class SharedPrimal {
 public:
  explicit SharedPrimal(std::size_t dim);
  explicit SharedPrimal(std::span<const double> init);

  std::size_t size() const noexcept { return dim_; }

  double operator[](std::size_t j) const noexcept { return v_[j].load(std::memory_order_relaxed); }

  /// v[j] += x with a compare-and-swap retry loop; no update is lost.
  void add(std::size_t j, double x) noexcept {
    double cur = v_[j].load(std::memory_order_relaxed);
    while (!v_[j].compare_exchange_weak(cur, cur + x, std::memory_order_relaxed)) {
    }
  }

  /// Unsynchronized read-modify-write: concurrent updates may be lost.
  void add_racy(std::size_t j, double x) noexcept {
    v_[j].store(v_[j].load(std::memory_order_relaxed) + x, std::memory_order_relaxed);
  }

  /// Must not race with writers.
  void assign(std::span<const double> values);
  std::vector<double> snapshot() const;

 private:
  std::size_t dim_;
  std::unique_ptr<std::atomic<double>[]> v_;
};

/// Sparse vector over point indices; entries listed in increasing index order.
struct SparseDelta {
  std::vector<std::size_t> index;
  std::vector<double> value;

  std::size_t size() const noexcept { return index.size(); }
  bool empty() const noexcept { return index.empty(); }
};

/// What the cores' running copy of v tracks during a round.
enum class LocalView {
  kScaled,   // v_old + sigma (1/(lambda n)) X delta: each step maximizes the subproblem exactly
  kLiteral,  // v_old + (1/(lambda n)) X delta: sigma only weighs a step's own curvature
};

struct LocalConfig {
  LossKind loss = LossKind::kHinge;
  double lambda = 1e-4;
  double sigma = 1.0;
  std::size_t barrier = 1;  // S, weighs the g*(v) constant in the subproblem
  SubproblemScale scale = SubproblemScale::kGlobal;
  LocalView view = LocalView::kScaled;
  bool wild = false;
  bool track_gain = false;  // fill LocalRoundResult::q_gain
  std::uint64_t seed = 0;
};

/// Dual block of worker k and its sampling setup.
class WorkerState {
 public:
  WorkerState(const Dataset& data, const Partition& part, std::size_t worker, LocalConfig config);

  std::size_t worker() const noexcept { return worker_; }
  std::size_t num_cores() const noexcept { return cores_.size(); }
  std::size_t local_size() const noexcept { return points_.size(); }
  const Dataset& data() const noexcept { return *data_; }
  const LocalConfig& config() const noexcept { return config_; }

  /// I_k in local order.
  std::span<const std::size_t> points() const noexcept { return points_; }
  /// alpha_[k] in local order.
  std::span<const double> alpha() const noexcept { return alpha_; }
  double alpha_of(std::size_t global) const { return alpha_[local_of(global)]; }

  /// Rounds completed by local_round; seeds the per-core sampling streams.
  std::uint64_t round() const noexcept { return round_; }

  /// alpha_[k] += nu * delta (delta indexed by global point id).
  void apply(const SparseDelta& delta, double nu);

  /// Divisor of the conjugate term for this worker's subproblem.
  double conj_divisor() const noexcept;

  std::size_t local_of(std::size_t global) const;

 private:
  friend struct LocalRoundAccess;

  struct Entry {
    std::size_t global;
    std::size_t local;
  };

  const Dataset* data_;
  std::size_t worker_;
  LocalConfig config_;
  std::vector<std::size_t> points_;
  std::vector<std::uint32_t> local_of_;  // global -> local, only valid on I_k
  std::vector<std::vector<Entry>> cores_;  // eligible (nonzero-norm) entries per core
  std::vector<double> alpha_;
  std::uint64_t round_ = 0;
};

struct LocalRoundResult {
  SparseDelta delta;                 // delta_[k], zero outside I_k
  std::vector<double> delta_v;       // (1/(lambda n)) X delta, read off the shared vector
  std::size_t steps_taken = 0;       // R * H
  std::optional<double> q_gain;      // Q(delta) - Q(0)
};

/// Run R threads x H steps against `shared`, which must hold the latest
/// global v. alpha_[k] is left unchanged; the caller applies nu*delta once the
/// merged v arrives. Throws DivergenceError on a non-finite step.
LocalRoundResult local_round(WorkerState& state, SharedPrimal& shared, std::size_t local_iters);

/// Q_k^sigma(delta; v_old, alpha_[k]) including the -(lambda/S) g*(v_old)
/// constant. Returns -infinity when alpha + delta is infeasible.
double subproblem_objective(const WorkerState& state, std::span<const double> v_old,
                            const SparseDelta& delta);

/// Near-exact maximizer of the subproblem by sequential coordinate ascent,
/// stopping when a full pass moves no coordinate by more than `tol`.
SparseDelta solve_subproblem(const WorkerState& state, std::span<const double> v_old,
                             double tol = 1e-10, std::size_t max_epochs = 100000);

/// (Q(delta*) - Q(delta)) / (Q(delta*) - Q(0)); 0 if the block is already optimal.
double measure_theta(const WorkerState& state, std::span<const double> v_old, const SparseDelta& delta);

}  // namespace hdca
