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

// The master: bounded-barrier / bounded-delay merging of worker deltas.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hdca/local_solver.hpp"

namespace hdca {

using VectorPtr = std::shared_ptr<const std::vector<double>>;

/// Worker -> master. `dual_delta` is carried for the measurement harness
/// only; the merge never reads it.
struct UpdateMsg {
  std::size_t worker = 0;
  std::vector<double> delta_v;
  std::uint64_t round_tag = 0;
  std::uint64_t arrival_seq = 0;  // assigned by the master on receipt
  SparseDelta dual_delta;
};

/// Master -> worker: the merged v^(t), or a stop sentinel.
struct BroadcastMsg {
  std::uint64_t t = 0;
  VectorPtr v;
  bool stop = false;
};

struct MasterConfig {
  std::size_t num_workers = 1;  // K
  std::size_t barrier = 1;      // S
  std::size_t delay_bound = 1;  // Gamma
  double nu = 1.0;
};

struct Contribution {
  std::size_t worker = 0;
  std::uint64_t round_tag = 0;
  std::uint64_t base_version = 0;  // t of the v the update was computed from
  std::uint64_t staleness = 0;     // merges applied since base_version
  std::uint64_t arrival_seq = 0;
};

struct MergeRecord {
  std::uint64_t t = 0;  // index of the v produced by this merge (1-based)
  std::vector<Contribution> contributors;
  std::size_t messages = 0;  // uploads merged + broadcasts sent
  VectorPtr v;
};

struct RoundOutcome {
  MergeRecord record;
  std::vector<UpdateMsg> merged;
};

struct ProtocolEvent {
  enum class Kind { kReceive, kMerge, kBroadcast };
  Kind kind;
  std::uint64_t t;
  std::size_t worker;
  std::uint64_t gamma;
};

class Master {
 public:
  /// Yields the next message in arrival order, or nullopt when no more can arrive.
  using Source = std::function<std::optional<UpdateMsg>()>;
  using Sink = std::function<void(std::size_t worker, const BroadcastMsg&)>;
  using EventLog = std::function<void(const ProtocolEvent&)>;

  Master(MasterConfig config, std::vector<double> v0);

  /// One global update. Receives until |P| >= S and no worker that could
  /// still send has Gamma_k > Gamma, and (when K <= S (Gamma + 1)) until
  /// merging now keeps every worker able to contribute within Gamma merges;
  /// merges the S pending updates computed from the oldest v (ties: earlier
  /// arrival); broadcasts to exactly the contributors. Returns nullopt if
  /// the source runs dry first.
  std::optional<RoundOutcome> master_round(const Source& recv, const Sink& send);

  /// Stop sentinel to every worker.
  void stop(const Sink& send) const;

  void set_event_log(EventLog log) { log_ = std::move(log); }

  const MasterConfig& config() const noexcept { return config_; }
  const std::vector<double>& v() const noexcept { return *v_; }
  VectorPtr v_ptr() const noexcept { return v_; }
  std::uint64_t t() const noexcept { return t_; }
  std::uint64_t gamma(std::size_t k) const { return gamma_.at(k); }
  std::size_t pending_count() const noexcept { return pending_.size(); }
  bool is_pending(std::size_t k) const { return pending_.count(k) != 0; }
  const std::vector<MergeRecord>& history() const noexcept { return history_; }

 private:
  void receive(UpdateMsg msg);
  bool must_wait() const;
  std::vector<std::size_t> select() const;
  bool deadlines_feasible(const std::vector<std::size_t>& chosen) const;

  MasterConfig config_;
  VectorPtr v_;
  std::uint64_t t_ = 0;
  std::uint64_t arrivals_ = 0;
  std::map<std::size_t, UpdateMsg> pending_;
  std::vector<std::uint64_t> gamma_;
  std::vector<std::uint64_t> base_;
  std::vector<MergeRecord> history_;
  EventLog log_;
  bool bound_attainable_ = true;
};

/// 2S: S uploads plus S broadcasts per global update.
constexpr std::size_t transmissions_per_round(std::size_t barrier) noexcept { return 2 * barrier; }

/// Largest staleness over all merged updates.
std::uint64_t max_staleness(const std::vector<MergeRecord>& history);

/// Workers whose gap between consecutive merged contributions (counting
/// the start as merge 0) left more than `delay_bound` merges in between.
/// Returns (worker, merge t) pairs; a worker still waiting at the end of
/// the history is checked against the final merge.
std::vector<std::pair<std::size_t, std::uint64_t>> freshness_violations(
    const std::vector<MergeRecord>& history, std::size_t num_workers, std::size_t delay_bound);

/// Protocol trace: "event,t,worker,gamma" lines (a header line of that form
/// is skipped on reading) with event in
/// {receive, merge, broadcast}.
void write_protocol_event(std::ostream& out, const ProtocolEvent& e);
std::vector<ProtocolEvent> read_protocol_trace(std::istream& in);

}  // namespace hdca
