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

// Composition of K workers x R cores and the master into full solver runs.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hdca/aggregator.hpp"
#include "hdca/data.hpp"
#include "hdca/local_solver.hpp"
#include "hdca/losses.hpp"
#include "hdca/metrics.hpp"

namespace hdca {

enum class Mode {
  kHybrid,      // K workers, R cores each, bounded barrier and delay
  kSequential,  // single-threaded DCA, K = R = S = 1
  kCocoa,       // synchronous: S = K, Gamma = 1, one core per node
  kPasscode,    // one node, R cores, pass-through master
};

enum class Clock { kWall, kSimulated };

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

/// Per-worker round cost. In simulated time a worker's round takes
/// `cost` logical ticks; in wall time it sleeps `cost * tick_ms` after
/// computing. A list of costs is cycled through round by round. Workers
/// without an entry cost 1 tick (wall time: no sleep).
class DelaySchedule {
 public:
  DelaySchedule() = default;

  void set(std::size_t worker, std::vector<double> costs);
  double cost(std::size_t worker, std::uint64_t round) const;
  bool explicitly_set(std::size_t worker) const { return costs_.count(worker) != 0; }
  std::size_t max_worker() const;  // largest worker with an entry + 1
  bool empty() const noexcept { return costs_.empty(); }

  /// Key-value text, one worker per line: "<k> = <cost>[, <cost> ...]".
  /// '#' starts a comment; ':' is accepted in place of '='.
  static DelaySchedule parse(std::istream& in);
  static DelaySchedule load(const std::string& path);

 private:
  std::map<std::size_t, std::vector<double>> costs_;
};

struct Config {
  LossKind loss = LossKind::kHinge;
  double lambda = 1e-4;
  std::size_t nodes = 1;        // K
  std::size_t cores = 1;        // R
  std::size_t barrier = 0;      // S; 0 means S = K
  std::size_t delay_bound = 1;  // Gamma
  std::size_t local_iters = 40000;  // H
  double nu = 1.0;
  std::optional<double> sigma;  // default nu * S
  std::size_t rounds = 100;
  std::uint64_t seed = 0;
  Mode mode = Mode::kHybrid;
  SubproblemScale scale = SubproblemScale::kGlobal;
  LocalView view = LocalView::kScaled;
  std::optional<double> gap_target;
  std::optional<DelaySchedule> delays;
  Clock clock = Clock::kWall;
  double tick_ms = 1.0;
  bool wild = false;
  bool unsafe_sigma = false;

  /// Evaluate P, D and the gap every `checkpoint_every` merges (0: never).
  std::size_t checkpoint_every = 1;
  /// Keep alpha after every merge in RunReport::alpha_trajectory.
  bool record_alpha = false;
  /// Compute Q(delta) - Q(0) for every worker round.
  bool track_gain = false;
  Master::EventLog protocol_log;
};

/// The configuration actually run: mode overrides applied, sigma resolved.
/// Throws ConfigError on any invalid combination.
Config resolve(const Config& config, const Dataset& data);

struct RunReport {
  Config effective;
  std::vector<TraceRecord> trace;           // one per checkpointed merge
  std::vector<MergeRecord> history;         // every merge (empty for sequential)
  std::vector<std::vector<double>> alpha_trajectory;  // when record_alpha
  std::vector<std::vector<double>> q_gains;  // when track_gain: [worker][round]
  std::vector<double> final_v;
  std::vector<double> final_alpha;
  std::uint64_t final_alpha_checksum = 0;
  std::size_t total_messages = 0;
  std::uint64_t rounds_completed = 0;
};

/// FNV-1a over the bit patterns of alpha.
std::uint64_t alpha_checksum(const std::vector<double>& alpha);

RunReport run(const Config& config, const Dataset& data);

/// Holds a configuration and dataset; lets delays be attached before running.
class Runtime {
 public:
  Runtime(Config config, const Dataset& data) : config_(std::move(config)), data_(&data) {}

  /// Throws ConfigError if the schedule names a worker outside [0, K).
  Runtime& inject_delays(DelaySchedule schedule);

  const Config& config() const noexcept { return config_; }
  RunReport run() const { return hdca::run(config_, *data_); }

 private:
  Config config_;
  const Dataset* data_;
};

}  // namespace hdca
