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

#include "hdca/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "hdca/errors.hpp"

namespace hdca {

Master::Master(MasterConfig config, std::vector<double> v0)
    : config_(config),
      v_(std::make_shared<const std::vector<double>>(std::move(v0))),
      gamma_(config.num_workers, 1),
      base_(config.num_workers, 0) {
  if (config_.num_workers == 0) throw ConfigError("master: K must be >= 1");
  if (config_.barrier < 1 || config_.barrier > config_.num_workers) {
    throw ConfigError("master: barrier S must satisfy 1 <= S <= K");
  }
  if (config_.delay_bound < 1) throw ConfigError("master: delay bound must be >= 1");
  bound_attainable_ = config_.num_workers <= config_.barrier * (config_.delay_bound + 1);
}

void Master::receive(UpdateMsg msg) {
  const std::size_t k = msg.worker;
  if (k >= config_.num_workers) {
    throw ProtocolError("update from unknown worker " + std::to_string(k));
  }
  if (pending_.count(k) != 0) {
    throw ProtocolError("worker " + std::to_string(k) + " sent a second update while one is pending");
  }
  if (msg.delta_v.size() != v_->size()) {
    throw ProtocolError("update from worker " + std::to_string(k) + " has wrong dimension");
  }
  for (double x : msg.delta_v) {
    if (!std::isfinite(x)) {
      throw DivergenceError("non-finite update from worker " + std::to_string(k));
    }
  }
  msg.arrival_seq = arrivals_++;
  gamma_[k] = 1;
  if (log_) log_({ProtocolEvent::Kind::kReceive, t_, k, gamma_[k]});
  pending_.emplace(k, std::move(msg));
}

std::vector<std::size_t> Master::select() const {
  std::vector<std::size_t> chosen;
  chosen.reserve(pending_.size());
  for (const auto& [k, msg] : pending_) chosen.push_back(k);
  std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    if (base_[a] != base_[b]) return base_[a] < base_[b];
    return pending_.at(a).arrival_seq < pending_.at(b).arrival_seq;
  });
  if (chosen.size() > config_.barrier) chosen.resize(config_.barrier);
  return chosen;
}

// After merging `chosen` as merge t+1, can every worker still be merged
// within delay_bound merges of its last one, at S contributors per merge?
bool Master::deadlines_feasible(const std::vector<std::size_t>& chosen) const {
  const std::size_t K = config_.num_workers, S = config_.barrier, G = config_.delay_bound;
  // demand[h]: workers that must be merged within the next h merges.
  std::vector<std::size_t> demand(G + 2, 0);
  for (std::size_t k = 0; k < K; ++k) {
    std::uint64_t h = G + 1;
    if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) {
      const std::uint64_t last = base_[k] + G + 1;  // latest merge index allowed
      if (last <= t_ + 1) return false;
      h = std::min<std::uint64_t>(last - (t_ + 1), G + 1);
    }
    ++demand[h];
  }
  std::size_t due = 0;
  for (std::size_t h = 1; h <= G + 1; ++h) {
    due += demand[h];
    if (due > S * h) return false;
  }
  return true;
}

bool Master::must_wait() const {
  if (pending_.size() < config_.barrier) return true;
  // Only a worker that is still computing can clear its own counter.
  for (std::size_t k = 0; k < config_.num_workers; ++k) {
    if (gamma_[k] > config_.delay_bound && pending_.count(k) == 0) return true;
  }
  // Waiting costs no staleness, so hold the merge while it would leave some
  // worker unable to keep within the bound. Skipped when the bound cannot be
  // met at all (K > S (Gamma + 1)) and when nobody else can still report.
  if (!bound_attainable_ || pending_.size() == config_.num_workers) return false;
  return !deadlines_feasible(select());
}

std::optional<RoundOutcome> Master::master_round(const Source& recv, const Sink& send) {
  while (must_wait()) {
    std::optional<UpdateMsg> msg = recv();
    if (!msg) return std::nullopt;
    receive(std::move(*msg));
  }

  const std::vector<std::size_t> chosen = select();

  RoundOutcome out;
  auto next = std::make_shared<std::vector<double>>(*v_);
  for (std::size_t k : chosen) {
    auto node = pending_.extract(k);
    UpdateMsg& msg = node.mapped();
    for (std::size_t j = 0; j < next->size(); ++j) (*next)[j] = (*next)[j] + config_.nu * msg.delta_v[j];
    out.record.contributors.push_back({k, msg.round_tag, base_[k], t_ - base_[k], msg.arrival_seq});
    out.merged.push_back(std::move(msg));
  }
  ++t_;
  v_ = std::move(next);

  for (std::size_t k = 0; k < config_.num_workers; ++k) {
    if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) ++gamma_[k];
  }
  if (log_) {
    for (std::size_t k : chosen) log_({ProtocolEvent::Kind::kMerge, t_, k, gamma_[k]});
  }

  const BroadcastMsg bc{t_, v_, false};
  for (std::size_t k : chosen) {
    base_[k] = t_;
    if (log_) log_({ProtocolEvent::Kind::kBroadcast, t_, k, gamma_[k]});
    send(k, bc);
  }

  out.record.t = t_;
  out.record.messages = 2 * chosen.size();
  out.record.v = v_;
  history_.push_back(out.record);
  return out;
}

void Master::stop(const Sink& send) const {
  const BroadcastMsg bc{t_, v_, true};
  for (std::size_t k = 0; k < config_.num_workers; ++k) send(k, bc);
}

std::uint64_t max_staleness(const std::vector<MergeRecord>& history) {
  std::uint64_t m = 0;
  for (const auto& rec : history) {
    for (const auto& c : rec.contributors) m = std::max(m, c.staleness);
  }
  return m;
}

std::vector<std::pair<std::size_t, std::uint64_t>> freshness_violations(
    const std::vector<MergeRecord>& history, std::size_t num_workers, std::size_t delay_bound) {
  std::vector<std::pair<std::size_t, std::uint64_t>> bad;
  std::vector<std::uint64_t> last(num_workers, 0);
  std::uint64_t final_t = 0;
  for (const auto& rec : history) {
    for (const auto& c : rec.contributors) {
      if (c.worker >= num_workers) continue;
      if (rec.t - last[c.worker] - 1 > delay_bound) bad.emplace_back(c.worker, rec.t);
      last[c.worker] = rec.t;
    }
    final_t = rec.t;
  }
  for (std::size_t k = 0; k < num_workers; ++k) {
    if (final_t - last[k] > delay_bound) bad.emplace_back(k, final_t);
  }
  return bad;
}

namespace {

const char* event_name(ProtocolEvent::Kind kind) {
  switch (kind) {
    case ProtocolEvent::Kind::kReceive: return "receive";
    case ProtocolEvent::Kind::kMerge: return "merge";
    case ProtocolEvent::Kind::kBroadcast: return "broadcast";
  }
  return "?";
}

}  // namespace

void write_protocol_event(std::ostream& out, const ProtocolEvent& e) {
  out << event_name(e.kind) << ',' << e.t << ',' << e.worker << ',' << e.gamma << '\n';
}

std::vector<ProtocolEvent> read_protocol_trace(std::istream& in) {
  std::vector<ProtocolEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("event,", 0) == 0) continue;
    std::istringstream ss(line);
    std::string name, t, k, g;
    if (!std::getline(ss, name, ',') || !std::getline(ss, t, ',') || !std::getline(ss, k, ',') ||
        !std::getline(ss, g)) {
      throw ParseError(line_no, "malformed protocol event");
    }
    ProtocolEvent e{};
    if (name == "receive") e.kind = ProtocolEvent::Kind::kReceive;
    else if (name == "merge") e.kind = ProtocolEvent::Kind::kMerge;
    else if (name == "broadcast") e.kind = ProtocolEvent::Kind::kBroadcast;
    else throw ParseError(line_no, "unknown protocol event '" + name + "'");
    try {
      e.t = std::stoull(t);
      e.worker = std::stoull(k);
      e.gamma = std::stoull(g);
    } catch (const std::exception&) {
      throw ParseError(line_no, "malformed protocol event");
    }
    events.push_back(e);
  }
  return events;
}

}  // namespace hdca
