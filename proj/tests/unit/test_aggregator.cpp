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

#include <algorithm>
#include <functional>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "hdca/aggregator.hpp"
#include "hdca/errors.hpp"

using namespace hdca;

namespace {

// Discrete-event stand-in for K workers: worker k's r-th round takes
// cost(k, r) ticks and uploads payload(k, r).
struct ProtocolSim {
  using Cost = std::function<double(std::size_t, std::uint64_t)>;
  using Payload = std::function<std::vector<double>(std::size_t, std::uint64_t)>;

  struct Event {
    double time;
    std::uint64_t seq;
    UpdateMsg msg;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };

  ProtocolSim(MasterConfig cfg, std::size_t dim, Cost cost, Payload payload)
      : master(cfg, std::vector<double>(dim, 0.0)), cost(std::move(cost)), payload(std::move(payload)),
        rounds(cfg.num_workers, 0) {
    for (std::size_t k = 0; k < cfg.num_workers; ++k) start(k);
  }

  void start(std::size_t k) {
    UpdateMsg m;
    m.worker = k;
    m.round_tag = rounds[k];
    m.delta_v = payload(k, rounds[k]);
    queue.push({now + cost(k, rounds[k]), seq++, std::move(m)});
    ++rounds[k];
  }

  std::optional<RoundOutcome> step() {
    Master::Source recv = [&]() -> std::optional<UpdateMsg> {
      if (queue.empty()) return std::nullopt;
      Event e = queue.top();
      queue.pop();
      now = e.time;
      ++received;
      return std::move(e.msg);
    };
    Master::Sink send = [&](std::size_t k, const BroadcastMsg& bc) {
      broadcasts.emplace_back(k, bc.t);
      if (!bc.stop) start(k);
    };
    return master.master_round(recv, send);
  }

  Master master;
  Cost cost;
  Payload payload;
  std::vector<std::uint64_t> rounds;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;
  std::uint64_t seq = 0;
  double now = 0.0;
  std::size_t received = 0;
  std::vector<std::pair<std::size_t, std::uint64_t>> broadcasts;
};

std::set<std::size_t> workers_of(const MergeRecord& rec) {
  std::set<std::size_t> s;
  for (const auto& c : rec.contributors) s.insert(c.worker);
  return s;
}

std::vector<double> unit_payload(std::size_t k, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  v[k] = 1.0;
  return v;
}

}  // namespace

TEST_CASE("transmissions per round") {
  CHECK(transmissions_per_round(2) == 4);
  CHECK(transmissions_per_round(4) == 8);
  CHECK(transmissions_per_round(1) == 2);
}

TEST_CASE("one worker: strict alternation") {
  ProtocolSim sim({1, 1, 1, 1.0}, 2, [](auto, auto) { return 1.0; },
                  [](std::size_t, std::uint64_t r) { return std::vector<double>{1.0, static_cast<double>(r)}; });
  for (int t = 1; t <= 5; ++t) {
    const auto out = sim.step();
    REQUIRE(out);
    CHECK(out->record.t == static_cast<std::uint64_t>(t));
    CHECK(out->record.messages == 2);
    CHECK(sim.received == static_cast<std::size_t>(t));
    CHECK(out->record.contributors.at(0).staleness == 0);
  }
  CHECK(sim.master.v() == std::vector<double>{5.0, 0.0 + 1.0 + 2.0 + 3.0 + 4.0});
}

TEST_CASE("S = K behaves as a synchronous round") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  ProtocolSim sim({4, 4, 1, 0.25}, 4, [&](auto, auto) { return u(rng); },
                  [](std::size_t k, std::uint64_t) { return unit_payload(k, 4); });
  for (int t = 1; t <= 10; ++t) {
    const auto out = sim.step();
    REQUIRE(out);
    CHECK(workers_of(out->record) == std::set<std::size_t>{0, 1, 2, 3});
    CHECK(out->record.messages == 8);
    for (const auto& c : out->record.contributors) CHECK(c.staleness == 0);
  }
  CHECK(sim.master.v() == std::vector<double>(4, 2.5));
}

TEST_CASE("slow worker forces the master to hold back fresh updates") {
  // Worker 0 needs 7 ticks per round, workers 1 and 2 need 2.
  ProtocolSim sim({3, 2, 2, 1.0}, 3, [](std::size_t k, auto) { return k == 0 ? 7.0 : 2.0; },
                  [](std::size_t k, std::uint64_t) { return unit_payload(k, 3); });
  std::vector<ProtocolEvent> events;
  sim.master.set_event_log([&](const ProtocolEvent& e) { events.push_back(e); });
  const auto m1 = sim.step();
  const auto m2 = sim.step();
  CHECK(workers_of(m1->record) == std::set<std::size_t>{1, 2});
  CHECK(workers_of(m2->record) == std::set<std::size_t>{1, 2});
  // By tick 6 both fast workers have their third update pending, but
  // worker 0 has missed two merges, so nothing is merged until it reports.
  const auto m3 = sim.step();
  CHECK(sim.now == 7.0);
  CHECK(workers_of(m3->record) == std::set<std::size_t>{0, 1});
  CHECK(sim.master.is_pending(2));
  std::size_t receipts_before_third_merge = 0;
  for (const auto& e : events) {
    if (e.kind == ProtocolEvent::Kind::kMerge && e.t == 3) break;
    if (e.kind == ProtocolEvent::Kind::kReceive) ++receipts_before_third_merge;
  }
  CHECK(receipts_before_third_merge == 7);
  CHECK(m3->record.contributors[0].worker == 0);
  CHECK(m3->record.contributors[0].staleness == 2);
  // Broadcasts go to contributors only.
  for (const auto& [k, t] : sim.broadcasts) {
    const auto& rec = sim.master.history().at(t - 1);
    CHECK(workers_of(rec).count(k) == 1);
  }
}

TEST_CASE("merged v is the exact sum of merged payloads") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> cost(1, 9), val(-50, 50);
  const std::size_t K = 5, dim = 6;
  ProtocolSim sim({K, 3, 2, 1.0}, dim, [&](auto, auto) { return static_cast<double>(cost(rng)); },
                  [&](auto, auto) {
                    std::vector<double> v(dim);
                    for (double& x : v) x = val(rng);
                    return v;
                  });
  std::vector<double> expect(dim, 0.0);
  for (int t = 0; t < 60; ++t) {
    const auto out = sim.step();
    REQUIRE(out);
    for (const auto& m : out->merged) {
      for (std::size_t j = 0; j < dim; ++j) expect[j] += m.delta_v[j];
    }
    CHECK(sim.master.v() == expect);
  }
}

TEST_CASE("liveness and message counts under random delays") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t K = 1 + rng() % 7;
    const std::size_t S = 1 + rng() % K;
    const std::size_t G = 1 + rng() % 4;
    std::vector<double> speed(K);
    for (double& s : speed) s = std::exponential_distribution<double>(1.0)(rng) * (1 + rng() % 20);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    ProtocolSim sim({K, S, G, 1.0 / static_cast<double>(S)}, 1,
                    [&](std::size_t k, auto) { return speed[k] * jitter(rng) + 1e-3; },
                    [](auto, auto) { return std::vector<double>{1.0}; });
    for (int t = 0; t < 40; ++t) {
      const auto out = sim.step();
      REQUIRE(out);  // a dry source would mean a deadlock
      CHECK(out->record.messages == 2 * S);
      CHECK(out->record.contributors.size() == S);
      // Each contributor is pending at most once.
      CHECK(workers_of(out->record).size() == S);
    }
    // Watchdog: no round may need more than one receipt per worker beyond
    // what the merges consumed.
    CHECK(sim.received <= 40 * S + K);
    if (S == K) {
      CHECK(freshness_violations(sim.master.history(), K, G).empty());
    }
  }
}

TEST_CASE("staleness stays within the bound whenever K <= S (Gamma + 1)") {
  std::mt19937_64 rng(99);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t K = 2 + rng() % 8;
    const std::size_t S = 1 + rng() % K;
    const std::size_t G = 1 + rng() % 6;
    if (K > S * (G + 1)) continue;
    ++checked;
    std::vector<double> speed(K);
    for (double& s : speed) s = 1.0 + static_cast<double>(rng() % 30);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    ProtocolSim sim({K, S, G, 1.0 / static_cast<double>(S)}, 1,
                    [&](std::size_t k, auto) { return speed[k] * jitter(rng); },
                    [](auto, auto) { return std::vector<double>{1.0}; });
    for (int t = 0; t < 60; ++t) REQUIRE(sim.step());
    CHECK(max_staleness(sim.master.history()) <= G);
    CHECK(freshness_violations(sim.master.history(), K, G).empty());
  }
  CHECK(checked > 100);
}

TEST_CASE("selection is deterministic for identical arrivals") {
  auto run = [](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> cost(1, 6);
    ProtocolSim sim({6, 3, 2, 1.0}, 1, [&](auto, auto) { return static_cast<double>(cost(rng)); },
                    [](auto, auto) { return std::vector<double>{1.0}; });
    std::vector<std::set<std::size_t>> sets;
    for (int t = 0; t < 30; ++t) sets.push_back(workers_of(sim.step()->record));
    return sets;
  };
  CHECK(run(5) == run(5));
  CHECK(run(6) == run(6));
}

TEST_CASE("protocol violations") {
  Master m({2, 1, 1, 1.0}, std::vector<double>(2, 0.0));
  std::vector<UpdateMsg> script;
  auto msg = [](std::size_t k, std::vector<double> dv) {
    UpdateMsg u;
    u.worker = k;
    u.delta_v = std::move(dv);
    return u;
  };
  auto feed = [&](std::vector<UpdateMsg> msgs) {
    auto it = std::make_shared<std::size_t>(0);
    auto store = std::make_shared<std::vector<UpdateMsg>>(std::move(msgs));
    return Master::Source([it, store]() -> std::optional<UpdateMsg> {
      if (*it >= store->size()) return std::nullopt;
      return (*store)[(*it)++];
    });
  };
  const Master::Sink sink = [](std::size_t, const BroadcastMsg&) {};
  CHECK_THROWS_AS(m.master_round(feed({msg(5, {1, 1})}), sink), ProtocolError);
  CHECK_THROWS_AS(Master({2, 1, 1, 1.0}, {0, 0}).master_round(feed({msg(0, {1})}), sink), ProtocolError);
  CHECK_THROWS_AS(Master({2, 1, 1, 1.0}, {0, 0}).master_round(feed({msg(0, {NAN, 1})}), sink),
                  DivergenceError);
  // Worker 1 is overdue after the first merge, so the second round keeps
  // receiving and a repeat from 0 arrives while its update is pending.
  Master m2({2, 1, 1, 1.0}, {0, 0});
  auto src = feed({msg(0, {1, 0}), msg(0, {1, 0}), msg(0, {1, 0})});
  REQUIRE(m2.master_round(src, sink));
  CHECK_THROWS_AS(m2.master_round(src, sink), ProtocolError);
  // Dry source.
  Master m3({2, 2, 1, 1.0}, {0, 0});
  CHECK_FALSE(m3.master_round(feed({msg(0, {1, 0})}), sink).has_value());

  CHECK_THROWS_AS(Master({2, 3, 1, 1.0}, {0}), ConfigError);
  CHECK_THROWS_AS(Master({2, 0, 1, 1.0}, {0}), ConfigError);
  CHECK_THROWS_AS(Master({2, 1, 0, 1.0}, {0}), ConfigError);
}

TEST_CASE("stop reaches every worker") {
  Master m({3, 1, 1, 1.0}, {0.0});
  std::set<std::size_t> stopped;
  m.stop([&](std::size_t k, const BroadcastMsg& bc) {
    CHECK(bc.stop);
    stopped.insert(k);
  });
  CHECK(stopped == std::set<std::size_t>{0, 1, 2});
}

TEST_CASE("freshness and staleness from history") {
  MergeRecord a, b, c;
  a.t = 1;
  a.contributors = {{0, 0, 0, 0, 0}};
  b.t = 2;
  b.contributors = {{0, 1, 1, 0, 1}};
  c.t = 3;
  c.contributors = {{1, 0, 0, 2, 2}};
  const std::vector<MergeRecord> h{a, b, c};
  CHECK(max_staleness(h) == 2);
  const auto bad = freshness_violations(h, 2, 1);
  REQUIRE(bad.size() == 1);
  CHECK(bad[0] == std::pair<std::size_t, std::uint64_t>{1, 3});
  CHECK(freshness_violations(h, 2, 2).empty());
}

TEST_CASE("protocol trace round trip") {
  std::vector<ProtocolEvent> events{{ProtocolEvent::Kind::kReceive, 0, 2, 1},
                                    {ProtocolEvent::Kind::kMerge, 1, 2, 1},
                                    {ProtocolEvent::Kind::kBroadcast, 1, 2, 1}};
  std::stringstream s;
  for (const auto& e : events) write_protocol_event(s, e);
  const auto back = read_protocol_trace(s);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].kind == events[i].kind);
    CHECK(back[i].t == events[i].t);
    CHECK(back[i].worker == events[i].worker);
    CHECK(back[i].gamma == events[i].gamma);
  }
}
