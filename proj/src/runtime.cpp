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

#include "hdca/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <thread>
#include <variant>

#include "hdca/channel.hpp"
#include "hdca/errors.hpp"
#include "hdca/rng.hpp"

namespace hdca {

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kHybrid: return "hybrid";
    case Mode::kSequential: return "sequential";
    case Mode::kCocoa: return "cocoa";
    case Mode::kPasscode: return "passcode";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "hybrid") return Mode::kHybrid;
  if (name == "sequential") return Mode::kSequential;
  if (name == "cocoa") return Mode::kCocoa;
  if (name == "passcode") return Mode::kPasscode;
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// DelaySchedule

void DelaySchedule::set(std::size_t worker, std::vector<double> costs) {
  if (costs.empty()) throw ConfigError("delay schedule: worker " + std::to_string(worker) + " has no cost");
  for (double c : costs) {
    if (!std::isfinite(c) || c < 0.0) {
      throw ConfigError("delay schedule: costs must be finite and non-negative");
    }
  }
  costs_[worker] = std::move(costs);
}

double DelaySchedule::cost(std::size_t worker, std::uint64_t round) const {
  auto it = costs_.find(worker);
  if (it == costs_.end()) return 1.0;
  return it->second[round % it->second.size()];
}

std::size_t DelaySchedule::max_worker() const { return costs_.empty() ? 0 : costs_.rbegin()->first + 1; }

DelaySchedule DelaySchedule::parse(std::istream& in) {
  DelaySchedule s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto sep = line.find_first_of("=:");
    if (sep == std::string::npos) throw ConfigError("delay schedule line " + std::to_string(line_no) + ": expected 'worker = cost'");
    std::size_t worker = 0;
    std::vector<double> costs;
    try {
      std::size_t used = 0;
      const std::string key = line.substr(0, sep);
      worker = std::stoull(key, &used);
      if (key.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(key);
      std::stringstream vals(line.substr(sep + 1));
      for (std::string tok; std::getline(vals, tok, ',');) {
        if (tok.find_first_not_of(" \t\r") == std::string::npos) continue;
        costs.push_back(std::stod(tok, &used));
        if (tok.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(tok);
      }
    } catch (const std::exception&) {
      throw ConfigError("delay schedule line " + std::to_string(line_no) + ": malformed entry");
    }
    if (s.explicitly_set(worker)) {
      throw ConfigError("delay schedule line " + std::to_string(line_no) + ": worker listed twice");
    }
    s.set(worker, std::move(costs));
  }
  return s;
}

DelaySchedule DelaySchedule::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open delay schedule '" + path + "'");
  return parse(in);
}

Runtime& Runtime::inject_delays(DelaySchedule schedule) {
  const std::size_t k = config_.mode == Mode::kSequential || config_.mode == Mode::kPasscode ? 1 : config_.nodes;
  if (schedule.max_worker() > k) {
    throw ConfigError("delay schedule names worker " + std::to_string(schedule.max_worker() - 1) +
                      " but only " + std::to_string(k) + " exist");
  }
  config_.delays = std::move(schedule);
  return *this;
}

// ---------------------------------------------------------------------------
// Configuration

Config resolve(const Config& config, const Dataset& data) {
  Config c = config;
  switch (c.mode) {
    case Mode::kSequential:
      c.nodes = c.cores = c.barrier = c.delay_bound = 1;
      break;
    case Mode::kCocoa:
      c.barrier = c.nodes;
      c.delay_bound = 1;
      c.cores = 1;
      break;
    case Mode::kPasscode:
      c.nodes = c.barrier = c.delay_bound = 1;
      break;
    case Mode::kHybrid:
      if (c.barrier == 0) c.barrier = c.nodes;
      break;
  }

  if (!(c.lambda > 0.0) || !std::isfinite(c.lambda)) throw ConfigError("lambda must be positive");
  if (c.nodes < 1) throw ConfigError("need at least one node");
  if (c.cores < 1) throw ConfigError("need at least one core per node");
  if (c.barrier < 1 || c.barrier > c.nodes) {
    throw ConfigError("barrier S = " + std::to_string(c.barrier) + " must satisfy 1 <= S <= K = " +
                      std::to_string(c.nodes));
  }
  if (c.delay_bound < 1) throw ConfigError("delay bound must be >= 1");
  if (c.local_iters < 1) throw ConfigError("local iterations must be >= 1");
  if (c.rounds < 1) throw ConfigError("rounds must be >= 1");
  const double S = static_cast<double>(c.barrier);
  if (!(c.nu >= 1.0 / S && c.nu <= 1.0)) {
    throw ConfigError("nu must lie in [1/S, 1]");
  }
  if (!c.sigma) c.sigma = c.nu * S;
  if (!(*c.sigma > 0.0) || !std::isfinite(*c.sigma)) throw ConfigError("sigma must be positive");
  if (*c.sigma < c.nu * S && !c.unsafe_sigma) {
    throw ConfigError("sigma below nu*S is unsafe; pass --unsafe-sigma to allow it");
  }
  if (c.nodes * c.cores > data.n()) {
    throw ConfigError("K*R = " + std::to_string(c.nodes * c.cores) + " exceeds n = " + std::to_string(data.n()));
  }
  if (c.gap_target && !(*c.gap_target >= 0.0)) throw ConfigError("gap target must be non-negative");
  if (!(c.tick_ms >= 0.0)) throw ConfigError("tick length must be non-negative");
  if (c.delays && c.delays->max_worker() > c.nodes) {
    throw ConfigError("delay schedule names worker " + std::to_string(c.delays->max_worker() - 1) +
                      " but only " + std::to_string(c.nodes) + " exist");
  }
  if (is_binary(c.loss)) {
    for (std::size_t i = 0; i < data.n(); ++i) {
      const double y = data.points[i].label;
      if (y != 1.0 && y != -1.0) {
        throw ConfigError(std::string(loss_name(c.loss)) + " loss needs labels in {-1,+1}; point " +
                          std::to_string(i) + " has label " + std::to_string(y));
      }
    }
  }
  return c;
}

std::uint64_t alpha_checksum(const std::vector<double>& alpha) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double a : alpha) {
    std::uint64_t bits;
    std::memcpy(&bits, &a, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

using SteadyClock = std::chrono::steady_clock;

// Global alpha bookkeeping and gap checkpoints. Evaluation time is excluded
// from the reported wall time.
class Checkpointer {
 public:
  Checkpointer(const Config& cfg, const Dataset& data, RunReport& report)
      : cfg_(cfg), data_(data), report_(report), alpha_(data.n(), 0.0), start_(SteadyClock::now()) {}

  void apply(const SparseDelta& delta, double nu) {
    for (std::size_t e = 0; e < delta.size(); ++e) {
      double& a = alpha_[delta.index[e]];
      a = a + nu * delta.value[e];
    }
  }

  // Returns true once the gap target is met.
  bool record(std::uint64_t t, const std::vector<double>& v, std::vector<std::size_t> contributors,
              std::size_t msgs, double sim_ticks) {
    const double wall = std::chrono::duration<double, std::milli>(SteadyClock::now() - start_).count() - eval_ms_;
    if (cfg_.record_alpha) report_.alpha_trajectory.push_back(alpha_);
    if (cfg_.checkpoint_every == 0 || t % cfg_.checkpoint_every != 0) return false;

    const auto eval_start = SteadyClock::now();
    TraceRecord rec;
    rec.round = t;
    rec.wall_ms = wall;
    rec.sim_ticks = sim_ticks;
    rec.primal = primal_objective(data_, v, cfg_.lambda, cfg_.loss);
    rec.dual = dual_objective(data_, alpha_, cfg_.lambda, cfg_.loss);
    rec.gap = rec.primal - rec.dual;
    std::sort(contributors.begin(), contributors.end());
    rec.contributors = std::move(contributors);
    rec.msgs = msgs;
    eval_ms_ += std::chrono::duration<double, std::milli>(SteadyClock::now() - eval_start).count();

    if (!std::isfinite(rec.primal) || !std::isfinite(rec.dual)) {
      std::string why = "round " + std::to_string(t) + ": non-finite objective (P=" +
                        std::to_string(rec.primal) + ", D=" + std::to_string(rec.dual) + ")";
      if (auto bad = first_infeasible(data_, alpha_, cfg_.loss)) {
        why += "; conjugate at alpha_" + std::to_string(*bad) + " is not finite";
      }
      throw DivergenceError(why);
    }
    report_.trace.push_back(std::move(rec));
    return cfg_.gap_target && report_.trace.back().gap <= *cfg_.gap_target;
  }

  std::vector<double>& alpha() { return alpha_; }

 private:
  const Config& cfg_;
  const Dataset& data_;
  RunReport& report_;
  std::vector<double> alpha_;
  SteadyClock::time_point start_;
  double eval_ms_ = 0.0;
};

// Plain single-threaded DCA, organised in rounds of H steps. The round-end
// arithmetic mirrors a merge with nu = 1 so it can be compared bitwise.
void run_sequential(const Config& cfg, const Dataset& data, RunReport& report) {
  const Partition part = partition(data, 1, 1, cfg.seed);
  std::vector<std::size_t> eligible;
  for (std::size_t i : part.members[0][0]) {
    if (data.points[i].squared_norm > 0.0) eligible.push_back(i);
  }
  const std::size_t n = data.n();
  const double lambda_n = cfg.lambda * static_cast<double>(n);
  Checkpointer ckpt(cfg, data, report);
  std::vector<double>& alpha = ckpt.alpha();
  std::vector<double> v(data.dim, 0.0);
  std::vector<double> work(data.dim);
  std::vector<double> delta(n, 0.0);

  StepContext ctx;
  ctx.lambda = cfg.lambda;
  ctx.n = n;
  ctx.sigma = *cfg.sigma;
  ctx.conj_n = static_cast<double>(n);

  const double unscale = cfg.view == LocalView::kScaled ? *cfg.sigma : 1.0;
  double ticks = 0.0;
  for (std::uint64_t t = 0; t < cfg.rounds; ++t) {
    work = v;
    std::fill(delta.begin(), delta.end(), 0.0);
    std::mt19937_64 rng(stream_seed(cfg.seed, 0, 0, t));
    if (!eligible.empty()) {
      for (std::size_t h = 0; h < cfg.local_iters; ++h) {
        const std::size_t i = eligible[uniform_below(rng, eligible.size())];
        const SparsePoint& p = data.points[i];
        ctx.point = &p;
        ctx.v_dot_x = p.dot(work);
        ctx.alpha_i = alpha[i] + delta[i];
        const double eps = coordinate_step(cfg.loss, ctx);
        if (!std::isfinite(eps)) throw DivergenceError("sequential round " + std::to_string(t) + ": non-finite step");
        if (eps == 0.0) continue;
        delta[i] += eps;
        double coef = eps / lambda_n;
        if (cfg.view == LocalView::kScaled) coef *= *cfg.sigma;
        for (std::size_t j = 0; j < p.nnz(); ++j) work[p.indices[j]] += coef * p.values[j];
      }
    }
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = v[j] + cfg.nu * ((work[j] - v[j]) / unscale);
    for (std::size_t i = 0; i < n; ++i) {
      if (delta[i] != 0.0) alpha[i] = alpha[i] + cfg.nu * delta[i];
    }
    ticks += cfg.delays ? cfg.delays->cost(0, t) : 1.0;
    report.rounds_completed = t + 1;
    if (ckpt.record(t + 1, v, {0}, 0, ticks)) break;
  }
  report.final_v = v;
  report.final_alpha = alpha;
}

struct WorkerFailure {
  std::size_t worker;
  std::exception_ptr error;
};

// Shared by the simulated and threaded drivers.
struct WorkerSet {
  WorkerSet(const Config& cfg, const Dataset& data, const Partition& part) : cfg(cfg) {
    LocalConfig lc;
    lc.loss = cfg.loss;
    lc.lambda = cfg.lambda;
    lc.sigma = *cfg.sigma;
    lc.barrier = cfg.barrier;
    lc.scale = cfg.scale;
    lc.view = cfg.view;
    lc.wild = cfg.wild;
    lc.track_gain = cfg.track_gain;
    lc.seed = cfg.seed;
    for (std::size_t k = 0; k < cfg.nodes; ++k) {
      states.push_back(std::make_unique<WorkerState>(data, part, k, lc));
      shared.push_back(std::make_unique<SharedPrimal>(data.dim));
    }
    last_delta.resize(cfg.nodes);
    gains.resize(cfg.nodes);
  }

  UpdateMsg compute(std::size_t k) {
    LocalRoundResult res = local_round(*states[k], *shared[k], cfg.local_iters);
    if (res.q_gain) gains[k].push_back(*res.q_gain);
    last_delta[k] = res.delta;
    UpdateMsg msg;
    msg.worker = k;
    msg.delta_v = std::move(res.delta_v);
    msg.round_tag = states[k]->round() - 1;
    msg.dual_delta = std::move(res.delta);
    return msg;
  }

  // Worker-side handling of a merged v (alpha_[k] += nu delta_[k]).
  void accept(std::size_t k, const BroadcastMsg& bc) {
    states[k]->apply(last_delta[k], cfg.nu);
    shared[k]->assign(*bc.v);
  }

  double cost(std::size_t k) const {
    return cfg.delays ? cfg.delays->cost(k, states[k]->round() - 1) : 1.0;
  }

  const Config& cfg;
  std::vector<std::unique_ptr<WorkerState>> states;
  std::vector<std::unique_ptr<SharedPrimal>> shared;
  std::vector<SparseDelta> last_delta;
  std::vector<std::vector<double>> gains;
};

void drive_master(const Config& cfg, Master& master, Checkpointer& ckpt, RunReport& report,
                  const Master::Source& recv, const Master::Sink& send, const std::function<double()>& now) {
  for (std::uint64_t t = 0; t < cfg.rounds; ++t) {
    std::optional<RoundOutcome> out = master.master_round(recv, send);
    if (!out) break;
    if (out->record.messages != transmissions_per_round(cfg.barrier)) {
      throw ProtocolError("round " + std::to_string(out->record.t) + " used " +
                          std::to_string(out->record.messages) + " transmissions, expected 2S");
    }
    for (const auto& msg : out->merged) ckpt.apply(msg.dual_delta, cfg.nu);
    report.total_messages += out->record.messages;
    report.rounds_completed = out->record.t;
    std::vector<std::size_t> who;
    for (const auto& c : out->record.contributors) who.push_back(c.worker);
    if (ckpt.record(out->record.t, *out->record.v, std::move(who), out->record.messages, now())) break;
  }
}

void run_simulated(const Config& cfg, const Dataset& data, const Partition& part, Master& master,
                   Checkpointer& ckpt, RunReport& report, WorkerSet& workers) {
  struct Event {
    double time;
    std::uint64_t seq;
    UpdateMsg msg;
  };
  auto later = [](const Event& a, const Event& b) { return a.time != b.time ? a.time > b.time : a.seq > b.seq; };
  std::vector<Event> queue;
  std::uint64_t seq = 0;
  double clock = 0.0;

  auto start_round = [&](std::size_t k) {
    UpdateMsg msg = workers.compute(k);
    const double done = clock + workers.cost(k);
    queue.push_back({done, seq++, std::move(msg)});
    std::push_heap(queue.begin(), queue.end(), later);
  };
  for (std::size_t k = 0; k < cfg.nodes; ++k) start_round(k);

  Master::Source recv = [&]() -> std::optional<UpdateMsg> {
    if (queue.empty()) return std::nullopt;
    std::pop_heap(queue.begin(), queue.end(), later);
    Event ev = std::move(queue.back());
    queue.pop_back();
    clock = ev.time;
    return std::move(ev.msg);
  };
  Master::Sink send = [&](std::size_t k, const BroadcastMsg& bc) {
    if (bc.stop) return;
    workers.accept(k, bc);
    start_round(k);
  };
  (void)part;
  (void)data;
  drive_master(cfg, master, ckpt, report, recv, send, [&] { return clock; });
  master.stop(send);
}

void run_threaded(const Config& cfg, Master& master, Checkpointer& ckpt, RunReport& report,
                  WorkerSet& workers) {
  using InboxItem = std::variant<UpdateMsg, WorkerFailure>;
  Channel<InboxItem> inbox;
  std::vector<std::unique_ptr<Channel<BroadcastMsg>>> outbox;
  for (std::size_t k = 0; k < cfg.nodes; ++k) outbox.push_back(std::make_unique<Channel<BroadcastMsg>>());

  auto worker_main = [&](std::size_t k) {
    try {
      for (;;) {
        UpdateMsg msg = workers.compute(k);
        if (cfg.delays && cfg.delays->explicitly_set(k)) {
          const double ms = workers.cost(k) * cfg.tick_ms;
          std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
        }
        inbox.push(std::move(msg));
        std::optional<BroadcastMsg> bc = outbox[k]->pop();
        if (!bc || bc->stop) return;
        workers.accept(k, *bc);
      }
    } catch (...) {
      inbox.push(WorkerFailure{k, std::current_exception()});
    }
  };

  Master::Source recv = [&]() -> std::optional<UpdateMsg> {
    std::optional<InboxItem> item = inbox.pop();
    if (!item) return std::nullopt;
    if (auto* fail = std::get_if<WorkerFailure>(&*item)) std::rethrow_exception(fail->error);
    return std::move(std::get<UpdateMsg>(*item));
  };
  Master::Sink send = [&](std::size_t k, const BroadcastMsg& bc) { outbox[k]->push(bc); };

  std::vector<std::jthread> threads;
  auto shutdown = [&] {
    master.stop(send);
    threads.clear();
  };
  try {
    for (std::size_t k = 0; k < cfg.nodes; ++k) threads.emplace_back(worker_main, k);
    drive_master(cfg, master, ckpt, report, recv, send, [] { return 0.0; });
  } catch (...) {
    shutdown();
    throw;
  }
  shutdown();
}

}  // namespace

RunReport run(const Config& config, const Dataset& data) {
  RunReport report;
  report.effective = resolve(config, data);
  const Config& cfg = report.effective;

  if (cfg.mode == Mode::kSequential) {
    run_sequential(cfg, data, report);
  } else {
    const Partition part = partition(data, cfg.nodes, cfg.cores, cfg.seed);
    Master master({cfg.nodes, cfg.barrier, cfg.delay_bound, cfg.nu}, std::vector<double>(data.dim, 0.0));
    if (cfg.protocol_log) master.set_event_log(cfg.protocol_log);
    Checkpointer ckpt(cfg, data, report);
    WorkerSet workers(cfg, data, part);
    if (cfg.clock == Clock::kSimulated) {
      run_simulated(cfg, data, part, master, ckpt, report, workers);
    } else {
      run_threaded(cfg, master, ckpt, report, workers);
    }
    report.history = master.history();
    report.final_v = master.v();
    report.final_alpha = ckpt.alpha();
    if (cfg.track_gain) report.q_gains = std::move(workers.gains);
  }
  report.final_alpha_checksum = alpha_checksum(report.final_alpha);
  return report;
}

}  // namespace hdca
