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

#include "hdca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "hdca/errors.hpp"
#include "hdca/summation.hpp"

namespace hdca {

std::vector<double> primal_from_dual(const Dataset& ds, std::span<const double> alpha, double lambda) {
  if (alpha.size() != ds.n()) throw std::invalid_argument("primal_from_dual: alpha has wrong length");
  const double lambda_n = lambda * static_cast<double>(ds.n());
  std::vector<double> w(ds.dim, 0.0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (alpha[i] == 0.0) continue;
    const auto& p = ds.points[i];
    const double coef = alpha[i] / lambda_n;
    for (std::size_t j = 0; j < p.nnz(); ++j) w[p.indices[j]] += coef * p.values[j];
  }
  return w;
}

namespace {

double half_sq_norm(std::span<const double> w) {
  CompensatedSum s;
  for (double x : w) s.add(x * x);
  return 0.5 * s.value();
}

}  // namespace

double primal_objective(const Dataset& ds, std::span<const double> w, double lambda, LossKind loss) {
  if (w.size() != ds.dim) throw std::invalid_argument("primal_objective: w has wrong length");
  CompensatedSum s;
  for (const auto& p : ds.points) s.add(primal_loss(loss, p.dot(w), p.label));
  return s.value() / static_cast<double>(ds.n()) + lambda * half_sq_norm(w);
}

std::optional<std::size_t> first_infeasible(const Dataset& ds, std::span<const double> alpha, LossKind loss) {
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!std::isfinite(conjugate(loss, alpha[i], ds.points[i].label))) return i;
  }
  return std::nullopt;
}

double dual_objective(const Dataset& ds, std::span<const double> alpha, double lambda, LossKind loss) {
  if (alpha.size() != ds.n()) throw std::invalid_argument("dual_objective: alpha has wrong length");
  CompensatedSum s;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double c = conjugate(loss, alpha[i], ds.points[i].label);
    if (!std::isfinite(c)) return -kInfinity;
    s.add(c);
  }
  const std::vector<double> w = primal_from_dual(ds, alpha, lambda);
  return -s.value() / static_cast<double>(ds.n()) - lambda * half_sq_norm(w);
}

double duality_gap(const Dataset& ds, std::span<const double> v, std::span<const double> alpha,
                   double lambda, LossKind loss) {
  return primal_objective(ds, v, lambda, loss) - dual_objective(ds, alpha, lambda, loss);
}

std::string contributors_to_mask(const std::vector<std::size_t>& workers) {
  std::size_t top = 0;
  for (std::size_t k : workers) top = std::max(top, k + 1);
  std::vector<unsigned> nibbles((top + 3) / 4 + (top == 0 ? 1 : 0), 0);
  for (std::size_t k : workers) nibbles[k / 4] |= 1u << (k % 4);
  std::string s = "0x";
  for (auto it = nibbles.rbegin(); it != nibbles.rend(); ++it) s.push_back("0123456789abcdef"[*it]);
  return s;
}

std::vector<std::size_t> mask_to_contributors(const std::string& mask) {
  if (mask.size() < 3 || mask[0] != '0' || (mask[1] != 'x' && mask[1] != 'X')) {
    throw ParseError(0, "contributor mask must be hexadecimal '0x...': '" + mask + "'");
  }
  std::vector<std::size_t> out;
  const std::size_t digits = mask.size() - 2;
  for (std::size_t d = 0; d < digits; ++d) {
    const char c = mask[mask.size() - 1 - d];
    unsigned v;
    if (c >= '0' && c <= '9') v = static_cast<unsigned>(c - '0');
    else if (c >= 'a' && c <= 'f') v = static_cast<unsigned>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v = static_cast<unsigned>(c - 'A' + 10);
    else throw ParseError(0, "bad hex digit in contributor mask '" + mask + "'");
    for (unsigned b = 0; b < 4; ++b) {
      if (v & (1u << b)) out.push_back(d * 4 + b);
    }
  }
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  char buf[128];
  for (const auto& r : trace) {
    out << r.round;
    for (double x : {r.wall_ms, r.sim_ticks, r.primal, r.dual, r.gap}) {
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      out << buf;
    }
    out << ',' << contributors_to_mask(r.contributors) << ',' << r.msgs << '\n';
  }
}

namespace {

// strtod, not stod: subnormal values must round-trip instead of throwing.
double to_real(const std::string& s) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::invalid_argument(s);
  return x;
}

}  // namespace

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw ParseError(1, "missing trace header");
  std::vector<TraceRecord> trace;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() != 8) throw ParseError(line_no, "expected 8 columns");
    TraceRecord r;
    try {
      r.round = std::stoull(cols[0]);
      r.wall_ms = to_real(cols[1]);
      r.sim_ticks = to_real(cols[2]);
      r.primal = to_real(cols[3]);
      r.dual = to_real(cols[4]);
      r.gap = to_real(cols[5]);
      r.contributors = mask_to_contributors(cols[6]);
      r.msgs = std::stoull(cols[7]);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError(line_no, "malformed trace record");
    }
    trace.push_back(std::move(r));
  }
  return trace;
}

}  // namespace hdca
