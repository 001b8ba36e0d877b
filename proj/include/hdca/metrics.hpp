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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdca/data.hpp"
#include "hdca/losses.hpp"

namespace hdca {

/// w(alpha) = (1/(lambda n)) X alpha.
std::vector<double> primal_from_dual(const Dataset& ds, std::span<const double> alpha, double lambda);

/// P(w) = (1/n) sum phi(x_i.w; y_i) + (lambda/2) |w|^2.
double primal_objective(const Dataset& ds, std::span<const double> w, double lambda, LossKind loss);

/// D(alpha) = -(1/n) sum phi*(-alpha_i) - (lambda/2) |w(alpha)|^2, or
/// -infinity when some alpha_i is outside the conjugate's domain.
double dual_objective(const Dataset& ds, std::span<const double> alpha, double lambda, LossKind loss);

/// Index of the first alpha_i outside the conjugate's domain.
std::optional<std::size_t> first_infeasible(const Dataset& ds, std::span<const double> alpha, LossKind loss);

/// P(v) - D(alpha).
double duality_gap(const Dataset& ds, std::span<const double> v, std::span<const double> alpha,
                   double lambda, LossKind loss);

struct TraceRecord {
  std::uint64_t round = 0;
  double wall_ms = 0.0;
  double sim_ticks = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  std::vector<std::size_t> contributors;  // sorted worker ids
  std::size_t msgs = 0;

  bool operator==(const TraceRecord&) const = default;
};

inline constexpr const char* kTraceHeader = "round,wall_ms,sim_ticks,primal,dual,gap,contributors,msgs";

/// Contributor set as a hexadecimal bitmask, "0x..." (bit k = worker k).
std::string contributors_to_mask(const std::vector<std::size_t>& workers);
std::vector<std::size_t> mask_to_contributors(const std::string& mask);

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& in);

}  // namespace hdca
