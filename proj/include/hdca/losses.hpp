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

// Loss functions, their conjugates, and the exact single-coordinate
// maximizer used by every local solver.
//
// Conventions: P(w) = (1/n) sum phi(x_i.w; y_i) + (lambda/2)|w|^2 and
// D(a) = -(1/n) sum phi*(-a_i) - (lambda/2)|(1/(lambda n)) X a|^2, i.e. the
// regularizer pair g = g* = |.|^2/2 with grad g* the identity, so that
// w(a) = (1/(lambda n)) X a.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hdca/data.hpp"

namespace hdca {

enum class LossKind { kHinge, kSquaredHinge, kLogistic };

struct LossInfo {
  LossKind kind;
  bool smooth;                      // phi is (1/mu)-smooth
  double mu;                        // valid when smooth
  std::optional<double> lipschitz;  // L when phi is L-Lipschitz
};

LossInfo loss_info(LossKind kind);
std::string_view loss_name(LossKind kind);
/// Accepts "hinge", "squared-hinge", "logistic"; throws ConfigError.
LossKind parse_loss(std::string_view name);

/// True for the losses that require labels in {-1, +1}.
bool is_binary(LossKind kind);

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// phi(z; y).
double primal_loss(LossKind kind, double z, double y);

/// Tolerance on the dual domain bounds, see conjugate().
inline constexpr double kDomainSlack = 1e-12;

/// phi*(-a) for dual value a, or +infinity outside the domain (widened by
/// kDomainSlack).
double conjugate(LossKind kind, double a, double y);

/// Arguments of the one-dimensional subproblem for coordinate i.
struct StepContext {
  double lambda = 0.0;
  std::size_t n = 0;      // global number of points
  double sigma = 1.0;
  double conj_n = 0.0;    // divisor of the conjugate term; 0 means use n
  const SparsePoint* point = nullptr;
  double v_dot_x = 0.0;   // <v, x_i> read from the shared primal
  double alpha_i = 0.0;   // alpha_i + delta_i
};

/// Value of the one-dimensional objective at step eps (constant terms
/// dropped):  -phi*(-(alpha_i+eps))/n' - (v.x_i) eps/n - sigma |x_i|^2 eps^2/(2 lambda n^2).
double step_objective(LossKind kind, const StepContext& ctx, double eps);

/// argmax over eps of step_objective. Hinge and squared hinge are closed
/// form; logistic uses safeguarded Newton with a bisection fallback.
double coordinate_step(LossKind kind, const StepContext& ctx);

/// g*(v) = |v|^2 / 2.
double gstar(std::span<const double> v);
/// grad g*(v) = v.
std::vector<double> grad_gstar(std::span<const double> v);

}  // namespace hdca
