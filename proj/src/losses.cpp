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

#include "hdca/losses.hpp"

#include <algorithm>
#include <cmath>

#include "hdca/errors.hpp"

namespace hdca {
namespace {

constexpr double kLogisticLo = 1e-12;
constexpr double kLogisticHi = 1.0 - 1e-12;
constexpr double kNewtonTol = 1e-10;
constexpr int kNewtonMaxIter = 100;

double xlogx(double u) { return u > 0.0 ? u * std::log(u) : 0.0; }

struct StepTerms {
  double y;
  double u0;     // y * alpha_i
  double inv_conj_n;
  double lin;    // coefficient of u in the linear term: y * v.x / n
  double curv;   // sigma |x|^2 / (lambda n^2)
};

StepTerms terms(const StepContext& ctx) {
  const double n = static_cast<double>(ctx.n);
  const double conj_n = ctx.conj_n > 0.0 ? ctx.conj_n : n;
  const double y = ctx.point->label;
  const double q = ctx.point->squared_norm;
  return {y, y * ctx.alpha_i, 1.0 / conj_n, y * ctx.v_dot_x / n,
          ctx.sigma * q / (ctx.lambda * n * n)};
}

// Logistic optimality condition in u = y (alpha + eps):
//   h(u) = -logit(u)/n' - lin - curv (u - u0) = 0, h strictly decreasing.
double logistic_solve(const StepTerms& t) {
  auto h = [&](double u) { return -std::log(u / (1.0 - u)) * t.inv_conj_n - t.lin - t.curv * (u - t.u0); };
  auto dh = [&](double u) { return -t.inv_conj_n / (u * (1.0 - u)) - t.curv; };

  double lo = kLogisticLo, hi = kLogisticHi;
  const double h_lo = h(lo), h_hi = h(hi);
  if (!std::isfinite(h_lo) || !std::isfinite(h_hi)) {
    throw SolverError("logistic step: non-finite derivative at the domain bounds");
  }
  if (h_lo <= 0.0) return lo;
  if (h_hi >= 0.0) return hi;

  double u = std::clamp(t.u0, lo, hi);
  if (u <= lo || u >= hi) u = 0.5;
  for (int it = 0; it < kNewtonMaxIter; ++it) {
    const double hu = h(u);
    if (hu == 0.0) return u;
    if (hu > 0.0) lo = u; else hi = u;
    double next = u - hu / dh(u);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) < kNewtonTol * std::max(1e-3, u)) return next;
    u = next;
  }
  // Newton stalled; finish by bisection on the maintained bracket.
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

LossInfo loss_info(LossKind kind) {
  switch (kind) {
    case LossKind::kHinge: return {kind, false, 0.0, 1.0};
    case LossKind::kSquaredHinge: return {kind, true, 0.5, std::nullopt};
    case LossKind::kLogistic: return {kind, true, 4.0, 1.0};
  }
  return {kind, false, 0.0, std::nullopt};
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kHinge: return "hinge";
    case LossKind::kSquaredHinge: return "squared-hinge";
    case LossKind::kLogistic: return "logistic";
  }
  return "?";
}

LossKind parse_loss(std::string_view name) {
  if (name == "hinge") return LossKind::kHinge;
  if (name == "squared-hinge") return LossKind::kSquaredHinge;
  if (name == "logistic") return LossKind::kLogistic;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

bool is_binary(LossKind) { return true; }

double primal_loss(LossKind kind, double z, double y) {
  const double m = y * z;
  switch (kind) {
    case LossKind::kHinge: return std::max(0.0, 1.0 - m);
    case LossKind::kSquaredHinge: {
      const double s = std::max(0.0, 1.0 - m);
      return s * s;
    }
    case LossKind::kLogistic:
      // log(1 + exp(-m)) without overflow
      return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  return kInfinity;
}

double conjugate(LossKind kind, double a, double y) {
  // Dual values assembled as alpha + delta can sit a few ulps past a bound;
  // within kDomainSlack they are read as the bound itself.
  const double u = a * y;
  if (u < -kDomainSlack) return kInfinity;
  switch (kind) {
    case LossKind::kHinge:
      if (u > 1.0 + kDomainSlack) return kInfinity;
      return -std::clamp(u, 0.0, 1.0);
    case LossKind::kSquaredHinge: {
      const double b = std::max(u, 0.0);
      return -b + 0.25 * b * b;
    }
    case LossKind::kLogistic: {
      if (u > 1.0 + kDomainSlack) return kInfinity;
      const double b = std::clamp(u, 0.0, 1.0);
      return xlogx(b) + xlogx(1.0 - b);
    }
  }
  return kInfinity;
}

double step_objective(LossKind kind, const StepContext& ctx, double eps) {
  const double n = static_cast<double>(ctx.n);
  const double conj_n = ctx.conj_n > 0.0 ? ctx.conj_n : n;
  const double c = conjugate(kind, ctx.alpha_i + eps, ctx.point->label);
  if (!std::isfinite(c)) return -kInfinity;
  return -c / conj_n - ctx.v_dot_x * eps / n -
         ctx.sigma * ctx.point->squared_norm * eps * eps / (2.0 * ctx.lambda * n * n);
}

double coordinate_step(LossKind kind, const StepContext& ctx) {
  if (ctx.point == nullptr || !(ctx.point->squared_norm > 0.0)) {
    throw SolverError("coordinate step on a point with zero norm");
  }
  const StepTerms t = terms(ctx);
  double u = 0.0;
  switch (kind) {
    case LossKind::kHinge:
      // maximize u/n' - lin u - curv/2 (u - u0)^2 over [0, 1]
      u = std::clamp(t.u0 + (t.inv_conj_n - t.lin) / t.curv, 0.0, 1.0);
      break;
    case LossKind::kSquaredHinge:
      // maximize (u - u^2/4)/n' - lin u - curv/2 (u - u0)^2 over u >= 0
      u = std::max(0.0, (t.inv_conj_n - t.lin + t.curv * t.u0) / (0.5 * t.inv_conj_n + t.curv));
      break;
    case LossKind::kLogistic:
      u = logistic_solve(t);
      break;
  }
  // The optimum may coincide with the current value; return an exact zero
  // so fixed points stay fixed.
  const double eps = t.y * u - ctx.alpha_i;
  return u == t.u0 ? 0.0 : eps;
}

double gstar(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return 0.5 * s;
}

std::vector<double> grad_gstar(std::span<const double> v) { return {v.begin(), v.end()}; }

}  // namespace hdca
