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

namespace hdca {

/// One data point x_i with its label. Indices are 0-based and strictly
/// increasing; explicit zeros are never stored.
struct SparsePoint {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  double label = 0.0;
  double squared_norm = 0.0;

  std::size_t nnz() const noexcept { return indices.size(); }

  template <class Vec>
  double dot(const Vec& v) const {
    double s = 0.0;
    for (std::size_t j = 0; j < indices.size(); ++j) s += v[indices[j]] * values[j];
    return s;
  }
};

/// Column-sparse design matrix: points[i] is column i of X.
struct Dataset {
  std::vector<SparsePoint> points;
  std::size_t dim = 0;
  std::size_t nnz = 0;

  std::size_t n() const noexcept { return points.size(); }
};

/// Parse LIBSVM text ("label idx:val ..." with 1-based indices).
/// `dim_override` forces d (must be >= the inferred dimension).
Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim_override = {});
Dataset parse_libsvm_string(const std::string& text, std::optional<std::size_t> dim_override = {});

/// Load from a file; names ending in ".gz" are decompressed on the fly.
Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dim_override = {});

/// Canonical writer: 17 significant digits, so parse(write(ds)) == ds.
void write_libsvm(std::ostream& out, const Dataset& ds);

/// Check every SparsePoint and Dataset invariant; throws ParseError.
void validate(const Dataset& ds);

/// Assignment of points to K nodes and R cores per node.
struct Partition {
  std::size_t num_nodes = 0;
  std::size_t cores_per_node = 0;
  std::vector<std::uint32_t> node_of;  // point -> k
  std::vector<std::uint32_t> core_of;  // point -> r
  std::vector<std::size_t> sizes;      // n_k
  /// members[k][r] lists I_{k,r} in dealing order.
  std::vector<std::vector<std::vector<std::size_t>>> members;

  /// I_k, the concatenation of its cores' subsets, in dealing order.
  std::vector<std::size_t> node_members(std::size_t k) const;
};

/// Seeded shuffle followed by round-robin dealing to nodes, then to cores
/// inside each node. Requires K*R <= n.
Partition partition(const Dataset& ds, std::size_t num_nodes, std::size_t cores_per_node,
                    std::uint64_t seed);

}  // namespace hdca
