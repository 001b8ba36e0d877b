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

#include "hdca/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string_view>

#include "hdca/errors.hpp"
#include "hdca/rng.hpp"

namespace hdca {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

std::string_view next_token(std::string_view& rest) {
  std::size_t b = 0;
  while (b < rest.size() && is_space(rest[b])) ++b;
  std::size_t e = b;
  while (e < rest.size() && !is_space(rest[e])) ++e;
  std::string_view tok = rest.substr(b, e - b);
  rest.remove_prefix(e);
  return tok;
}

bool parse_real(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(out);
}

bool parse_index(std::string_view s, std::uint64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

class LineParser {
 public:
  void feed(std::string_view line) {
    ++line_no_;
    std::string_view rest = line;
    std::string_view tok = next_token(rest);
    if (tok.empty() || tok.front() == '#') return;

    SparsePoint pt;
    if (!parse_real(tok, pt.label)) {
      throw ParseError(line_no_, "malformed label '" + std::string(tok) + "'");
    }
    std::int64_t prev = -1;
    for (tok = next_token(rest); !tok.empty(); tok = next_token(rest)) {
      if (tok.front() == '#') break;
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no_, "malformed token '" + std::string(tok) + "' (expected idx:val)");
      }
      std::uint64_t file_idx = 0;
      double val = 0.0;
      if (!parse_index(tok.substr(0, colon), file_idx) || !parse_real(tok.substr(colon + 1), val)) {
        throw ParseError(line_no_, "malformed token '" + std::string(tok) + "'");
      }
      if (file_idx == 0) throw ParseError(line_no_, "feature indices are 1-based; got 0");
      if (file_idx > std::uint64_t{0xffffffffu}) throw ParseError(line_no_, "feature index too large");
      const auto idx = static_cast<std::int64_t>(file_idx - 1);
      if (idx == prev) {
        throw ParseError(line_no_, "duplicate feature index " + std::to_string(file_idx));
      }
      if (idx < prev) {
        throw ParseError(line_no_, "feature indices must be increasing (" + std::to_string(file_idx) +
                                       " after " + std::to_string(prev + 1) + ")");
      }
      prev = idx;
      max_index_ = std::max<std::int64_t>(max_index_, idx);
      if (val == 0.0) continue;
      pt.indices.push_back(static_cast<std::uint32_t>(idx));
      pt.values.push_back(val);
      pt.squared_norm += val * val;
    }
    ds_.nnz += pt.indices.size();
    ds_.points.push_back(std::move(pt));
  }

  Dataset finish(std::optional<std::size_t> dim_override) {
    if (ds_.points.empty()) throw ParseError(0, "empty file: no data points");
    const std::size_t inferred = static_cast<std::size_t>(max_index_ + 1);
    ds_.dim = inferred;
    if (dim_override) {
      if (*dim_override < inferred) {
        throw ParseError(0, "dimension override " + std::to_string(*dim_override) +
                                " is smaller than the inferred dimension " + std::to_string(inferred));
      }
      ds_.dim = *dim_override;
    }
    return std::move(ds_);
  }

 private:
  Dataset ds_;
  std::size_t line_no_ = 0;
  std::int64_t max_index_ = -1;
};

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim_override) {
  LineParser parser;
  std::string line;
  while (std::getline(in, line)) parser.feed(line);
  return parser.finish(dim_override);
}

Dataset parse_libsvm_string(const std::string& text, std::optional<std::size_t> dim_override) {
  std::istringstream in(text);
  return parse_libsvm(in, dim_override);
}

Dataset load_libsvm(const std::string& path, std::optional<std::size_t> dim_override) {
  const bool gz = path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  if (!gz) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot open '" + path + "'");
    return parse_libsvm(in, dim_override);
  }

  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw ParseError(0, "cannot open '" + path + "'");
  gzbuffer(f, 1 << 20);
  LineParser parser;
  std::string line;
  std::vector<char> buf(1 << 16);
  try {
    for (;;) {
      const int got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
      if (got < 0) {
        int errnum = 0;
        throw ParseError(0, std::string("gzip read error: ") + gzerror(f, &errnum));
      }
      if (got == 0) break;
      std::string_view chunk(buf.data(), static_cast<std::size_t>(got));
      for (std::size_t nl; (nl = chunk.find('\n')) != std::string_view::npos;) {
        line.append(chunk.substr(0, nl));
        parser.feed(line);
        line.clear();
        chunk.remove_prefix(nl + 1);
      }
      line.append(chunk);
    }
    if (!line.empty()) parser.feed(line);
  } catch (...) {
    gzclose(f);
    throw;
  }
  gzclose(f);
  return parser.finish(dim_override);
}

void write_libsvm(std::ostream& out, const Dataset& ds) {
  char buf[64];
  for (const auto& p : ds.points) {
    std::snprintf(buf, sizeof buf, "%.17g", p.label);
    out << buf;
    for (std::size_t j = 0; j < p.indices.size(); ++j) {
      std::snprintf(buf, sizeof buf, " %u:%.17g", p.indices[j] + 1, p.values[j]);
      out << buf;
    }
    out << '\n';
  }
}

void validate(const Dataset& ds) {
  if (ds.points.empty()) throw ParseError(0, "dataset has no points");
  std::size_t nnz = 0;
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    const auto& p = ds.points[i];
    const std::string where = "point " + std::to_string(i) + ": ";
    if (p.indices.size() != p.values.size()) throw ParseError(0, where + "index/value length mismatch");
    double sq = 0.0;
    for (std::size_t j = 0; j < p.indices.size(); ++j) {
      if (j > 0 && p.indices[j] <= p.indices[j - 1]) throw ParseError(0, where + "indices not increasing");
      if (p.indices[j] >= ds.dim) throw ParseError(0, where + "index out of range");
      if (p.values[j] == 0.0) throw ParseError(0, where + "stored zero");
      sq += p.values[j] * p.values[j];
    }
    if (std::abs(sq - p.squared_norm) > 1e-12 * std::max(1.0, sq)) {
      throw ParseError(0, where + "stale squared norm");
    }
    nnz += p.indices.size();
  }
  if (nnz != ds.nnz) throw ParseError(0, "nnz does not match stored entries");
}

std::vector<std::size_t> Partition::node_members(std::size_t k) const {
  std::vector<std::size_t> out;
  out.reserve(sizes.at(k));
  for (const auto& core : members.at(k)) out.insert(out.end(), core.begin(), core.end());
  return out;
}

Partition partition(const Dataset& ds, std::size_t num_nodes, std::size_t cores_per_node,
                    std::uint64_t seed) {
  const std::size_t n = ds.n();
  if (num_nodes == 0 || cores_per_node == 0) throw ConfigError("partition: K and R must be >= 1");
  if (num_nodes * cores_per_node > n) {
    throw ConfigError("partition: K*R = " + std::to_string(num_nodes * cores_per_node) +
                      " exceeds n = " + std::to_string(n) + "; some core would own no points");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix64(seed));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);

  Partition part;
  part.num_nodes = num_nodes;
  part.cores_per_node = cores_per_node;
  part.node_of.assign(n, 0);
  part.core_of.assign(n, 0);
  part.sizes.assign(num_nodes, 0);
  part.members.assign(num_nodes, std::vector<std::vector<std::size_t>>(cores_per_node));
  for (std::size_t pos = 0; pos < n; ++pos) {
    const std::size_t i = order[pos];
    const std::size_t k = pos % num_nodes;
    const std::size_t r = part.sizes[k] % cores_per_node;
    part.node_of[i] = static_cast<std::uint32_t>(k);
    part.core_of[i] = static_cast<std::uint32_t>(r);
    part.members[k][r].push_back(i);
    ++part.sizes[k];
  }
  return part;
}

}  // namespace hdca
