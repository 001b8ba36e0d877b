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
#include <stdexcept>
#include <string>

namespace hdca {

/// Malformed input data. Exit code 3 at the command line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  /// 1-based line number, or 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid solver or partition configuration. Exit code 2.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite objective or step. Exit code 4.
class DivergenceError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Violation of the worker/master message protocol.
class ProtocolError : public std::logic_error {
  using std::logic_error::logic_error;
};

/// Internal numerical failure of a one-dimensional solve.
class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hdca
