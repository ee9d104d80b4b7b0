// Copyright 2026 The BCS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BCS_ERROR_HPP_
#define BCS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace bcs {

// Base of every error the library throws. The CLI maps subclasses to exit
// codes: validation-type errors exit 1, configuration errors exit 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (listing lines, JSON, TSV).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Input that parses but violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad options, unknown architecture, invalid ratios, unreadable config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyDatasetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Tensor shape incompatibility; names the op and the offending shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values detected while debug checks are enabled.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Logs a non-fatal diagnostic to stderr. Shared by every module so tests can
// silence it.
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace bcs

#endif  // BCS_ERROR_HPP_
