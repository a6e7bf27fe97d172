// Copyright 2026 The stvqa Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STVQA_ERRORS_HPP_
#define STVQA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace stvqa {

// Tensor shapes disagree with parameter or operand shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition that callers are responsible for was not met.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Dataset files are missing or inconsistent.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed annotation line. `line()` is 1-based.
class ParseError : public LoadError {
 public:
  ParseError(int line, const std::string& what)
      : LoadError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Binary container failed magic/version/checksum/length checks.
class CorruptFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad `key = value` configuration text.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace stvqa

#endif  // STVQA_ERRORS_HPP_
