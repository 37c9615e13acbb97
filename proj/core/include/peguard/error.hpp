// Copyright 2026 The peguard Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace peguard {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// PE parsing
class MalformedPe : public Error {
 public:
  using Error::Error;
};
class LayoutConflict : public Error {
 public:
  using Error::Error;
};

// skip-gram extraction
class InputTooLarge : public Error {
 public:
  using Error::Error;
};

// tree models
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class CorruptModel : public Error {
 public:
  using Error::Error;
};
class DegenerateData : public Error {
 public:
  using Error::Error;
};

// rules
class RuleSyntaxError : public Error {
 public:
  RuleSyntaxError(const std::string& msg, int line)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// query history
class EmptyInput : public Error {
 public:
  using Error::Error;
};

// pipeline
class EmptySet : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};

// attacks
class NotApplicable : public Error {
 public:
  using Error::Error;
};
class SizeExceeded : public Error {
 public:
  using Error::Error;
};
class NoStrings : public Error {
 public:
  using Error::Error;
};

}  // namespace peguard
