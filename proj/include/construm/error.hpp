// Copyright 2026 The ConStruM Authors.
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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace construm {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or reply; `where` is a "line N" or field path.
class ParseError : public Error {
 public:
  ParseError(std::string where, const std::string& message)
      : Error(where.empty() ? message : where + ": " + message),
        where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// Catalog contents violate an invariant (duplicates, empty catalog, unknown ids).
class CatalogError : public Error {
 public:
  using Error::Error;
};

class GatewayError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public GatewayError {
 public:
  TimeoutError(const std::string& message, int attempts)
      : GatewayError(message), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

// Scripted backend has no rule for the prompt. Never retried.
class ScriptMissError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class ChoiceError : public Error {
 public:
  enum class Kind { kNoAnswer, kInvalidChoice };
  ChoiceError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Context pack budget cannot hold the minimal pack.
class BudgetError : public Error {
 public:
  BudgetError(std::size_t required, std::size_t budget)
      : Error("budget too small: minimal context pack needs " + std::to_string(required) +
              " characters, budget is " + std::to_string(budget)),
        required_(required) {}
  std::size_t required() const noexcept { return required_; }

 private:
  std::size_t required_;
};

// A query could not be decided; carries the last decision prompt.
class PipelineError : public Error {
 public:
  PipelineError(const std::string& message, std::string prompt_snapshot)
      : Error(message), prompt_snapshot_(std::move(prompt_snapshot)) {}
  const std::string& prompt_snapshot() const noexcept { return prompt_snapshot_; }

 private:
  std::string prompt_snapshot_;
};

}  // namespace construm
