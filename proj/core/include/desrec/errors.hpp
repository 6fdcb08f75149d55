/*
 * Copyright (c) 2026, The desrec Authors.
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

#include <stdexcept>
#include <string>

namespace desrec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between vectors, matrices or parameter blocks.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A collective was called out of protocol: wrong shape, missing or duplicate
// contribution, stale epoch.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A rendezvous did not complete before the group timeout.
class DeadlockError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

// A key was presented to a shard that does not own it.
class PlacementError : public Error {
 public:
  using Error::Error;
};

// State that must agree does not: unknown key on update, replica divergence.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace desrec
