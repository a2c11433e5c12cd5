// Copyright 2026 The trasr Authors.
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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace trasr {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidMaskError : public Error {
 public:
  using Error::Error;
};

class NotBackpropagatedError : public Error {
 public:
  explicit NotBackpropagatedError(const std::string& name)
      : Error("parameter '" + name + "' has no gradient; run backward first"),
        parameter_(name) {}
  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

class SequenceTooShortError : public Error {
 public:
  using Error::Error;
};

class InfeasibleAlignmentError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class GradCheckError : public Error {
 public:
  GradCheckError(const std::string& what, std::int64_t index)
      : Error(what + " at coordinate " + std::to_string(index)), index_(index) {}
  std::int64_t index() const { return index_; }

 private:
  std::int64_t index_;
};

// Malformed file content. `offset` is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, std::uint64_t offset, const std::string& what)
      : Error(path + ": " + what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ArchitectureMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace trasr
