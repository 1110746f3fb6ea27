// Copyright 2026 The irec Authors. All Rights Reserved.
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

#include <stdexcept>
#include <string>

namespace irec {

// Every failure the library reports derives from Error. The CLI maps the
// concrete type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a precondition (dimension mismatch, exhausted chain, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Hyperparameters that cannot be realised (index width or memory budget).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// NaN / all-zero weights and similar arithmetic dead ends.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad magic, unknown version, invalid header fields.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Truncated payloads, nonzero padding, out-of-range indices or symbols.
class CorruptStreamError : public Error {
 public:
  using Error::Error;
};

// Container was produced with a different model file.
class ModelMismatchError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace irec
