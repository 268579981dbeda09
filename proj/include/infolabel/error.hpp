// Copyright 2026 The infolabel Authors
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

namespace infolabel {

// Error taxonomy shared by every module. The CLI maps kinds to exit codes.
enum class ErrorKind {
  kConfig,        // bad configuration, missing profile column, bad flags
  kData,          // malformed input files, precondition violations on data
  kBackend,       // scoring backend unreachable after retries
  kProtocol,      // backend answered with a malformed payload
  kPrecondition,  // caller violated an operation precondition
  kDomain,        // argument outside the mathematical domain of an operation
  kUndefined,     // quantity undefined for the inputs (empty set, zero denominator)
  kResource,      // external resource failure (missing fixture, spawn failure)
  kInternal,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace infolabel
