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

#include <string>
#include <string_view>

namespace infolabel {

enum class Domain { kMath, kPython, kSql, kQa, kOther };

const char* to_string(Domain domain);
// Throws Error(kData) for unknown names.
Domain parse_domain(std::string_view name);

// Answers in these domains are wrapped in $...$; the rest in ``` fences.
inline bool uses_dollar_wrapper(Domain domain) {
  return domain == Domain::kMath || domain == Domain::kQa ||
         domain == Domain::kOther;
}

}  // namespace infolabel
