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

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace infolabel {

// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);

// Seed for a named sub-stream (e.g. one problem id) of a global seed.
// Independent of the order in which sub-streams are requested.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Deterministic generator. Only raw mt19937_64 output is used, so draws are
// identical across standard libraries (std distributions are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, n). n must be >= 1.
  std::uint64_t below(std::uint64_t n);
  // Uniform real in [0, 1).
  double uniform();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::string trim(std::string_view text);
std::string collapse_whitespace(std::string_view text);
std::string to_lower(std::string_view text);
bool contains(std::string_view haystack, std::string_view needle);

std::string read_file(const std::filesystem::path& path);
// Writes through a sibling temp file and renames, so readers never see a
// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Non-empty lines of a JSONL file, with their 1-based line numbers.
struct JsonlLine {
  std::size_t line_no;
  std::string text;
};
std::vector<JsonlLine> read_jsonl_lines(const std::filesystem::path& path);

// Runs fn(i) for i in [0, n) on at most `limit` threads. Each index runs
// exactly once; the first exception thrown is rethrown after all workers
// stop picking up new work.
void parallel_for(std::size_t n, std::size_t limit,
                  const std::function<void(std::size_t)>& fn);

}  // namespace infolabel
