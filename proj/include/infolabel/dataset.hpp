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

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "infolabel/error.hpp"
#include "infolabel/infogain.hpp"
#include "infolabel/trace.hpp"

namespace infolabel {

// Reserved symbols; trainers map them to unused vocabulary ids.
inline constexpr std::string_view kRequestMarker = "<|s_req|>";
inline constexpr std::string_view kPositiveMarker = "<|s_pos|>";
inline constexpr std::string_view kNegativeMarker = "<|s_neg|>";

enum class Target { kPos, kNeg };

struct Segment {
  std::string text;
  bool is_target = false;

  bool operator==(const Segment&) const = default;
};

// [q, r_1, <|s_req|>, r_2, <|s_req|>, ..., r_N, <|s_req|>] with one target
// per marker.
struct PRMRecord {
  std::string problem_id;
  std::string trace_id;
  std::vector<Segment> segments;
  std::vector<Target> targets;
  // Unknown top-level fields seen on parse, re-emitted after the known ones.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const PRMRecord&) const = default;
};

// Same layout with a single trailing marker.
struct ORMRecord {
  std::string problem_id;
  std::string trace_id;
  std::vector<Segment> segments;
  Target target = Target::kNeg;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const ORMRecord&) const = default;
};

using DatasetRecord = std::variant<PRMRecord, ORMRecord>;

// Reason code when a trace cannot be emitted because its question or steps
// contain a reserved symbol.
std::optional<std::string> reserved_symbol_violation(const Problem& problem,
                                                     const ReasoningTrace& trace);

// Throws Error(kData) on a label/step count mismatch or a reserved symbol.
PRMRecord emit_prm_record(const Problem& problem, const ReasoningTrace& trace,
                          const StepLabels& labels);
// Throws Error(kPrecondition) for traces that were never validated.
ORMRecord emit_orm_record(const Problem& problem, const ReasoningTrace& trace);

// One JSONL line, without the trailing newline.
std::string serialize(const PRMRecord& record);
std::string serialize(const ORMRecord& record);

class RecordParseError : public Error {
 public:
  RecordParseError(std::size_t line, std::size_t offset, const std::string& what)
      : Error(ErrorKind::kData, "line " + std::to_string(line) + ", offset " +
                                    std::to_string(offset) + ": " + what),
        line_(line),
        offset_(offset) {}

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

// Accepts either record kind ("targets" array vs single "target").
DatasetRecord parse_record(std::string_view line, std::size_t line_no = 1);

struct LabelBalance {
  std::size_t positive = 0;
  std::size_t negative = 0;
};
LabelBalance label_balance(std::span<const PRMRecord> records);

// Writes {split}-{shard:05}.jsonl files of at most records_per_shard lines.
class ShardWriter {
 public:
  ShardWriter(std::filesystem::path dir, std::string split,
              std::size_t records_per_shard);
  ~ShardWriter();

  void write(std::string_view line);
  void close();
  const std::vector<std::filesystem::path>& files() const { return files_; }

  static std::string shard_name(std::string_view split, std::size_t shard);

 private:
  void open_next();

  std::filesystem::path dir_;
  std::string split_;
  std::size_t per_shard_;
  std::size_t in_current_ = 0;
  std::ofstream out_;
  std::vector<std::filesystem::path> files_;
};

}  // namespace infolabel
