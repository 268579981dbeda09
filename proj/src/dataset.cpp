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


#include "infolabel/dataset.hpp"

#include <cstdio>

#include "infolabel/util.hpp"

namespace infolabel {

namespace {

using ojson = nlohmann::ordered_json;

bool has_reserved(std::string_view text) {
  return contains(text, kRequestMarker) || contains(text, kPositiveMarker) ||
         contains(text, kNegativeMarker);
}

const char* target_name(Target t) { return t == Target::kPos ? "POS" : "NEG"; }

std::vector<Segment> trace_segments(const Problem& problem,
                                    const ReasoningTrace& trace, bool per_step) {
  std::vector<Segment> segments;
  segments.push_back({problem.question, false});
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    segments.push_back({trace.steps[i], false});
    if (per_step || i + 1 == trace.steps.size()) {
      segments.push_back({std::string(kRequestMarker), true});
    }
  }
  return segments;
}

ojson segments_json(const std::vector<Segment>& segments) {
  ojson arr = ojson::array();
  for (const Segment& s : segments) {
    ojson o = ojson::object();
    o["text"] = s.text;
    o["is_target"] = s.is_target;
    arr.push_back(std::move(o));
  }
  return arr;
}

void append_extra(ojson& j, const ojson& extra) {
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
}

Target parse_target(const ojson& v, std::size_t line_no) {
  const std::string s = v.get<std::string>();
  if (s == "POS") return Target::kPos;
  if (s == "NEG") return Target::kNeg;
  throw RecordParseError(line_no, 0, "unknown target '" + s + "'");
}

}  // namespace

std::optional<std::string> reserved_symbol_violation(const Problem& problem,
                                                     const ReasoningTrace& trace) {
  if (has_reserved(problem.question)) return "reserved_symbol_in_question";
  for (const std::string& step : trace.steps) {
    if (has_reserved(step)) return "reserved_symbol_in_step";
  }
  return std::nullopt;
}

PRMRecord emit_prm_record(const Problem& problem, const ReasoningTrace& trace,
                          const StepLabels& labels) {
  if (labels.labels.size() != trace.steps.size()) {
    throw Error(ErrorKind::kData, "trace " + trace.trace_id + " has " +
                                      std::to_string(trace.steps.size()) +
                                      " steps but " +
                                      std::to_string(labels.labels.size()) + " labels");
  }
  if (auto reason = reserved_symbol_violation(problem, trace)) {
    throw Error(ErrorKind::kData, *reason + ": trace " + trace.trace_id);
  }
  PRMRecord r;
  r.problem_id = problem.id;
  r.trace_id = trace.trace_id;
  r.segments = trace_segments(problem, trace, true);
  for (int l : labels.labels) r.targets.push_back(l == 1 ? Target::kPos : Target::kNeg);
  return r;
}

ORMRecord emit_orm_record(const Problem& problem, const ReasoningTrace& trace) {
  if (!trace.parse_ok || !trace.correct.has_value()) {
    throw Error(ErrorKind::kPrecondition,
                "trace " + trace.trace_id + " has no validator outcome");
  }
  if (auto reason = reserved_symbol_violation(problem, trace)) {
    throw Error(ErrorKind::kData, *reason + ": trace " + trace.trace_id);
  }
  ORMRecord r;
  r.problem_id = problem.id;
  r.trace_id = trace.trace_id;
  r.segments = trace_segments(problem, trace, false);
  r.target = *trace.correct ? Target::kPos : Target::kNeg;
  return r;
}

std::string serialize(const PRMRecord& record) {
  ojson j = ojson::object();
  j["problem_id"] = record.problem_id;
  j["trace_id"] = record.trace_id;
  j["segments"] = segments_json(record.segments);
  ojson targets = ojson::array();
  for (Target t : record.targets) targets.push_back(target_name(t));
  j["targets"] = std::move(targets);
  append_extra(j, record.extra);
  return j.dump();
}

std::string serialize(const ORMRecord& record) {
  ojson j = ojson::object();
  j["problem_id"] = record.problem_id;
  j["trace_id"] = record.trace_id;
  j["segments"] = segments_json(record.segments);
  j["target"] = target_name(record.target);
  append_extra(j, record.extra);
  return j.dump();
}

DatasetRecord parse_record(std::string_view line, std::size_t line_no) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw RecordParseError(line_no, e.byte, e.what());
  }
  if (!j.is_object()) throw RecordParseError(line_no, 0, "record is not an object");
  try {
    std::vector<Segment> segments;
    for (const auto& s : j.at("segments")) {
      segments.push_back({s.at("text").get<std::string>(), s.at("is_target").get<bool>()});
    }
    std::size_t markers = 0;
    for (const Segment& s : segments) {
      if (!s.is_target) continue;
      ++markers;
      if (s.text != kRequestMarker) {
        throw RecordParseError(line_no, 0, "target segment is not the request marker");
      }
    }
    if (segments.empty() || segments.front().is_target) {
      throw RecordParseError(line_no, 0, "first segment must be the question");
    }
    ojson extra = ojson::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "problem_id" || k == "trace_id" || k == "segments" ||
          k == "targets" || k == "target") {
        continue;
      }
      extra[k] = it.value();
    }
    if (j.contains("targets")) {
      PRMRecord r;
      r.problem_id = j.at("problem_id").get<std::string>();
      r.trace_id = j.at("trace_id").get<std::string>();
      r.segments = std::move(segments);
      for (const auto& t : j.at("targets")) r.targets.push_back(parse_target(t, line_no));
      if (r.targets.size() != markers) {
        throw RecordParseError(line_no, 0, "target count does not match markers");
      }
      r.extra = std::move(extra);
      return r;
    }
    ORMRecord r;
    r.problem_id = j.at("problem_id").get<std::string>();
    r.trace_id = j.at("trace_id").get<std::string>();
    r.segments = std::move(segments);
    r.target = parse_target(j.at("target"), line_no);
    if (markers != 1 || !r.segments.back().is_target) {
      throw RecordParseError(line_no, 0, "ORM record needs exactly one trailing marker");
    }
    r.extra = std::move(extra);
    return r;
  } catch (const ojson::exception& e) {
    throw RecordParseError(line_no, 0, e.what());
  }
}

LabelBalance label_balance(std::span<const PRMRecord> records) {
  LabelBalance b;
  for (const PRMRecord& r : records) {
    for (Target t : r.targets) (t == Target::kPos ? b.positive : b.negative)++;
  }
  return b;
}

ShardWriter::ShardWriter(std::filesystem::path dir, std::string split,
                         std::size_t records_per_shard)
    : dir_(std::move(dir)),
      split_(std::move(split)),
      per_shard_(std::max<std::size_t>(records_per_shard, 1)) {
  std::filesystem::create_directories(dir_);
}

ShardWriter::~ShardWriter() { close(); }

std::string ShardWriter::shard_name(std::string_view split, std::size_t shard) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%05zu.jsonl", shard);
  return std::string(split) + buf;
}

void ShardWriter::open_next() {
  close();
  files_.push_back(dir_ / shard_name(split_, files_.size()));
  out_.open(files_.back(), std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorKind::kData, "cannot write " + files_.back().string());
  in_current_ = 0;
}

void ShardWriter::write(std::string_view line) {
  if (!out_.is_open() || in_current_ >= per_shard_) open_next();
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.put('\n');
  ++in_current_;
}

void ShardWriter::close() {
  if (out_.is_open()) out_.close();
}

}  // namespace infolabel
