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


#include "infolabel/validators.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sqlite3.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <numeric>
#include <thread>

#include "infolabel/error.hpp"
#include "infolabel/trace.hpp"
#include "infolabel/util.hpp"

namespace infolabel {

namespace fs = std::filesystem;

const char* ValidatorSpec::kind_name() const {
  switch (payload.index()) {
    case 0: return "numeric_equivalence";
    case 1: return "sql_execution";
    case 2: return "external_command";
    case 3: return "normalized_exact";
  }
  return "unknown";
}

ValidatorSpec default_validator_for(Domain domain) {
  switch (domain) {
    case Domain::kMath: return {NumericEquivalence{}};
    case Domain::kQa:
    case Domain::kOther: return {NormalizedExact{}};
    case Domain::kPython:
    case Domain::kSql: break;
  }
  throw Error(ErrorKind::kConfig, std::string("domain ") + to_string(domain) +
                                      " requires an explicit validator");
}

ValidatorSpec validator_spec_from_json(const nlohmann::json& j,
                                       const fs::path& base_dir) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "numeric_equivalence") {
      NumericEquivalence p;
      p.gold = j.value("gold", std::string{});
      p.rel_tol = j.value("rel_tol", 1e-9);
      if (p.rel_tol < 0) throw Error(ErrorKind::kConfig, "rel_tol must be >= 0");
      return {p};
    }
    if (kind == "normalized_exact") {
      return {NormalizedExact{j.value("gold", std::string{})}};
    }
    if (kind == "sql_execution") {
      SqlExecution p;
      fs::path fixture = j.at("fixture").get<std::string>();
      p.fixture = fixture.is_relative() ? base_dir / fixture : fixture;
      p.gold_query = j.at("gold_query").get<std::string>();
      p.timeout_s = j.value("timeout_s", 10.0);
      if (!(p.timeout_s > 0)) throw Error(ErrorKind::kConfig, "timeout_s must be > 0");
      return {p};
    }
    if (kind == "external_command") {
      ExternalCommand p;
      p.command = j.at("command").get<std::string>();
      p.timeout_s = j.value("timeout_s", 10.0);
      p.candidate_file = j.value("candidate_file", std::string("candidate.txt"));
      p.files = j.value("files", std::map<std::string, std::string>{});
      if (!contains(p.command, "{candidate}")) {
        throw Error(ErrorKind::kConfig,
                    "external_command template lacks {candidate}");
      }
      if (!(p.timeout_s > 0)) throw Error(ErrorKind::kConfig, "timeout_s must be > 0");
      return {p};
    }
    throw Error(ErrorKind::kConfig, "unknown validator kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("bad validator spec: ") + e.what());
  }
}

nlohmann::json to_json(const ValidatorSpec& spec) {
  nlohmann::json j{{"kind", spec.kind_name()}};
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, NumericEquivalence>) {
          if (!p.gold.empty()) j["gold"] = p.gold;
          j["rel_tol"] = p.rel_tol;
        } else if constexpr (std::is_same_v<T, NormalizedExact>) {
          if (!p.gold.empty()) j["gold"] = p.gold;
        } else if constexpr (std::is_same_v<T, SqlExecution>) {
          j["fixture"] = p.fixture.string();
          j["gold_query"] = p.gold_query;
          j["timeout_s"] = p.timeout_s;
        } else {
          j["command"] = p.command;
          j["timeout_s"] = p.timeout_s;
          j["candidate_file"] = p.candidate_file;
          if (!p.files.empty()) j["files"] = p.files;
        }
      },
      spec.payload);
  return j;
}

// ---------------------------------------------------------------------------
// Numbers

namespace {

std::string strip_math_wrappers(std::string_view text) {
  std::string s = trim(text);
  while (!s.empty() && s.front() == '$') s.erase(s.begin());
  while (!s.empty() && s.back() == '$') s.pop_back();
  s = trim(s);
  if (s.size() > 1 && s.back() == '.') s.pop_back();
  return s;
}

struct Rational {
  __int128 num;
  __int128 den;
};

constexpr __int128 kInt64Max = static_cast<__int128>(INT64_MAX);

bool fits(const Rational& r) {
  return r.num <= kInt64Max && r.num >= -kInt64Max && r.den <= kInt64Max &&
         r.den > 0;
}

__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Rational reduce(Rational r) {
  if (r.den < 0) {
    r.num = -r.num;
    r.den = -r.den;
  }
  __int128 g = gcd128(r.num, r.den);
  if (g > 1) {
    r.num /= g;
    r.den /= g;
  }
  return r;
}

// [sign] digits [. digits] | [sign] . digits, optional exponent.
std::optional<ParsedNumber> parse_decimal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool negative = false;
  if (s[i] == '+' || s[i] == '-') {
    negative = s[i] == '-';
    ++i;
  }
  std::string digits;
  std::size_t frac_digits = 0;
  bool seen_dot = false;
  bool any_digit = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      any_digit = true;
      if (seen_dot) ++frac_digits;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!any_digit) return std::nullopt;
  bool has_exponent = false;
  if (i < s.size()) {
    if (s[i] != 'e' && s[i] != 'E') return std::nullopt;
    std::size_t j = i + 1;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
    if (j >= s.size()) return std::nullopt;
    for (; j < s.size(); ++j) {
      if (!std::isdigit(static_cast<unsigned char>(s[j]))) return std::nullopt;
    }
    has_exponent = true;
  }
  ParsedNumber out;
  std::string buf(s);
  char* end = nullptr;
  out.value = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || !std::isfinite(out.value)) {
    return std::nullopt;
  }
  // Strip leading zeros so the exactness check counts significant digits.
  std::size_t nz = digits.find_first_not_of('0');
  std::string significant = nz == std::string::npos ? "0" : digits.substr(nz);
  if (!has_exponent && significant.size() <= 18 && frac_digits <= 18) {
    Rational r{static_cast<__int128>(std::stoll(significant)), 1};
    for (std::size_t k = 0; k < frac_digits; ++k) r.den *= 10;
    if (negative) r.num = -r.num;
    r = reduce(r);
    if (fits(r)) {
      out.exact = std::make_pair(static_cast<long long>(r.num),
                                 static_cast<long long>(r.den));
      out.value = static_cast<double>(r.num) / static_cast<double>(r.den);
    }
  }
  return out;
}

}  // namespace

std::optional<ParsedNumber> parse_number(std::string_view text) {
  std::string s = strip_math_wrappers(text);
  // \frac{a}{b}, \dfrac{a}{b}, \tfrac{a}{b}
  for (std::string_view prefix : {"\\frac{", "\\dfrac{", "\\tfrac{"}) {
    if (s.rfind(prefix, 0) == 0) {
      std::size_t close = s.find('}', prefix.size());
      if (close == std::string::npos || close + 1 >= s.size() ||
          s[close + 1] != '{' || s.back() != '}') {
        return std::nullopt;
      }
      std::string num = s.substr(prefix.size(), close - prefix.size());
      std::string den = s.substr(close + 2, s.size() - close - 3);
      s = num + "/" + den;
      break;
    }
  }
  s.erase(std::remove_if(s.begin(), s.end(),
                         [](unsigned char c) { return std::isspace(c); }),
          s.end());
  std::size_t slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);
  if (s.find('/', slash + 1) != std::string::npos) return std::nullopt;
  auto a = parse_decimal(std::string_view(s).substr(0, slash));
  auto b = parse_decimal(std::string_view(s).substr(slash + 1));
  if (!a || !b || b->value == 0.0) return std::nullopt;
  ParsedNumber out;
  out.value = a->value / b->value;
  if (a->exact && b->exact) {
    Rational r{static_cast<__int128>(a->exact->first) * b->exact->second,
               static_cast<__int128>(a->exact->second) * b->exact->first};
    r = reduce(r);
    if (fits(r)) {
      out.exact = std::make_pair(static_cast<long long>(r.num),
                                 static_cast<long long>(r.den));
      out.value = static_cast<double>(r.num) / static_cast<double>(r.den);
    }
  }
  if (!std::isfinite(out.value)) return std::nullopt;
  return out;
}

std::optional<std::string> canonical_number(std::string_view text) {
  auto parsed = parse_number(text);
  if (!parsed) return std::nullopt;
  if (parsed->exact) {
    auto [n, d] = *parsed->exact;
    return d == 1 ? std::to_string(n)
                  : std::to_string(n) + "/" + std::to_string(d);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", parsed->value);
  return std::string(buf);
}

bool numeric_equivalent(std::string_view a, std::string_view b,
                        double rel_tol) {
  auto pa = parse_number(a);
  auto pb = parse_number(b);
  if (pa && pb) {
    if (pa->exact && pb->exact && *pa->exact == *pb->exact) return true;
    if (pa->value == pb->value) return true;
    double scale = std::max(std::fabs(pa->value), std::fabs(pb->value));
    return std::fabs(pa->value - pb->value) <= rel_tol * scale;
  }
  return collapse_whitespace(strip_math_wrappers(a)) ==
         collapse_whitespace(strip_math_wrappers(b));
}

std::string normalize_text_answer(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return collapse_whitespace(trim(out));
}

// ---------------------------------------------------------------------------
// SQL

namespace {

struct SqliteCloser {
  void operator()(sqlite3* db) const { sqlite3_close_v2(db); }
};
using SqliteHandle = std::unique_ptr<sqlite3, SqliteCloser>;

struct StmtFinalizer {
  void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using StmtHandle = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

// Fresh private connection per call. A .sql fixture is replayed into an
// in-memory database; any other file is opened read-only.
SqliteHandle open_fixture(const fs::path& fixture) {
  if (!fs::exists(fixture)) {
    throw Error(ErrorKind::kResource, "missing database fixture " + fixture.string());
  }
  sqlite3* raw = nullptr;
  if (fixture.extension() == ".sql") {
    if (sqlite3_open_v2(":memory:", &raw,
                        SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) !=
        SQLITE_OK) {
      sqlite3_close_v2(raw);
      throw Error(ErrorKind::kResource, "cannot open in-memory database");
    }
    SqliteHandle db(raw);
    std::string script = read_file(fixture);
    char* err = nullptr;
    if (sqlite3_exec(db.get(), script.c_str(), nullptr, nullptr, &err) !=
        SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw Error(ErrorKind::kResource,
                  "fixture " + fixture.string() + " failed to load: " + msg);
    }
    return db;
  }
  if (sqlite3_open_v2(fixture.c_str(), &raw, SQLITE_OPEN_READONLY, nullptr) !=
      SQLITE_OK) {
    std::string msg = raw ? sqlite3_errmsg(raw) : "open failed";
    sqlite3_close_v2(raw);
    throw Error(ErrorKind::kResource, "cannot open fixture " + fixture.string() +
                                          ": " + msg);
  }
  return SqliteHandle(raw);
}

std::string encode_value(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_NULL: return "n:";
    case SQLITE_INTEGER:
      return "i:" + std::to_string(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT: {
      double v = sqlite3_column_double(stmt, col);
      // 2.0 and 2 compare equal.
      if (std::nearbyint(v) == v && std::fabs(v) < 9.0e15) {
        return "i:" + std::to_string(static_cast<long long>(v));
      }
      char buf[64];
      std::snprintf(buf, sizeof buf, "f:%.15g", v);
      return buf;
    }
    case SQLITE_TEXT: {
      const auto* text = sqlite3_column_text(stmt, col);
      return "t:" + std::string(reinterpret_cast<const char*>(text),
                                sqlite3_column_bytes(stmt, col));
    }
    default: {
      const auto* blob = static_cast<const unsigned char*>(sqlite3_column_blob(stmt, col));
      int n = sqlite3_column_bytes(stmt, col);
      return "b:" + sha256_hex(std::string_view(
                        reinterpret_cast<const char*>(blob), static_cast<std::size_t>(n)));
    }
  }
}

struct QueryResult {
  bool ok = false;
  std::string error;
  std::vector<std::string> rows;  // each row encoded as one string
};

QueryResult run_query(sqlite3* db, std::string_view query, double timeout_s) {
  QueryResult result;
  using Clock = std::chrono::steady_clock;
  auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(timeout_s));
  sqlite3_progress_handler(
      db, 1000,
      [](void* p) -> int {
        return Clock::now() > *static_cast<Clock::time_point*>(p) ? 1 : 0;
      },
      &deadline);
  struct ClearHandler {
    sqlite3* db;
    ~ClearHandler() { sqlite3_progress_handler(db, 0, nullptr, nullptr); }
  } clear_handler{db};

  sqlite3_stmt* raw = nullptr;
  const char* tail = nullptr;
  std::string sql(query);
  if (sqlite3_prepare_v2(db, sql.c_str(), static_cast<int>(sql.size()), &raw,
                         &tail) != SQLITE_OK) {
    result.error = sqlite3_errmsg(db);
    sqlite3_finalize(raw);
    return result;
  }
  StmtHandle stmt(raw);
  if (!stmt) {
    result.error = "empty query";
    return result;
  }
  for (const char* t = tail; t && *t; ++t) {
    if (!std::isspace(static_cast<unsigned char>(*t)) && *t != ';') {
      result.error = "multiple statements are not allowed";
      return result;
    }
  }
  const int ncol = sqlite3_column_count(stmt.get());
  while (true) {
    int rc = sqlite3_step(stmt.get());
    if (rc == SQLITE_DONE) break;
    if (rc != SQLITE_ROW) {
      result.error = rc == SQLITE_INTERRUPT ? "query timed out" : sqlite3_errmsg(db);
      return result;
    }
    std::string row;
    for (int c = 0; c < ncol; ++c) {
      if (c > 0) row.push_back('\x1f');
      row += encode_value(stmt.get(), c);
    }
    result.rows.push_back(std::move(row));
  }
  result.ok = true;
  return result;
}

}  // namespace

bool has_top_level_order_by(std::string_view query) {
  std::string upper;
  upper.reserve(query.size());
  int depth = 0;
  char quote = 0;
  for (char c : query) {
    if (quote) {
      if (c == quote) quote = 0;
      upper.push_back(' ');
      continue;
    }
    if (c == '\'' || c == '"' || c == '`') {
      quote = c;
      upper.push_back(' ');
      continue;
    }
    if (c == '(') ++depth;
    if (c == ')') --depth;
    upper.push_back(depth == 0 ? static_cast<char>(std::toupper(
                                     static_cast<unsigned char>(c)))
                               : ' ');
  }
  std::string collapsed = " " + collapse_whitespace(upper) + " ";
  return contains(collapsed, " ORDER BY ");
}

Validation sql_equivalent(std::string_view candidate_query,
                          std::string_view gold_query, const fs::path& fixture,
                          double timeout_s) {
  Validation v;
  QueryResult gold;
  QueryResult cand;
  try {
    SqliteHandle gold_db = open_fixture(fixture);
    gold = run_query(gold_db.get(), gold_query, timeout_s);
    SqliteHandle cand_db = open_fixture(fixture);
    cand = run_query(cand_db.get(), candidate_query, timeout_s);
  } catch (const Error& e) {
    v.verdict = Verdict::kError;
    v.diagnostic = e.what();
    return v;
  }
  if (!gold.ok) {
    v.verdict = Verdict::kError;
    v.diagnostic = "gold query failed: " + gold.error;
    return v;
  }
  if (!cand.ok) {
    v.verdict = Verdict::kWrong;
    v.timed_out = cand.error == "query timed out";
    v.diagnostic = "candidate failed: " + cand.error;
    return v;
  }
  const bool ordered = has_top_level_order_by(gold_query);
  if (!ordered) {
    std::sort(gold.rows.begin(), gold.rows.end());
    std::sort(cand.rows.begin(), cand.rows.end());
  } else {
    v.diagnostic = "ordered comparison";
  }
  v.verdict = gold.rows == cand.rows ? Verdict::kCorrect : Verdict::kWrong;
  return v;
}

// ---------------------------------------------------------------------------
// External commands

namespace {

class ProcessLimiter {
 public:
  void set_limit(std::size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    limit_ = std::max<std::size_t>(n, 1);
    cv_.notify_all();
  }
  void acquire() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return in_use_ < limit_; });
    ++in_use_;
  }
  void release() {
    std::lock_guard<std::mutex> lock(mu_);
    --in_use_;
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t limit_ = std::max(1u, std::thread::hardware_concurrency());
  std::size_t in_use_ = 0;
};

ProcessLimiter& limiter() {
  static ProcessLimiter instance;
  return instance;
}

std::mutex& sandbox_mu() {
  static std::mutex mu;
  return mu;
}

fs::path& sandbox_root_ref() {
  static fs::path root;
  return root;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

bool safe_file_name(const std::string& name) {
  return !name.empty() && name != "." && name != ".." &&
         name.find('/') == std::string::npos;
}

std::string tail_of(const fs::path& path, std::size_t max_bytes) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return {};
  std::string text = read_file(path);
  if (text.size() > max_bytes) text = text.substr(text.size() - max_bytes);
  return trim(text);
}

}  // namespace

void set_external_concurrency(std::size_t max_children) {
  limiter().set_limit(max_children);
}

void set_sandbox_root(const fs::path& root) {
  std::lock_guard<std::mutex> lock(sandbox_mu());
  sandbox_root_ref() = root;
}

Validation run_external(const ExternalCommand& command,
                        std::string_view candidate) {
  if (!contains(command.command, "{candidate}")) {
    throw Error(ErrorKind::kPrecondition,
                "command template lacks a {candidate} placeholder");
  }
  if (!safe_file_name(command.candidate_file)) {
    throw Error(ErrorKind::kConfig, "bad candidate_file name");
  }
  Validation v;
  fs::path root;
  {
    std::lock_guard<std::mutex> lock(sandbox_mu());
    root = sandbox_root_ref().empty() ? fs::temp_directory_path()
                                      : sandbox_root_ref();
  }
  std::error_code ec;
  fs::create_directories(root, ec);
  std::string templ = (root / "infolabel-XXXXXX").string();
  if (::mkdtemp(templ.data()) == nullptr) {
    v.verdict = Verdict::kError;
    v.diagnostic = std::string("cannot create sandbox: ") + std::strerror(errno);
    return v;
  }
  const fs::path dir = templ;
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{dir};

  try {
    const fs::path candidate_path = dir / command.candidate_file;
    write_file_atomic(candidate_path, candidate);
    for (const auto& [name, content] : command.files) {
      if (!safe_file_name(name)) {
        throw Error(ErrorKind::kConfig, "bad support file name '" + name + "'");
      }
      write_file_atomic(dir / name, content);
    }
    std::string cmd = command.command;
    replace_all(cmd, "{candidate}", shell_quote(candidate_path.string()));
    replace_all(cmd, "{dir}", shell_quote(dir.string()));
    const std::string log_path = (dir / ".output.log").string();
    const std::string dir_str = dir.string();

    limiter().acquire();
    struct Release {
      ~Release() { limiter().release(); }
    } release;

    pid_t pid = ::fork();
    if (pid < 0) {
      v.verdict = Verdict::kError;
      v.diagnostic = std::string("fork failed: ") + std::strerror(errno);
      return v;
    }
    if (pid == 0) {
      ::setpgid(0, 0);
      if (::chdir(dir_str.c_str()) != 0) ::_exit(126);
      int devnull = ::open("/dev/null", O_RDONLY);
      if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
      int out = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (out >= 0) {
        ::dup2(out, STDOUT_FILENO);
        ::dup2(out, STDERR_FILENO);
      }
      ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid, pid);

    using Clock = std::chrono::steady_clock;
    const auto deadline =
        Clock::now() + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(command.timeout_s));
    int status = 0;
    auto sleep = std::chrono::microseconds(500);
    while (true) {
      pid_t r = ::waitpid(pid, &status, WNOHANG);
      if (r == pid) break;
      if (r < 0 && errno != EINTR) {
        v.verdict = Verdict::kError;
        v.diagnostic = std::string("waitpid failed: ") + std::strerror(errno);
        return v;
      }
      if (Clock::now() >= deadline) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        v.verdict = Verdict::kWrong;
        v.timed_out = true;
        v.diagnostic = "timed out";
        return v;
      }
      std::this_thread::sleep_for(sleep);
      sleep = std::min(sleep * 2, std::chrono::microseconds(10000));
    }
    // Reap anything the command left running in its process group.
    ::kill(-pid, SIGKILL);

    if (WIFEXITED(status)) {
      int code = WEXITSTATUS(status);
      if (code == 0) {
        v.verdict = Verdict::kCorrect;
      } else if (code == 127 || code == 126) {
        v.verdict = Verdict::kError;
        v.diagnostic = "command could not be run (exit " + std::to_string(code) +
                       "): " + tail_of(log_path, 400);
      } else {
        v.verdict = Verdict::kWrong;
        v.diagnostic = "exit " + std::to_string(code) + ": " + tail_of(log_path, 400);
      }
    } else {
      v.verdict = Verdict::kWrong;
      v.diagnostic = "terminated by signal";
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    v.verdict = Verdict::kError;
    v.diagnostic = e.what();
  }
  return v;
}

Validation run_external(std::string_view command_template,
                        std::string_view candidate, double timeout_s) {
  ExternalCommand command;
  command.command = std::string(command_template);
  command.timeout_s = timeout_s;
  return run_external(command, candidate);
}

// ---------------------------------------------------------------------------

Validation validate(const ValidatorSpec& spec, std::string_view candidate,
                    const Problem& problem) {
  if (trim(candidate).empty()) {
    throw Error(ErrorKind::kPrecondition, "empty candidate answer");
  }
  return std::visit(
      [&](const auto& p) -> Validation {
        using T = std::decay_t<decltype(p)>;
        Validation v;
        if constexpr (std::is_same_v<T, NumericEquivalence>) {
          const std::string& gold = p.gold.empty() ? problem.gold_answer : p.gold;
          v.verdict = numeric_equivalent(candidate, gold, p.rel_tol)
                          ? Verdict::kCorrect
                          : Verdict::kWrong;
        } else if constexpr (std::is_same_v<T, NormalizedExact>) {
          const std::string& gold = p.gold.empty() ? problem.gold_answer : p.gold;
          v.verdict = normalize_text_answer(candidate) == normalize_text_answer(gold)
                          ? Verdict::kCorrect
                          : Verdict::kWrong;
        } else if constexpr (std::is_same_v<T, SqlExecution>) {
          v = sql_equivalent(candidate, p.gold_query, p.fixture, p.timeout_s);
        } else {
          v = run_external(p, candidate);
        }
        return v;
      },
      spec.payload);
}

}  // namespace infolabel
