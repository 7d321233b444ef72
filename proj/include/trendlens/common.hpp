#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trendlens {

/// Error categories. Each maps onto a process exit code used by the CLI.
enum class ErrorKind {
  config = 2,    ///< invalid configuration or CLI arguments
  data = 3,      ///< malformed or inconsistent input data
  upstream = 4,  ///< embedding or LLM service failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Transport or protocol failure talking to an external service.
/// `retryable` is false once the bounded retry budget is exhausted.
struct UpstreamError : Error {
  UpstreamError(const std::string& what, bool retryable_)
      : Error(ErrorKind::upstream, what), retryable(retryable_) {}
  bool retryable;
};

/// Thrown when slices are fed to the engine out of order.
struct OrderingError : Error {
  explicit OrderingError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct NotFoundError : Error {
  explicit NotFoundError(const std::string& what) : Error(ErrorKind::data, what) {}
};

using Instant = std::chrono::sys_seconds;
using SliceIndex = std::int64_t;
using TopicId = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

/// Parses the ISO-8601 subset used by the corpus format:
/// `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS[.fff]]` with optional `Z` or `±HH:MM`.
/// Fractional seconds are truncated. A space is accepted instead of `T`.
/// Timestamps without an offset are taken as UTC.
inline Instant parse_iso8601(std::string_view s) {
  auto fail = [&]() -> Instant {
    throw DataError("unparseable timestamp '" + std::string(s) + "'");
  };
  int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  if (!detail::parse_fixed_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' ||
      !detail::parse_fixed_int(s, 5, 2, mo) || s[7] != '-' || !detail::parse_fixed_int(s, 8, 2, d))
    return fail();
  std::size_t pos = 10;
  std::int64_t offset_seconds = 0;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ') return fail();
    ++pos;
    if (!detail::parse_fixed_int(s, pos, 2, hh) || pos + 2 >= s.size() || s[pos + 2] != ':' ||
        !detail::parse_fixed_int(s, pos + 3, 2, mm))
      return fail();
    pos += 5;
    if (pos < s.size() && s[pos] == ':') {
      if (!detail::parse_fixed_int(s, pos + 1, 2, ss)) return fail();
      pos += 3;
      if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
        ++pos;
        std::size_t digits = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos, ++digits;
        if (digits == 0) return fail();
      }
    }
    if (pos < s.size()) {
      if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
      } else if (s[pos] == '+' || s[pos] == '-') {
        int oh = 0, om = 0;
        const int sign = s[pos] == '-' ? -1 : 1;
        if (!detail::parse_fixed_int(s, pos + 1, 2, oh)) return fail();
        std::size_t next = pos + 3;
        if (next < s.size() && s[next] == ':') ++next;
        if (!detail::parse_fixed_int(s, next, 2, om)) return fail();
        pos = next + 2;
        offset_seconds = sign * (oh * 3600 + om * 60);
      }
    }
    if (pos != s.size()) return fail();
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) return fail();
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - seconds{offset_seconds};
}

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
inline std::string format_iso8601(Instant t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss<seconds> tod{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

/// Formats the calendar date only, `YYYY-MM-DD`.
inline std::string format_date(Instant t) { return format_iso8601(t).substr(0, 10); }

inline Instant floor_to_day(Instant t) {
  return std::chrono::floor<std::chrono::days>(t);
}

}  // namespace trendlens
