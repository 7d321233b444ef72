#pragma once

// Document ingestion, paragraph segmentation and time slicing.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "trendlens/common.hpp"

namespace trendlens::corpus {

inline constexpr std::size_t kMinLatinChars = 100;
inline constexpr std::size_t kDefaultMaxUnitChars = 2000;

struct RawDocument {
  std::string id;
  Instant timestamp;
  std::string text;
  std::optional<std::string> source;
};

/// A paragraph-sized piece of a RawDocument. Popularity counts parents, not units.
struct TextUnit {
  std::string unit_id;
  std::string parent_id;
  Instant timestamp;
  std::string text;
  std::size_t latin_char_count = 0;
};

struct Granularity {
  int days = 1;

  std::chrono::seconds duration() const { return std::chrono::seconds{days * kSecondsPerDay}; }
};

struct DocumentSlice {
  SliceIndex slice_index = 0;
  Instant start;
  Instant end;  // exclusive
  std::vector<TextUnit> units;
};

struct IngestResult {
  std::vector<RawDocument> documents;
  std::size_t skipped_malformed = 0;
  std::size_t rejected_duplicates = 0;
};

/// Parses JSON Lines. Malformed records are counted and skipped; a repeated
/// id keeps the first record.
inline IngestResult ingest(std::istream& in) {
  if (!in.good()) throw DataError("corpus input stream is not readable");
  IngestResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("timestamp") ||
        !j["timestamp"].is_string() || !j.contains("text") || !j["text"].is_string()) {
      ++result.skipped_malformed;
      continue;
    }
    RawDocument doc;
    doc.id = j["id"].get<std::string>();
    try {
      doc.timestamp = parse_iso8601(j["timestamp"].get<std::string>());
    } catch (const DataError&) {
      ++result.skipped_malformed;
      continue;
    }
    doc.text = j["text"].get<std::string>();
    if (j.contains("source") && j["source"].is_string()) doc.source = j["source"].get<std::string>();
    if (!seen.insert(doc.id).second) {
      spdlog::warn("corpus line {}: duplicate document id '{}' rejected", line_no, doc.id);
      ++result.rejected_duplicates;
      continue;
    }
    result.documents.push_back(std::move(doc));
  }
  if (in.bad()) throw DataError("I/O error while reading corpus input");
  return result;
}

inline IngestResult ingest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return ingest(in);
}

namespace detail {

inline std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw DataError("ICU NFC normalizer unavailable");
  const auto source = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized = normalizer->normalize(source, status);
  if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

inline std::size_t codepoint_count(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

/// Byte offset of the `n`-th code point (or s.size()).
inline std::size_t codepoint_offset(std::string_view s, std::size_t n) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (seen == n) return i;
      ++seen;
    }
  }
  return s.size();
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> paragraphs;
  std::string current;
  std::size_t pos = 0;
  auto flush = [&] {
    const auto t = trim(current);
    if (!t.empty()) paragraphs.emplace_back(t);
    current.clear();
  };
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      flush();
    } else {
      if (!current.empty()) current += '\n';
      current.append(line);
    }
    pos = nl + 1;
  }
  flush();
  return paragraphs;
}

inline std::vector<std::string_view> split_sentences(std::string_view paragraph) {
  std::vector<std::string_view> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < paragraph.size(); ++i) {
    const char c = paragraph[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == paragraph.size() || std::isspace(static_cast<unsigned char>(paragraph[i + 1])))) {
      sentences.push_back(paragraph.substr(start, i + 1 - start));
      start = i + 1;
    }
  }
  if (start < paragraph.size()) sentences.push_back(paragraph.substr(start));
  std::vector<std::string_view> trimmed;
  for (auto s : sentences) {
    s = trim(s);
    if (!s.empty()) trimmed.push_back(s);
  }
  return trimmed;
}

/// Splits one over-long sentence on whitespace, falling back to a hard cut.
inline void hard_wrap(std::string_view sentence, std::size_t max_chars, std::vector<std::string>& out) {
  while (codepoint_count(sentence) > max_chars) {
    const std::size_t cut = codepoint_offset(sentence, max_chars);
    std::size_t split = sentence.find_last_of(" \t\n", cut);
    if (split == std::string_view::npos || split == 0) split = cut;
    const auto head = trim(sentence.substr(0, split));
    if (!head.empty()) out.emplace_back(head);
    sentence = trim(sentence.substr(split));
  }
  if (!sentence.empty()) out.emplace_back(sentence);
}

inline std::vector<std::string> split_long_paragraph(std::string_view paragraph, std::size_t max_chars) {
  std::vector<std::string> pieces;
  if (codepoint_count(paragraph) <= max_chars) {
    pieces.emplace_back(paragraph);
    return pieces;
  }
  std::string current;
  std::size_t current_len = 0;
  for (const auto sentence : split_sentences(paragraph)) {
    const std::size_t len = codepoint_count(sentence);
    if (len > max_chars) {
      if (!current.empty()) pieces.push_back(std::move(current));
      current.clear();
      current_len = 0;
      hard_wrap(sentence, max_chars, pieces);
      continue;
    }
    const std::size_t joined = current.empty() ? len : current_len + 1 + len;
    if (joined > max_chars) {
      pieces.push_back(std::move(current));
      current.assign(sentence);
      current_len = len;
    } else {
      if (!current.empty()) current += ' ';
      current.append(sentence);
      current_len = joined;
    }
  }
  if (!current.empty()) pieces.push_back(std::move(current));
  return pieces;
}

}  // namespace detail

inline std::size_t latin_char_count(std::string_view text) {
  return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
  }));
}

/// NFC-normalizes, splits on blank lines, splits long paragraphs at sentence
/// boundaries, and drops pieces with fewer than 100 Latin letters.
/// Unit ids are `<doc id>#<piece index>`; indices count dropped pieces too.
inline std::vector<TextUnit> preprocess(const RawDocument& doc, std::size_t max_unit_chars = kDefaultMaxUnitChars) {
  if (max_unit_chars == 0) throw ConfigError("max_unit_chars must be positive");
  std::vector<TextUnit> units;
  std::size_t piece_index = 0;
  for (const auto& paragraph : detail::split_paragraphs(detail::nfc(doc.text))) {
    for (auto& piece : detail::split_long_paragraph(paragraph, max_unit_chars)) {
      const std::size_t latin = latin_char_count(piece);
      const std::size_t index = piece_index++;
      if (latin < kMinLatinChars) continue;
      units.push_back(TextUnit{doc.id + "#" + std::to_string(index), doc.id, doc.timestamp, std::move(piece), latin});
    }
  }
  return units;
}

inline std::vector<TextUnit> preprocess_all(const std::vector<RawDocument>& docs,
                                            std::size_t max_unit_chars = kDefaultMaxUnitChars) {
  std::vector<TextUnit> units;
  for (const auto& doc : docs) {
    auto part = preprocess(doc, max_unit_chars);
    units.insert(units.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return units;
}

/// Number of slices needed to cover [floor_to_day(start), end).
inline SliceIndex slice_count(Granularity granularity, Instant start, Instant end) {
  const Instant origin = floor_to_day(start);
  if (end <= origin) return 0;
  const auto span = (end - origin).count();
  const auto width = granularity.duration().count();
  return static_cast<SliceIndex>((span + width - 1) / width);
}

inline Instant slice_start(Granularity granularity, Instant origin, SliceIndex index) {
  return origin + granularity.duration() * index;
}

/// Partitions units into contiguous half-open slices anchored at 00:00 UTC of
/// `start`'s date. Empty slices are kept. Units outside [origin, end) are dropped.
/// Within a slice units keep their input order after a stable sort by time.
inline std::vector<DocumentSlice> slice(const std::vector<TextUnit>& units, Granularity granularity, Instant start,
                                        Instant end) {
  if (granularity.days < 1) throw ConfigError("granularity must be at least one day");
  if (!(start < end)) throw ConfigError("slice range requires start < end");
  const Instant origin = floor_to_day(start);
  const SliceIndex count = slice_count(granularity, start, end);
  std::vector<DocumentSlice> slices(static_cast<std::size_t>(count));
  for (SliceIndex i = 0; i < count; ++i) {
    slices[i].slice_index = i;
    slices[i].start = slice_start(granularity, origin, i);
    slices[i].end = slices[i].start + granularity.duration();
  }
  const auto width = granularity.duration().count();
  for (const auto& unit : units) {
    if (unit.timestamp < origin || !(unit.timestamp < end)) continue;
    const auto offset = (unit.timestamp - origin).count();
    slices[static_cast<std::size_t>(offset / width)].units.push_back(unit);
  }
  for (auto& s : slices) {
    std::stable_sort(s.units.begin(), s.units.end(),
                     [](const TextUnit& a, const TextUnit& b) { return a.timestamp < b.timestamp; });
  }
  return slices;
}

}  // namespace trendlens::corpus
