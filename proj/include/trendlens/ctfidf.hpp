#pragma once

// Class-based TF-IDF keyword labeling.
//
//   score(w, c) = tf(w, c) * log(1 + A / f_w)
//
// tf(w, c): occurrences of term w in the concatenated text of class c
// f_w:      occurrences of w summed over all classes
// A:        average number of term occurrences per class

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <unicode/locid.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "trendlens/stopwords.hpp"

namespace trendlens::text {

struct TermScore {
  std::string term;
  double score = 0.0;

  bool operator==(const TermScore&) const = default;
};

/// Lowercases and extracts maximal runs of word characters (letters, digits,
/// underscore) of length >= 2 code points.
inline std::vector<std::string> tokenize(std::string_view text) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  u.toLower(icu::Locale::getRoot());
  std::vector<std::string> tokens;
  icu::UnicodeString current;
  int32_t current_len = 0;
  auto flush = [&] {
    if (current_len >= 2) {
      std::string s;
      current.toUTF8String(s);
      tokens.push_back(std::move(s));
    }
    current.remove();
    current_len = 0;
  };
  for (int32_t i = 0; i < u.length();) {
    const UChar32 c = u.char32At(i);
    if (u_isalnum(c) || c == '_') {
      current.append(c);
      ++current_len;
    } else {
      flush();
    }
    i = u.moveIndex32(i, 1);
  }
  flush();
  return tokens;
}

/// Unigrams and bigrams over the stopword-filtered token stream.
inline std::vector<std::string> extract_terms(std::string_view text, int max_ngram = 2) {
  std::vector<std::string> kept;
  for (auto& t : tokenize(text))
    if (!is_stopword(t)) kept.push_back(std::move(t));
  std::vector<std::string> terms = kept;
  for (int n = 2; n <= max_ngram; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= kept.size(); ++i) {
      std::string gram = kept[i];
      for (int k = 1; k < n; ++k) gram += " " + kept[i + static_cast<std::size_t>(k)];
      terms.push_back(std::move(gram));
    }
  }
  return terms;
}

using TermCounts = std::map<std::string, long long>;

inline TermCounts count_terms(std::string_view text, int max_ngram = 2) {
  TermCounts counts;
  for (auto& t : extract_terms(text, max_ngram)) ++counts[t];
  return counts;
}

/// Full score table: one map per class. Classes are given as term counts.
inline std::vector<std::map<std::string, double>> ctfidf_scores(const std::vector<TermCounts>& classes) {
  std::vector<std::map<std::string, double>> scores(classes.size());
  if (classes.empty()) return scores;
  std::unordered_map<std::string, long long> frequency;
  long long total = 0;
  for (const auto& c : classes) {
    for (const auto& [term, count] : c) {
      frequency[term] += count;
      total += count;
    }
  }
  const double average = static_cast<double>(total) / static_cast<double>(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (const auto& [term, count] : classes[i]) {
      const double f = static_cast<double>(frequency.at(term));
      scores[i][term] = static_cast<double>(count) * std::log(1.0 + average / f);
    }
  }
  return scores;
}

/// Highest-scoring `top_n` terms, score descending, ties lexicographic.
inline std::vector<TermScore> top_terms(const std::map<std::string, double>& scores, std::size_t top_n) {
  std::vector<TermScore> ranked;
  ranked.reserve(scores.size());
  for (const auto& [term, score] : scores) ranked.push_back({term, score});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const TermScore& a, const TermScore& b) { return a.score > b.score; });
  if (ranked.size() > top_n) ranked.resize(top_n);
  return ranked;
}

}  // namespace trendlens::text
