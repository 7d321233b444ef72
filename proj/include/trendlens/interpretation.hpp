#pragma once

// Two-stage LLM reports on a topic's history: an evolution summary, then a
// signal analysis built on that summary.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "trendlens/http_client.hpp"
#include "trendlens/prompt_templates.hpp"
#include "trendlens/trend_engine.hpp"

namespace trendlens::interpretation {

inline constexpr const char* kLlmUrlEnv = "TRENDLENS_LLM_URL";
inline constexpr const char* kLlmKeyEnv = "TRENDLENS_LLM_API_KEY";
inline constexpr const char* kLlmModelEnv = "TRENDLENS_LLM_MODEL";

struct Excerpt {
  std::string doc_id;
  std::string unit_id;
  double similarity = 0.0;
  std::string text;
};

struct DossierRecord {
  SliceIndex slice_index = 0;
  Instant start;
  Instant end;
  std::vector<text::TermScore> words;
  std::size_t parent_doc_count = 0;
  std::vector<Excerpt> excerpts;
};

struct TopicDossier {
  TopicId topic_id = 0;
  std::vector<DossierRecord> records;  // chronological

  SliceIndex last_slice() const { return records.empty() ? -1 : records.back().slice_index; }
};

struct DossierOptions {
  std::size_t max_excerpts_per_slice = 3;
  std::size_t max_excerpt_chars = 600;
  std::size_t max_words = 10;
  std::optional<Instant> up_to;  // keep slices starting before this instant
};

/// Text and embeddings of the units a topic captured.
struct UnitCatalog {
  std::unordered_map<std::string, corpus::TextUnit> units;
  std::unordered_map<std::string, EmbeddingVector> embeddings;
};

/// Cuts to at most `max_bytes` without splitting a UTF-8 sequence.
inline std::string truncate_utf8(std::string_view s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return std::string(s);
  std::size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return std::string(s.substr(0, cut));
}

/// Per-slice records for the slices where the topic received documents.
/// Excerpts are the captured units closest to the anchor, one per document,
/// ties broken by document id.
inline TopicDossier build_dossier(const TrendEngine& engine, Instant origin, TopicId topic_id,
                                  const UnitCatalog* catalog, const DossierOptions& opt = {}) {
  const auto& topic = engine.topic(topic_id);
  const auto g = std::chrono::days{engine.params().granularity_days};
  TopicDossier d;
  d.topic_id = topic_id;
  for (const auto& [slice, parents] : topic.parent_docs_by_slice) {
    DossierRecord r;
    r.slice_index = slice;
    r.start = origin + g * slice;
    r.end = r.start + g;
    if (opt.up_to && r.start >= *opt.up_to) break;
    r.parent_doc_count = parents.size();

    std::map<std::string, double> merged;
    for (const auto& w : topic.word_history) {
      if (w.slice_index != slice) continue;
      for (const auto& t : w.words) {
        auto [it, fresh] = merged.emplace(t.term, t.score);
        if (!fresh) it->second = std::max(it->second, t.score);
      }
    }
    r.words = text::top_terms(merged, opt.max_words);

    if (catalog && opt.max_excerpts_per_slice > 0) {
      std::map<std::string, Excerpt> best_per_doc;
      const auto units = topic.units_by_slice.find(slice);
      if (units != topic.units_by_slice.end()) {
        for (const auto& uid : units->second) {
          const auto u = catalog->units.find(uid);
          const auto e = catalog->embeddings.find(uid);
          if (u == catalog->units.end() || e == catalog->embeddings.end()) {
            spdlog::warn("dossier: unit '{}' of topic {} is not in the catalog", uid, topic_id);
            continue;
          }
          Excerpt x{u->second.parent_id, uid, cosine(e->second, topic.anchor_centroid), {}};
          auto [it, fresh] = best_per_doc.emplace(x.doc_id, x);
          if (!fresh && (x.similarity > it->second.similarity ||
                         (x.similarity == it->second.similarity && x.unit_id < it->second.unit_id)))
            it->second = x;
        }
      }
      std::vector<Excerpt> ranked;
      for (auto& [doc, x] : best_per_doc) ranked.push_back(std::move(x));
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const Excerpt& a, const Excerpt& b) { return a.similarity > b.similarity; });
      if (ranked.size() > opt.max_excerpts_per_slice) ranked.resize(opt.max_excerpts_per_slice);
      for (auto& x : ranked) x.text = truncate_utf8(catalog->units.at(x.unit_id).text, opt.max_excerpt_chars);
      r.excerpts = std::move(ranked);
    }
    d.records.push_back(std::move(r));
  }
  return d;
}

/// Plain-text body substituted for {content_summary}.
inline std::string render_content_summary(const TopicDossier& d) {
  std::ostringstream out;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    if (i) out << '\n';
    out << "Timestamp " << (i + 1) << ": " << format_date(r.start) << " to " << format_date(r.end - std::chrono::days{1})
        << '\n';
    out << "Top words:";
    for (std::size_t k = 0; k < r.words.size(); ++k) out << (k ? ", " : " ") << r.words[k].term;
    out << '\n';
    out << "Documents: " << r.parent_doc_count << '\n';
    if (!r.excerpts.empty()) {
      out << "Excerpts:\n";
      for (const auto& x : r.excerpts) out << "- [" << x.doc_id << "] " << x.text << '\n';
    }
  }
  return out.str();
}

/// Replaces each `{name}` placeholder once per occurrence in a single left-to-right
/// pass, so substituted text is never rescanned.
inline std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    bool replaced = false;
    if (tpl[i] == '{') {
      for (const auto& [key, value] : values) {
        const std::string token = "{" + key + "}";
        if (tpl.substr(i, token.size()) == token) {
          out += value;
          i += token.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tpl[i++];
  }
  return out;
}

inline std::string render_evolution_prompt(TopicId topic_number, const std::string& content_summary) {
  return fill_template(prompts::kEvolutionSummaryTemplate,
                       {{"topic_number", std::to_string(topic_number)}, {"content_summary", content_summary}});
}

inline std::string render_signal_prompt(const std::string& summary) {
  return fill_template(prompts::kSignalAnalysisTemplate, {{"summary_from_first_prompt", summary}});
}

/// Header lines the evolution template asks for. `### Date:` keeps its
/// colon; the section headers stand alone. Headers that only appear in the
/// template's later-period block are required only for multi-period dossiers.
inline std::vector<std::string> evolution_headers(bool multi_period) {
  std::vector<std::string> first, later;
  int blocks = 0;
  std::istringstream in{std::string(prompts::kEvolutionSummaryTemplate)};
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("## ", 0) == 0) ++blocks;
    if (line.rfind("### ", 0) != 0) continue;
    const auto colon = line.find(':');
    auto h = colon == std::string::npos ? line.substr(0, line.find_last_not_of(' ') + 1) : line.substr(0, colon + 1);
    auto& bucket = blocks <= 1 ? first : later;
    if (std::find(first.begin(), first.end(), h) == first.end() && std::find(bucket.begin(), bucket.end(), h) == bucket.end())
      bucket.push_back(std::move(h));
  }
  std::vector<std::string> out{"## "};
  out.insert(out.end(), first.begin(), first.end());
  if (multi_period) out.insert(out.end(), later.begin(), later.end());
  return out;
}

/// Numbered section titles of the signal template, e.g. "1. <title>".
inline std::vector<std::string> signal_headers() {
  std::vector<std::string> out;
  std::istringstream in{std::string(prompts::kSignalAnalysisTemplate)};
  for (std::string line; std::getline(in, line);) {
    if (line.size() > 3 && std::isdigit(static_cast<unsigned char>(line[0])) && line[1] == '.' && line[2] == ' ' &&
        line.back() == ':')
      out.push_back(line.substr(3, line.size() - 4));
  }
  return out;
}

inline std::vector<std::string> missing_headers(std::string_view text, const std::vector<std::string>& required) {
  std::vector<std::string> missing;
  for (const auto& h : required)
    if (text.find(h) == std::string_view::npos) missing.push_back(h);
  return missing;
}

struct LlmConfig {
  std::string endpoint;  // full chat-completion URL
  std::string model;
  std::string api_key;
  double temperature = 0.1;
  int max_tokens = 2048;
  int timeout_s = 120;
  int max_retries = 2;
  int backoff_ms = 500;
  std::size_t max_in_flight = 2;

  bool configured() const { return !endpoint.empty(); }

  void validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("llm temperature must lie in [0, 2]");
    if (max_tokens < 1) throw ConfigError("llm max_tokens must be positive");
    if (timeout_s < 1) throw ConfigError("llm timeout must be positive");
    if (max_retries < 0) throw ConfigError("llm max_retries must be non-negative");
    if (configured()) http::parse_url(endpoint);
  }

  /// Fills empty endpoint, key and model fields from the environment.
  LlmConfig with_env() const {
    LlmConfig c = *this;
    auto env = [](const char* name) -> std::string {
      const char* v = std::getenv(name);
      return v ? v : "";
    };
    if (c.endpoint.empty()) c.endpoint = env(kLlmUrlEnv);
    if (c.api_key.empty()) c.api_key = env(kLlmKeyEnv);
    if (c.model.empty()) c.model = env(kLlmModelEnv);
    return c;
  }
};

/// Chat-completion client: `{model, messages, temperature, max_tokens}` in,
/// `choices[0].message.content` out.
class LlmClient {
 public:
  explicit LlmClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!cfg_.configured()) throw ConfigError("llm endpoint is not configured (set " + std::string(kLlmUrlEnv) + ")");
    url_ = http::parse_url(cfg_.endpoint);
  }

  const LlmConfig& config() const noexcept { return cfg_; }

  nlohmann::json request_body(const std::string& prompt) const {
    return nlohmann::json{{"model", cfg_.model},
                          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                          {"temperature", cfg_.temperature},
                          {"max_tokens", cfg_.max_tokens}};
  }

  std::string complete(const std::string& prompt) const {
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    const auto res = http::post_json(url_, request_body(prompt),
                                     http::RetryPolicy{cfg_.max_retries, cfg_.backoff_ms, cfg_.timeout_s}, headers);
    try {
      return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw UpstreamError("llm response lacks choices[0].message.content", false);
    }
  }

 private:
  LlmConfig cfg_;
  http::Url url_;
};

struct LlmResult {
  std::string markdown;
  std::vector<std::string> warnings;
};

/// Sends `prompt`; if the reply lacks a required header, asks once more and
/// then accepts the reply with a warning.
inline LlmResult complete_checked(const LlmClient& client, const std::string& prompt,
                                  const std::vector<std::string>& required, std::string_view stage) {
  LlmResult r;
  for (int attempt = 0; attempt < 2; ++attempt) {
    r.markdown = client.complete(prompt);
    const auto missing = missing_headers(r.markdown, required);
    if (missing.empty()) return r;
    if (attempt == 1) {
      std::string w = std::string(stage) + ": reply is missing required headers:";
      for (const auto& m : missing) w += " \"" + m + "\"";
      spdlog::warn("{}", w);
      r.warnings.push_back(std::move(w));
    }
  }
  return r;
}

inline LlmResult summarize_evolution(const TopicDossier& dossier, const LlmClient& client) {
  const auto prompt = render_evolution_prompt(dossier.topic_id, render_content_summary(dossier));
  return complete_checked(client, prompt, evolution_headers(dossier.records.size() > 1), "evolution summary");
}

inline LlmResult analyze_signal(const std::string& summary, const LlmClient& client) {
  return complete_checked(client, render_signal_prompt(summary), signal_headers(), "signal analysis");
}

struct TopicAnalysis {
  TopicId topic_id = 0;
  SliceIndex last_slice = -1;
  std::string evolution;
  std::string analysis;
  std::vector<std::string> warnings;
};

inline std::string to_markdown(const TopicAnalysis& a) {
  std::string out = a.evolution;
  if (!out.empty() && out.back() != '\n') out += '\n';
  out += "\n---\n\n" + a.analysis;
  if (!out.empty() && out.back() != '\n') out += '\n';
  return out;
}

/// Runs both stages with a bounded number of concurrent topics and caches by
/// (topic id, last slice).
class Interpreter {
 public:
  explicit Interpreter(LlmConfig cfg) : client_(cfg), limit_(static_cast<std::ptrdiff_t>(cfg.max_in_flight)) {}

  TopicAnalysis analyze(const TopicDossier& dossier) {
    const auto key = std::make_pair(dossier.topic_id, dossier.last_slice());
    {
      std::lock_guard lock(mu_);
      if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    TopicAnalysis a;
    {
      http::InFlightLimit::Guard guard(limit_);
      a.topic_id = dossier.topic_id;
      a.last_slice = dossier.last_slice();
      auto evo = summarize_evolution(dossier, client_);
      auto sig = analyze_signal(evo.markdown, client_);
      a.evolution = std::move(evo.markdown);
      a.analysis = std::move(sig.markdown);
      a.warnings = std::move(evo.warnings);
      a.warnings.insert(a.warnings.end(), sig.warnings.begin(), sig.warnings.end());
    }
    std::lock_guard lock(mu_);
    cache_.emplace(key, a);
    return a;
  }

  std::size_t cache_size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  LlmClient client_;
  http::InFlightLimit limit_;
  mutable std::mutex mu_;
  std::map<std::pair<TopicId, SliceIndex>, TopicAnalysis> cache_;
};

}  // namespace trendlens::interpretation
