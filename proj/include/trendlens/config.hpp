#pragma once

// Run configuration read from an INI file with sections.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "trendlens/embeddings.hpp"
#include "trendlens/interpretation.hpp"
#include "trendlens/topic_extraction.hpp"
#include "trendlens/state_json.hpp"

namespace trendlens {

struct CorpusConfig {
  std::vector<std::filesystem::path> paths;
  std::optional<Instant> start;  // defaults to the earliest unit
  std::optional<Instant> end;    // exclusive; defaults to just after the latest unit
  std::size_t max_unit_chars = corpus::kDefaultMaxUnitChars;
};

struct ZeroShotConfig {
  double default_beta = kDefaultZeroShotBeta;
  std::optional<std::filesystem::path> topics_file;  // JSON array of {name, description, beta?}
};

struct DossierConfig {
  std::size_t excerpts_per_slice = 3;
  std::size_t excerpt_chars = 600;
};

struct RunConfig {
  CorpusConfig corpus;
  EngineParams engine;
  ExtractionParams extraction;
  ZeroShotConfig zeroshot;
  EmbeddingProviderConfig embeddings;
  interpretation::LlmConfig llm;
  DossierConfig dossier;
  std::filesystem::path snapshot_dir;

  void validate() const {
    engine.validate();
    extraction.validate();
    validate_beta(zeroshot.default_beta);
    if (embeddings.expected_dim == 0) throw ConfigError("[embeddings] dim must be positive");
    if (embeddings.batch_size == 0) throw ConfigError("[embeddings] batch_size must be positive");
    if (embeddings.kind == ProviderKind::precomputed_file && embeddings.location.empty())
      throw ConfigError("[embeddings] location is required for the precomputed provider");
    if (snapshot_dir.empty()) throw ConfigError("[output] snapshot_dir is required");
    if (corpus.start && corpus.end && !(*corpus.start < *corpus.end))
      throw ConfigError("[corpus] start must precede end");
    llm.validate();
  }
};

namespace detail {

using Schema = std::map<std::string, std::set<std::string>>;

inline const Schema& config_schema() {
  static const Schema schema{
      {"corpus", {"paths", "start", "end", "max_unit_chars"}},
      {"engine",
       {"granularity_days", "window", "merge_threshold", "decay", "decay_mode", "slope_min_points", "archive_floor"}},
      {"extraction",
       {"reduced_dim", "n_neighbors", "min_cluster_size", "min_samples", "allow_single_cluster", "top_n_words",
        "max_ngram", "seed"}},
      {"zeroshot", {"beta", "topics_file"}},
      {"embeddings",
       {"provider", "location", "dim", "normalize", "batch_size", "max_in_flight", "max_retries", "backoff_ms",
        "timeout_s"}},
      {"llm",
       {"endpoint", "model", "temperature", "max_tokens", "timeout_s", "max_retries", "backoff_ms", "max_in_flight",
        "excerpts_per_slice", "excerpt_chars"}},
      {"output", {"snapshot_dir"}},
  };
  return schema;
}

template <typename T>
T get_value(const boost::property_tree::ptree& section, const std::string& section_name, const std::string& key, T fallback) {
  const auto v = section.get_optional<std::string>(key);
  if (!v) return fallback;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (*v == "true" || *v == "1" || *v == "yes") return true;
      if (*v == "false" || *v == "0" || *v == "no") return false;
      throw std::invalid_argument("not a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return *v;
    } else if constexpr (std::is_floating_point_v<T>) {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing characters");
      return static_cast<T>(d);
    } else {
      std::size_t used = 0;
      const long long n = std::stoll(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing characters");
      if constexpr (std::is_unsigned_v<T>)
        if (n < 0) throw std::invalid_argument("negative");
      return static_cast<T>(n);
    }
  } catch (const std::exception&) {
    throw ConfigError("[" + section_name + "] " + key + ": invalid value '" + *v + "'");
  }
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
  }
  return out;
}

}  // namespace detail

/// Parses INI text. Relative paths resolve against `base_dir`. Unknown
/// sections and keys are rejected.
inline RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const auto& schema = detail::config_schema();
  for (const auto& [section, body] : tree) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("config: unknown section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("config: key '" + section + "' outside any section");
    for (const auto& [key, value] : body)
      if (!it->second.contains(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
  }
  auto section = [&](const std::string& name) {
    const auto s = tree.get_child_optional(name);
    return s ? *s : boost::property_tree::ptree{};
  };
  using detail::get_value;

  RunConfig cfg;
  {
    const auto s = section("corpus");
    for (const auto& p : detail::split_list(get_value<std::string>(s, "corpus", "paths", "")))
      cfg.corpus.paths.push_back(detail::resolve(base_dir, p));
    try {
      if (const auto v = s.get_optional<std::string>("start")) cfg.corpus.start = parse_iso8601(*v);
      if (const auto v = s.get_optional<std::string>("end")) cfg.corpus.end = parse_iso8601(*v);
    } catch (const DataError& e) {
      throw ConfigError(std::string("[corpus] ") + e.what());
    }
    cfg.corpus.max_unit_chars = get_value<std::size_t>(s, "corpus", "max_unit_chars", cfg.corpus.max_unit_chars);
  }
  {
    const auto s = section("engine");
    auto& e = cfg.engine;
    e.granularity_days = get_value<int>(s, "engine", "granularity_days", e.granularity_days);
    e.window = get_value<SliceIndex>(s, "engine", "window", e.window);
    e.merge_threshold = get_value<double>(s, "engine", "merge_threshold", e.merge_threshold);
    e.decay = get_value<double>(s, "engine", "decay", e.decay);
    e.decay_mode = decay_mode_from_string(get_value<std::string>(s, "engine", "decay_mode", std::string(to_string(e.decay_mode))));
    e.slope_min_points = get_value<std::size_t>(s, "engine", "slope_min_points", e.slope_min_points);
    e.archive_floor = get_value<double>(s, "engine", "archive_floor", e.archive_floor);
  }
  {
    const auto s = section("extraction");
    auto& x = cfg.extraction;
    x.reduced_dim = get_value<std::size_t>(s, "extraction", "reduced_dim", x.reduced_dim);
    x.n_neighbors = get_value<std::size_t>(s, "extraction", "n_neighbors", x.n_neighbors);
    x.min_cluster_size = get_value<std::size_t>(s, "extraction", "min_cluster_size", x.min_cluster_size);
    x.min_samples = get_value<std::size_t>(s, "extraction", "min_samples", x.min_samples);
    x.allow_single_cluster = get_value<bool>(s, "extraction", "allow_single_cluster", x.allow_single_cluster);
    x.top_n_words = get_value<std::size_t>(s, "extraction", "top_n_words", x.top_n_words);
    x.max_ngram = get_value<int>(s, "extraction", "max_ngram", x.max_ngram);
    x.seed = get_value<std::uint64_t>(s, "extraction", "seed", x.seed);
  }
  {
    const auto s = section("zeroshot");
    cfg.zeroshot.default_beta = get_value<double>(s, "zeroshot", "beta", cfg.zeroshot.default_beta);
    if (const auto v = s.get_optional<std::string>("topics_file")) cfg.zeroshot.topics_file = detail::resolve(base_dir, *v);
  }
  {
    const auto s = section("embeddings");
    auto& m = cfg.embeddings;
    const auto provider = get_value<std::string>(s, "embeddings", "provider", "precomputed");
    if (provider == "precomputed")
      m.kind = ProviderKind::precomputed_file;
    else if (provider == "http")
      m.kind = ProviderKind::http_service;
    else
      throw ConfigError("[embeddings] provider must be 'precomputed' or 'http'");
    m.location = get_value<std::string>(s, "embeddings", "location", "");
    if (m.kind == ProviderKind::precomputed_file && !m.location.empty())
      m.location = detail::resolve(base_dir, m.location).string();
    m.expected_dim = get_value<std::size_t>(s, "embeddings", "dim", m.expected_dim);
    m.normalize = get_value<bool>(s, "embeddings", "normalize", m.normalize);
    m.batch_size = get_value<std::size_t>(s, "embeddings", "batch_size", m.batch_size);
    m.max_in_flight = get_value<std::size_t>(s, "embeddings", "max_in_flight", m.max_in_flight);
    m.max_retries = get_value<int>(s, "embeddings", "max_retries", m.max_retries);
    m.backoff_ms = get_value<int>(s, "embeddings", "backoff_ms", m.backoff_ms);
    m.timeout_s = get_value<int>(s, "embeddings", "timeout_s", m.timeout_s);
  }
  {
    const auto s = section("llm");
    auto& l = cfg.llm;
    l.endpoint = get_value<std::string>(s, "llm", "endpoint", l.endpoint);
    l.model = get_value<std::string>(s, "llm", "model", l.model);
    l.temperature = get_value<double>(s, "llm", "temperature", l.temperature);
    l.max_tokens = get_value<int>(s, "llm", "max_tokens", l.max_tokens);
    l.timeout_s = get_value<int>(s, "llm", "timeout_s", l.timeout_s);
    l.max_retries = get_value<int>(s, "llm", "max_retries", l.max_retries);
    l.backoff_ms = get_value<int>(s, "llm", "backoff_ms", l.backoff_ms);
    l.max_in_flight = get_value<std::size_t>(s, "llm", "max_in_flight", l.max_in_flight);
    cfg.dossier.excerpts_per_slice = get_value<std::size_t>(s, "llm", "excerpts_per_slice", cfg.dossier.excerpts_per_slice);
    cfg.dossier.excerpt_chars = get_value<std::size_t>(s, "llm", "excerpt_chars", cfg.dossier.excerpt_chars);
  }
  {
    const auto s = section("output");
    if (const auto v = s.get_optional<std::string>("snapshot_dir")) cfg.snapshot_dir = detail::resolve(base_dir, *v);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  return parse_run_config(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

namespace detail {

/// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

/// Writes `cfg` back as INI. Paths are written as given (absolute after loading).
inline std::string format_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  using detail::format_number;
  out << "[corpus]\npaths = ";
  for (std::size_t i = 0; i < cfg.corpus.paths.size(); ++i) out << (i ? ", " : "") << cfg.corpus.paths[i].string();
  out << '\n';
  if (cfg.corpus.start) out << "start = " << format_iso8601(*cfg.corpus.start) << '\n';
  if (cfg.corpus.end) out << "end = " << format_iso8601(*cfg.corpus.end) << '\n';
  out << "max_unit_chars = " << cfg.corpus.max_unit_chars << "\n\n";
  const auto& e = cfg.engine;
  out << "[engine]\ngranularity_days = " << e.granularity_days << "\nwindow = " << e.window
      << "\nmerge_threshold = " << format_number(e.merge_threshold) << "\ndecay = " << format_number(e.decay) << "\ndecay_mode = " << to_string(e.decay_mode)
      << "\nslope_min_points = " << e.slope_min_points << "\narchive_floor = " << format_number(e.archive_floor) << "\n\n";
  const auto& x = cfg.extraction;
  out << "[extraction]\nreduced_dim = " << x.reduced_dim << "\nn_neighbors = " << x.n_neighbors << "\nmin_cluster_size = " << x.min_cluster_size
      << "\nmin_samples = " << x.min_samples << "\nallow_single_cluster = " << (x.allow_single_cluster ? "true" : "false")
      << "\ntop_n_words = " << x.top_n_words << "\nmax_ngram = " << x.max_ngram << "\nseed = " << x.seed << "\n\n";
  out << "[zeroshot]\nbeta = " << format_number(cfg.zeroshot.default_beta) << '\n';
  if (cfg.zeroshot.topics_file) out << "topics_file = " << cfg.zeroshot.topics_file->string() << '\n';
  const auto& m = cfg.embeddings;
  out << "\n[embeddings]\nprovider = " << (m.kind == ProviderKind::http_service ? "http" : "precomputed")
      << "\nlocation = " << m.location << "\ndim = " << m.expected_dim << "\nnormalize = " << (m.normalize ? "true" : "false")
      << "\nbatch_size = " << m.batch_size << "\nmax_in_flight = " << m.max_in_flight << "\nmax_retries = " << m.max_retries
      << "\nbackoff_ms = " << m.backoff_ms << "\ntimeout_s = " << m.timeout_s << "\n\n";
  const auto& l = cfg.llm;
  out << "[llm]\n";
  if (!l.endpoint.empty()) out << "endpoint = " << l.endpoint << '\n';
  if (!l.model.empty()) out << "model = " << l.model << '\n';
  out << "temperature = " << format_number(l.temperature) << "\nmax_tokens = " << l.max_tokens << "\ntimeout_s = " << l.timeout_s
      << "\nmax_retries = " << l.max_retries << "\nbackoff_ms = " << l.backoff_ms << "\nmax_in_flight = " << l.max_in_flight
      << "\nexcerpts_per_slice = " << cfg.dossier.excerpts_per_slice << "\nexcerpt_chars = " << cfg.dossier.excerpt_chars
      << "\n\n";
  out << "[output]\nsnapshot_dir = " << cfg.snapshot_dir.string() << '\n';
  return out.str();
}

}  // namespace trendlens
