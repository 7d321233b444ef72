#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <unistd.h>

#include <spdlog/spdlog.h>

#include "trendlens/synth_bench.hpp"

namespace trendlens::testing {

inline const bool kQuietLogs = (spdlog::set_level(spdlog::level::warn), true);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("trendlens_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Relative path -> contents for every regular file below `dir`.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  if (!std::filesystem::exists(dir)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.emplace(std::filesystem::relative(e.path(), dir).string(), read_text_file(e.path()));
  return out;
}

/// Three steady topics and one that grows, over eight one-day slices.
inline synth::Scenario small_scenario() {
  synth::Scenario s;
  s.name = "small";
  s.seed = 99;
  s.dim = 8;
  s.slices = 8;
  s.extraction.reduced_dim = 4;
  const int rates[] = {3, 5, 8};
  const char* keys[] = {"harbor", "orchard", "glacier"};
  for (std::size_t i = 0; i < 3; ++i) {
    synth::PlantedTopic p;
    p.key = keys[i];
    p.center.axis = i + 1;
    p.spread = 0.03;
    p.schedule.assign(8, rates[i]);
    s.planted.push_back(p);
  }
  synth::PlantedTopic g;
  g.key = "rising";
  g.center.axis = 0;
  g.spread = 0.03;
  g.schedule = {0, 0, 2, 3, 5, 8, 12, 16};
  g.keywords = {"quantum", "qubit", "entanglement", "cryogenic"};
  g.emerging = true;
  s.planted.push_back(g);
  s.zeroshot.push_back({"rising-watch", "rising", 0.5, "quantum hardware"});
  return s;
}

}  // namespace trendlens::testing
