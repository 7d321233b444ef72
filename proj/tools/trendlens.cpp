// trendlens command line: ingest, run, serve, analyze, zeroshot, bench.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 data error,
// 4 embedding or LLM service failure.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "trendlens/api.hpp"
#include "trendlens/synth_bench.hpp"

using namespace trendlens;

namespace {

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

int print_response(const api::Response& r) {
  std::cout << r.body.dump(2) << '\n';
  if (r.status < 300) return 0;
  if (r.status == 502) return static_cast<int>(ErrorKind::upstream);
  if (r.status == 400 || r.status == 501) return static_cast<int>(ErrorKind::config);
  return static_cast<int>(ErrorKind::data);
}

synth::Scenario scenario_from(const std::string& name_or_path) {
  if (name_or_path == "a" || name_or_path == "b" || name_or_path == "c") return synth::builtin_scenario(name_or_path);
  return synth::load_scenario(name_or_path);
}

void print_bench_summary(const synth::BenchOutcome& o) {
  const auto& m = o.metrics;
  std::cout << "slices processed: " << o.run.processed << " of " << o.run.slice_count << '\n';
  if (m.overall.total)
    std::cout << "accuracy: " << m.overall.correct << "/" << m.overall.total << '\n';
  for (const auto& [cls, c] : m.per_class) std::cout << "  " << cls << ": " << c.correct << "/" << c.total << '\n';
  if (m.false_weak_rate) std::cout << "false weak rate: " << *m.false_weak_rate << '\n';
  for (const auto& p : m.planted) {
    std::string labels;
    for (const auto& l : p.predicted) labels += l ? static_cast<char>(std::toupper(to_string(*l)[0])) : '.';
    std::cout << "  " << p.key << " " << labels;
    if (p.detection_lead) std::cout << "  lead " << *p.detection_lead;
    if (p.strong_before_weak) std::cout << "  strong before weak";
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak and strong signal detection over timestamped text"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  std::string config_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("-c,--config", config_path, "INI config file")->required(); };

  auto* ingest = app.add_subcommand("ingest", "Validate a JSON Lines corpus and report counts");
  std::vector<std::string> ingest_paths;
  std::size_t max_unit_chars = corpus::kDefaultMaxUnitChars;
  ingest->add_option("inputs", ingest_paths, "Corpus files")->required();
  ingest->add_option("--max-unit-chars", max_unit_chars)->capture_default_str();

  auto* run = app.add_subcommand("run", "Process every slice not yet in the snapshot directory");
  add_config(run);
  std::optional<SliceIndex> stop_after;
  run->add_option("--stop-after-slice", stop_after, "Stop once this slice is persisted");

  auto* serve = app.add_subcommand("serve", "Serve the JSON API over a snapshot directory");
  add_config(serve);
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str()->check(CLI::Range(1, 65535));

  auto* analyze = app.add_subcommand("analyze", "Summarize a topic's evolution through the configured LLM");
  add_config(analyze);
  TopicId topic_id = 0;
  std::string up_to, out_path;
  analyze->add_option("--topic", topic_id)->required();
  analyze->add_option("--up-to", up_to, "Ignore slices starting after this date");
  analyze->add_option("-o,--out", out_path, "Write Markdown here instead of stdout");

  auto* zeroshot = app.add_subcommand("zeroshot", "Queue a zero-shot topic for the next run");
  add_config(zeroshot);
  std::string zs_name, zs_description;
  std::optional<double> zs_beta;
  zeroshot->add_option("--name", zs_name)->required();
  zeroshot->add_option("--description", zs_description)->required();
  zeroshot->add_option("--beta", zs_beta);

  auto* bench = app.add_subcommand("bench", "Synthetic benchmark scenarios");
  bench->require_subcommand(1);
  auto* bench_run = bench->add_subcommand("run", "Generate a scenario, run the pipeline and score it");
  std::string scenario_name, bench_out;
  int scale = 1;
  bench_run->add_option("-s,--scenario", scenario_name, "Built-in name (a, b, c) or scenario JSON file")->required();
  bench_run->add_option("-o,--out", bench_out, "Output directory")->required();
  bench_run->add_option("--scale", scale, "Multiply every planted count")->capture_default_str()->check(CLI::PositiveNumber);
  auto* bench_list = bench->add_subcommand("list", "List built-in scenarios");
  auto* bench_export = bench->add_subcommand("export", "Write built-in scenarios as JSON");
  std::string export_dir;
  bench_export->add_option("-o,--out", export_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("trendlens"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*ingest) {
      std::size_t docs = 0, units = 0, skipped = 0;
      for (const auto& p : ingest_paths) {
        const auto r = corpus::ingest_file(p);
        const auto u = corpus::preprocess_all(r.documents, max_unit_chars);
        std::cout << p << ": " << r.documents.size() << " documents, " << u.size() << " units, "
                  << r.skipped_malformed << " malformed, " << r.rejected_duplicates << " duplicates\n";
        docs += r.documents.size();
        units += u.size();
        skipped += r.skipped_malformed + r.rejected_duplicates;
      }
      if (ingest_paths.size() > 1)
        std::cout << "total: " << docs << " documents, " << units << " units, " << skipped << " skipped\n";
      return 0;
    }
    if (*run) {
      const auto cfg = load_run_config(config_path);
      const auto r = run_pipeline(cfg, PipelineOptions{stop_after});
      std::cout << "processed " << r.processed << " slices (" << r.slice_count << " total), "
                << r.final_snapshot.engine.topics().size() << " topics\n";
      return 0;
    }
    if (*serve) {
      const auto cfg = load_run_config(config_path);
      api::Service service(cfg);
      httplib::Server server;
      api::install_routes(server, service);
      g_server = &server;
      std::signal(SIGINT, stop_server);
      std::signal(SIGTERM, stop_server);
      spdlog::info("listening on {}:{}", host, port);
      if (!server.listen(host, port)) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
      return 0;
    }
    if (*analyze) {
      const auto cfg = load_run_config(config_path);
      api::Service service(cfg);
      const json body = up_to.empty() ? json::object() : json{{"up_to", up_to}};
      const auto r = service.analyze(std::to_string(topic_id), body.dump());
      if (r.status != 200) return print_response(r);
      for (const auto& w : r.body["warnings"]) spdlog::warn("{}", w.get<std::string>());
      const auto md = r.body["markdown"].get<std::string>();
      if (out_path.empty())
        std::cout << md;
      else
        write_text_file(out_path, md);
      return 0;
    }
    if (*zeroshot) {
      const auto cfg = load_run_config(config_path);
      api::Service service(cfg);
      json body{{"name", zs_name}, {"description", zs_description}};
      if (zs_beta) body["beta"] = *zs_beta;
      return print_response(service.add_zeroshot(body.dump()));
    }
    if (*bench_list) {
      for (const auto& n : {"a", "b", "c"}) {
        const auto s = synth::builtin_scenario(n);
        std::cout << n << ": " << s.slices << " slices of " << s.granularity_days << " day(s), " << s.planted.size()
                  << " planted topics\n";
      }
      return 0;
    }
    if (*bench_export) {
      std::filesystem::create_directories(export_dir);
      for (const auto& n : {"a", "b", "c"})
        write_text_file(std::filesystem::path(export_dir) / (std::string(n) + ".json"),
                        dump_canonical(json(synth::builtin_scenario(n))));
      return 0;
    }
    if (*bench_run) {
      auto s = scenario_from(scenario_name);
      if (scale != 1) s = s.scaled(scale);
      const auto o = synth::run_bench(s, bench_out);
      print_bench_summary(o);
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}
