#include "vsls/cli.hpp"

#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "vsls/bench.hpp"
#include "vsls/error.hpp"
#include "vsls/io.hpp"
#include "vsls/metrics.hpp"
#include "vsls/query.hpp"
#include "vsls/synth.hpp"

namespace vsls {
namespace fs = std::filesystem;

namespace {

// SearchConfig overrides given on the command line.
class ConfigFlags {
 public:
  void add_to(CLI::App& app) {
    num(app, "-K,--top-k", "K", "number of keyframes returned");
    num(app, "--alpha", "alpha", "relation bonus scale");
    num(app, "--gamma", "gamma", "weight of every relation type");
    num(app, "--gamma-spatial", "gamma_spatial", "");
    num(app, "--gamma-attribute", "gamma_attribute", "");
    num(app, "--gamma-time", "gamma_time", "");
    num(app, "--gamma-causal", "gamma_causal", "");
    num(app, "--tau", "tau", "attribute overlap threshold");
    num(app, "--delta-t", "delta_t", "time relation window in frames");
    num(app, "--diffusion-window", "diffusion_window", "");
    text(app, "--diffusion-kernel", "diffusion_kernel", "inverse_distance or gaussian");
    num(app, "--gaussian-sigma", "gaussian_sigma", "");
    text(app, "--sampler", "sampler", "score_proportional or thompson");
    num(app, "--thompson-alpha0", "thompson_alpha0", "");
    num(app, "--thompson-beta0", "thompson_beta0", "");
    num(app, "--k-max", "k_max", "largest grid side");
    num(app, "--found-threshold", "found_threshold", "");
    num(app, "--seed", "seed", "random seed");
    num(app, "--budget", "budget", "frame budget (default: frame count)");
    num(app, "--trace-stride", "trace_stride", "write distribution rows for every n-th frame");
    app.add_flag("--no-relations", no_relations_, "skip relation scoring entirely");
  }

  SearchConfig apply(SearchConfig cfg) const {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& [key, value] : numbers_) {
      if (!value.empty()) doc[key] = nlohmann::json::parse(value, nullptr, false);
    }
    for (const auto& [key, value] : texts_) {
      if (!value.empty()) doc[key] = value;
    }
    for (const auto& [key, value] : doc.items()) {
      if (value.is_discarded()) throw Error(ErrorCode::InvalidConfig, "bad value for " + key);
    }
    if (doc.contains("seed") && doc["seed"].is_number_integer() && doc["seed"].get<std::int64_t>() < 0) {
      throw Error(ErrorCode::InvalidConfig, "seed must be >= 0");
    }
    cfg = config_from_json(doc, cfg);
    if (no_relations_) cfg.enable_relations = false;
    return cfg;
  }

 private:
  void num(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = numbers_.emplace_back(key, std::string{}).second;
    app.add_option(flag, slot, help)->check(CLI::Number);
  }
  void text(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = texts_.emplace_back(key, std::string{}).second;
    app.add_option(flag, slot, help);
  }

  // Deques keep the bound strings at stable addresses.
  std::deque<std::pair<std::string, std::string>> numbers_;
  std::deque<std::pair<std::string, std::string>> texts_;
  bool no_relations_ = false;
};

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

void emit_json(const nlohmann::json& doc, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << doc.dump(2) << "\n";
    return;
  }
  ensure_dir(fs::path(path).parent_path());
  write_json_file(path, doc);
}

std::string frame_ranges(const std::vector<FrameIndex>& frames) {
  std::string out;
  for (std::size_t i = 0; i < frames.size();) {
    std::size_t j = i;
    while (j + 1 < frames.size() && frames[j + 1] == frames[j] + 1) ++j;
    if (!out.empty()) out += ",";
    out += std::to_string(frames[i]);
    if (j > i) out += "-" + std::to_string(frames[j]);
    i = j + 1;
  }
  return out.empty() ? "none" : out;
}

// --- ground ----------------------------------------------------------------

struct GroundArgs {
  std::string input;
  std::string out;
};

int cmd_ground(const GroundArgs& args, std::ostream& out, std::ostream& err) {
  const QuerySpec parsed = parse_grounding_text(read_text_file(args.input));
  const ValidatedQuery v = validate_query(parsed);
  for (const auto& w : v.warnings) err << "warning: " << w << "\n";
  emit_json(query_to_json(v.query), args.out, out);
  return 0;
}

// --- search ----------------------------------------------------------------

struct SearchArgs {
  std::string query;
  std::string query_id;
  std::string scenario;
  std::string backend;
  std::string video;
  std::string config;
  std::string out_dir = ".";
  double fps = 1.0;
  bool grid = false;
  ConfigFlags flags;
};

int cmd_search(SearchArgs& args, std::ostream& out, std::ostream& err) {
  SearchConfig cfg;
  if (!args.config.empty()) cfg = config_from_json(read_json_file(args.config, ErrorCode::InvalidConfig));
  cfg = args.flags.apply(cfg);
  cfg.validate();

  std::optional<BackendSpec> wire;
  std::string scenario_path = args.scenario;
  if (!args.backend.empty()) {
    BackendSpec spec = parse_backend_spec(args.backend);
    if (spec.kind == BackendSpec::Kind::scenario) {
      if (!scenario_path.empty() && scenario_path != spec.path) {
        throw Error(ErrorCode::InvalidConfig, "--scenario and --backend scenario: name different files");
      }
      scenario_path = spec.path;
    } else {
      wire = spec;
    }
  }
  if (!scenario_path.empty() && (wire || !args.video.empty())) {
    throw Error(ErrorCode::InvalidConfig, "give either a scenario or a video with a detector backend, not both");
  }
  if (scenario_path.empty() && (!wire || args.video.empty())) {
    throw Error(ErrorCode::InvalidConfig, "a scenario, or --video together with a pipe:/tcp: backend, is required");
  }
  if (!(args.fps > 0.0)) throw Error(ErrorCode::InvalidConfig, "--fps must be > 0");

  std::shared_ptr<const Scenario> scenario;
  if (!scenario_path.empty()) scenario = std::make_shared<const Scenario>(load_scenario_file(scenario_path));

  QuerySpec query;
  if (!args.query.empty()) {
    query = load_query_file(args.query);
  } else if (scenario && !scenario->queries.empty()) {
    const ScenarioQuery* picked = &scenario->queries.front();
    if (!args.query_id.empty()) {
      picked = nullptr;
      for (const auto& q : scenario->queries) {
        if (q.id == args.query_id) picked = &q;
      }
      if (!picked) throw Error(ErrorCode::InvalidQuery, "scenario has no query '" + args.query_id + "'");
    }
    query = picked->spec;
  } else {
    throw Error(ErrorCode::InvalidQuery, "no query given (--query)");
  }
  const ValidatedQuery validated = validate_query(query);
  for (const auto& w : validated.warnings) err << "warning: " << w << "\n";

  FrameIndex n_frames = 0;
  double duration = 0.0;
  std::unique_ptr<DetectorBackend> backend;
  if (scenario) {
    n_frames = scenario->n_frames;
    duration = scenario->duration_seconds();
    backend = std::make_unique<ScenarioBackend>(scenario);
  } else {
    if (!fs::is_directory(args.video)) throw Error(ErrorCode::Io, "video directory not found: " + args.video);
    auto frames = std::make_shared<const DirectoryFrameSource>(args.video);
    n_frames = frames->count_frames();
    if (n_frames < 1) throw Error(ErrorCode::EmptyVideo, "no frames found in " + args.video);
    duration = static_cast<double>(n_frames) / args.fps;
    backend = open_wire_backend(*wire, frames, args.grid);
  }

  const auto start = std::chrono::steady_clock::now();
  SearchSession session(n_frames, duration, validated.query, *backend, cfg);
  while (!session.done()) session.iterate();
  const SearchResult result = session.result();
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  if (static_cast<int>(result.keyframes.size()) < cfg.K) {
    err << "warning: only " << result.keyframes.size() << " frames were visited, fewer than K = " << cfg.K
        << "\n";
  }

  const fs::path dir = args.out_dir;
  ensure_dir(dir);
  write_json_file(dir / "result.json", result_to_json(result, wall_ms));
  write_text_file(dir / "trace.csv", trace_to_csv(result.trace));

  out << "keyframes:";
  for (const auto& kf : result.keyframes) out << " " << kf.frame;
  out << "\niterations: " << result.iterations_used << "\nframes detected: " << result.frames_detected << "\n";
  return 0;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string result;
  std::string annotations;
  std::string query_id;
  std::string scenario;
  std::string frames;
  std::string phi = "label_jaccard";
  double delta = 5.0;
  std::optional<double> fps;
  int width = 64;
  int height = 64;
  std::string out;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream&) {
  if (args.phi != "label_jaccard" && args.phi != "ssim") {
    throw Error(ErrorCode::InvalidConfig, "--phi must be label_jaccard or ssim");
  }
  if (!args.scenario.empty() && !args.frames.empty()) {
    throw Error(ErrorCode::InvalidConfig, "give either --scenario or --frames, not both");
  }
  if (!(args.delta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "--delta must be >= 0");

  const nlohmann::json result = read_json_file(args.result, ErrorCode::InvalidConfig);
  std::vector<FrameIndex> predicted;
  try {
    for (const auto& kf : result.at("keyframes")) predicted.push_back(kf.at("frame").get<FrameIndex>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed result file: ") + e.what());
  }

  const auto annotations = annotations_from_json(read_json_file(args.annotations, ErrorCode::InvalidConfig));
  const Annotation* ann = nullptr;
  if (args.query_id.empty()) {
    if (annotations.size() != 1) throw Error(ErrorCode::InvalidConfig, "--query-id is required");
    ann = &annotations.front();
  } else {
    for (const auto& a : annotations) {
      if (a.query_id == args.query_id) ann = &a;
    }
    if (!ann) throw Error(ErrorCode::InvalidConfig, "query id '" + args.query_id + "' not in annotations");
  }

  std::optional<Scenario> scenario;
  if (!args.scenario.empty()) scenario = load_scenario_file(args.scenario);
  std::optional<DirectoryFrameSource> frames;
  if (!args.frames.empty()) frames.emplace(args.frames);
  const double fps = args.fps.value_or(scenario ? scenario->fps : 1.0);
  if (!(fps > 0.0)) throw Error(ErrorCode::InvalidConfig, "--fps must be > 0");
  if (args.phi == "label_jaccard" && !scenario) {
    throw Error(ErrorCode::InvalidConfig, "label_jaccard needs --scenario for frame labels");
  }
  if (args.phi == "ssim" && !scenario && !frames) {
    throw Error(ErrorCode::InvalidConfig, "ssim needs --scenario or --frames for frame images");
  }

  const auto record = [&](FrameIndex f, double t) {
    FrameRecord r;
    r.frame = f;
    r.timestamp = t;
    if (scenario) r.labels = scenario->labels_at(f);
    if (args.phi == "ssim") {
      if (scenario) {
        r.image = render_frame(*scenario, f, args.width, args.height);
      } else {
        r.image = frames->raster(f);
        if (!r.image) throw Error(ErrorCode::Io, "missing frame image for frame " + std::to_string(f));
      }
    }
    return r;
  };

  std::vector<FrameRecord> pred, gt;
  for (const FrameIndex f : predicted) pred.push_back(record(f, static_cast<double>(f) / fps));
  if (!ann->gt_frames.empty()) {
    const bool have_times = ann->gt_timestamps.size() == ann->gt_frames.size();
    for (std::size_t i = 0; i < ann->gt_frames.size(); ++i) {
      const FrameIndex f = ann->gt_frames[i];
      gt.push_back(record(f, have_times ? ann->gt_timestamps[i] : static_cast<double>(f) / fps));
    }
  } else {
    for (const double t : ann->gt_timestamps) gt.push_back(record(static_cast<FrameIndex>(std::llround(t * fps)), t));
  }

  const SimilarityFn phi = args.phi == "ssim" ? SimilarityFn(ssim_similarity)
                                              : SimilarityFn([](const FrameRecord& a, const FrameRecord& b) {
                                                  return label_jaccard_similarity(a, b);
                                                });
  const EvalReport report = evaluate(pred, gt, args.delta, args.phi, phi);
  emit_json(report_to_json(report), args.out, out);
  return 0;
}

// --- gen -------------------------------------------------------------------

struct GenArgs {
  std::string name;
  ScenarioTemplate tmpl;
  std::uint64_t seed = 0;
  std::string out;
  std::string out_dir = ".";
  std::string annotations;
  std::string render_dir;
  int width = 64;
  int height = 64;
};

int cmd_gen(GenArgs& args, std::ostream& out, std::ostream&) {
  args.tmpl.kind = parse_template_kind(args.name);
  const Scenario scenario = generate_scenario(args.tmpl, args.seed);
  const fs::path path = args.out.empty() ? fs::path(args.out_dir) / "scenario.json" : fs::path(args.out);
  ensure_dir(path.parent_path());
  save_scenario_file(path, scenario);

  if (!args.annotations.empty()) {
    std::vector<Annotation> anns;
    for (const auto& q : scenario.queries) {
      Annotation a{q.id, q.gt_keyframes, {}};
      for (const FrameIndex f : q.gt_keyframes) a.gt_timestamps.push_back(static_cast<double>(f) / scenario.fps);
      anns.push_back(std::move(a));
    }
    ensure_dir(fs::path(args.annotations).parent_path());
    write_json_file(args.annotations, annotations_to_json(anns));
  }
  if (!args.render_dir.empty()) {
    ensure_dir(args.render_dir);
    char name[32];
    for (FrameIndex f = 0; f < scenario.n_frames; ++f) {
      std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(f));
      write_png(fs::path(args.render_dir) / name, render_frame(scenario, f, args.width, args.height));
    }
  }

  for (const auto& q : scenario.queries) {
    out << q.id << ": " << q.gt_keyframes.size() << " gt keyframes [" << frame_ranges(q.gt_keyframes) << "]\n";
  }
  return 0;
}

// --- bench -----------------------------------------------------------------

struct BenchArgs {
  std::string suite;
  std::string out;
  std::string out_dir = ".";
  int jobs = 0;
};

int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  const BenchSuite suite = args.suite.empty()
                               ? default_bench_suite()
                               : bench_suite_from_json(read_json_file(args.suite, ErrorCode::InvalidConfig));
  const BenchReport report = run_bench(suite, args.jobs);
  const fs::path path = args.out.empty() ? fs::path(args.out_dir) / "bench.json" : fs::path(args.out);
  ensure_dir(path.parent_path());
  write_json_file(path, bench_report_to_json(report, suite));

  for (const auto& e : report.entries) {
    if (!e.error.empty()) err << "entry " << to_string(e.entry.kind) << "/" << e.entry.seed << " failed: " << e.error << "\n";
  }
  out << "relations: TC " << report.relations.temporal_coverage << ", iterations " << report.relations.iterations
      << "\nbaseline:  TC " << report.baseline.temporal_coverage << ", iterations " << report.baseline.iterations
      << "\nimproved on " << report.strict_improvement_fraction * 100.0 << "% of " << report.relations.runs
      << " scenarios, " << report.failures << " failed\n";
  return 0;
}

}  // namespace

BackendSpec parse_backend_spec(const std::string& text) {
  BackendSpec spec;
  const auto colon = text.find(':');
  const std::string scheme = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (rest.empty()) throw Error(ErrorCode::InvalidConfig, "backend must look like pipe:CMD, tcp:HOST:PORT or scenario:PATH");
  if (scheme == "pipe") {
    spec.kind = BackendSpec::Kind::pipe;
    spec.command = rest;
  } else if (scheme == "scenario") {
    spec.kind = BackendSpec::Kind::scenario;
    spec.path = rest;
  } else if (scheme == "tcp") {
    spec.kind = BackendSpec::Kind::tcp;
    const auto sep = rest.rfind(':');
    if (sep == std::string::npos || sep == 0) throw Error(ErrorCode::InvalidConfig, "tcp backend needs HOST:PORT");
    spec.host = rest.substr(0, sep);
    const std::string port = rest.substr(sep + 1);
    try {
      std::size_t used = 0;
      spec.port = std::stoi(port, &used);
      if (used != port.size()) throw std::invalid_argument(port);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad tcp port '" + port + "'");
    }
    if (spec.port < 1 || spec.port > 65535) throw Error(ErrorCode::InvalidConfig, "tcp port out of range");
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown backend scheme '" + scheme + "'");
  }
  return spec;
}

std::unique_ptr<DetectorBackend> open_wire_backend(const BackendSpec& spec,
                                                   std::shared_ptr<const FrameSource> frames,
                                                   bool use_grid) {
  std::unique_ptr<LineChannel> channel;
  if (spec.kind == BackendSpec::Kind::pipe) {
    channel = open_pipe_channel(spec.command);
  } else if (spec.kind == BackendSpec::Kind::tcp) {
    channel = open_tcp_channel(spec.host, spec.port);
  } else {
    throw Error(ErrorCode::InvalidConfig, "scenario backends are not wire backends");
  }
  return std::make_unique<WireBackend>(std::move(channel), std::move(frames), WireBackendOptions{use_grid});
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relation-aware keyframe search over long videos"};
  app.require_subcommand(1);

  GroundArgs ground;
  auto* g = app.add_subcommand("ground", "parse grounding text into a query file");
  g->add_option("input", ground.input, "grounding text file")->required();
  g->add_option("-o,--out", ground.out, "output query JSON (default: stdout)");

  SearchArgs search;
  auto* s = app.add_subcommand("search", "run a keyframe search");
  s->add_option("--query", search.query, "query file (JSON or grounding text)");
  s->add_option("--query-id", search.query_id, "query of the scenario to run");
  s->add_option("--scenario", search.scenario, "scenario file used as the video");
  s->add_option("--backend", search.backend, "pipe:CMD | tcp:HOST:PORT | scenario:PATH");
  s->add_option("--video", search.video, "directory of numbered frame PNGs");
  s->add_option("--fps", search.fps, "frame rate of --video");
  s->add_option("--config", search.config, "SearchConfig JSON file");
  s->add_option("--out-dir", search.out_dir, "directory for result.json and trace.csv");
  s->add_flag("--grid", search.grid, "batch sampled frames into one grid image");
  search.flags.add_to(*s);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "score a search result against annotations");
  e->add_option("--result", eval.result, "result.json")->required();
  e->add_option("--annotations", eval.annotations, "annotation JSON")->required();
  e->add_option("--query-id", eval.query_id, "annotation entry to use");
  e->add_option("--scenario", eval.scenario, "scenario providing labels and rendered frames");
  e->add_option("--frames", eval.frames, "directory of numbered frame PNGs");
  e->add_option("--phi", eval.phi, "label_jaccard or ssim");
  e->add_option("--delta", eval.delta, "coverage tolerance in seconds");
  e->add_option("--fps", eval.fps, "frame rate for converting frames to seconds");
  e->add_option("--width", eval.width, "render width for ssim");
  e->add_option("--height", eval.height, "render height for ssim");
  e->add_option("-o,--out", eval.out, "output report (default: stdout)");

  GenArgs gen;
  auto* n = app.add_subcommand("gen", "generate a synthetic scenario");
  n->add_option("template", gen.name, "spatial, attribute, time, causal, mixed or adversarial_empty")->required();
  n->add_option("--n-frames", gen.tmpl.n_frames);
  n->add_option("--fps", gen.tmpl.fps);
  n->add_option("--seed", gen.seed);
  n->add_option("--min-event-length", gen.tmpl.min_event_length);
  n->add_option("--max-event-length", gen.tmpl.max_event_length);
  n->add_option("--distractors", gen.tmpl.distractors);
  n->add_option("--time-lag", gen.tmpl.time_lag);
  n->add_option("--jitter", gen.tmpl.jitter);
  n->add_option("--min-gap", gen.tmpl.min_gap);
  n->add_option("-o,--out", gen.out, "scenario file (default: OUT_DIR/scenario.json)");
  n->add_option("--out-dir", gen.out_dir);
  n->add_option("--annotations", gen.annotations, "also write an annotation file");
  n->add_option("--render-dir", gen.render_dir, "also write every frame as PNG");
  n->add_option("--width", gen.width);
  n->add_option("--height", gen.height);

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "compare relation-aware and relation-blind search on a suite");
  b->add_option("suite", bench.suite, "suite JSON (default: built-in 50-scenario suite)");
  b->add_option("-o,--out", bench.out, "report file (default: OUT_DIR/bench.json)");
  b->add_option("--out-dir", bench.out_dir);
  b->add_option("--jobs", bench.jobs, "parallel workers (default: all cores)");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& pe) {
      const int code = app.exit(pe, out, err);
      return code == 0 ? 0 : 2;
    }
    if (*g) return cmd_ground(ground, out, err);
    if (*s) return cmd_search(search, out, err);
    if (*e) return cmd_eval(eval, out, err);
    if (*n) return cmd_gen(gen, out, err);
    if (*b) return cmd_bench(bench, out, err);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace vsls
