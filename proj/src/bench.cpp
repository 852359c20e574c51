#include "vsls/bench.hpp"

#include <atomic>
#include <chrono>
#include <future>
#include <thread>

#include "vsls/error.hpp"

namespace vsls {
namespace {

RunMetrics run_variant(const std::shared_ptr<const Scenario>& scenario, const ScenarioQuery& query,
                       const SearchConfig& cfg, double delta_seconds) {
  ScenarioBackend backend(scenario);
  const auto start = std::chrono::steady_clock::now();
  const SearchResult result =
      run_search(scenario->n_frames, scenario->duration_seconds(), query.spec, backend, cfg);
  const auto stop = std::chrono::steady_clock::now();
  const EvalReport report = evaluate_on_scenario(*scenario, query, result.keyframes, delta_seconds);
  RunMetrics m;
  m.temporal_coverage = report.temporal_coverage;
  m.precision = report.precision;
  m.recall = report.recall;
  m.iterations = result.iterations_used;
  m.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return m;
}

BenchEntryResult run_entry(const BenchEntry& entry, const BenchSuite& suite) {
  BenchEntryResult out;
  out.entry = entry;
  try {
    ScenarioTemplate tmpl;
    tmpl.kind = entry.kind;
    tmpl.n_frames = entry.n_frames;
    const auto scenario = std::make_shared<const Scenario>(generate_scenario(tmpl, entry.seed));
    const ScenarioQuery& query = scenario->queries.front();
    const double delta_seconds = suite.delta_frames / scenario->fps;

    SearchConfig on = suite.config;
    on.seed = entry.seed;
    SearchConfig off = on;
    off.set_all_gammas(0.0);
    out.relations = run_variant(scenario, query, on, delta_seconds);
    out.baseline = run_variant(scenario, query, off, delta_seconds);
  } catch (const std::exception& e) {
    out.relations.reset();
    out.baseline.reset();
    out.error = e.what();
  }
  return out;
}

void accumulate(VariantAggregate& agg, const RunMetrics& m) {
  agg.temporal_coverage += m.temporal_coverage;
  agg.precision += m.precision;
  agg.recall += m.recall;
  agg.iterations += m.iterations;
  agg.wall_ms += m.wall_ms;
  ++agg.runs;
}

void finish(VariantAggregate& agg) {
  if (agg.runs == 0) return;
  const double n = agg.runs;
  agg.temporal_coverage /= n;
  agg.precision /= n;
  agg.recall /= n;
  agg.iterations /= n;
  agg.wall_ms /= n;
}

nlohmann::json metrics_json(const RunMetrics& m) {
  return {{"temporal_coverage", m.temporal_coverage},
          {"precision", m.precision},
          {"recall", m.recall},
          {"iterations", m.iterations},
          {"wall_ms", m.wall_ms}};
}

nlohmann::json aggregate_json(const VariantAggregate& a) {
  return {{"mean_temporal_coverage", a.temporal_coverage},
          {"mean_precision", a.precision},
          {"mean_recall", a.recall},
          {"mean_iterations", a.iterations},
          {"mean_wall_ms", a.wall_ms},
          {"runs", a.runs}};
}

}  // namespace

EvalReport evaluate_on_scenario(const Scenario& scenario, const ScenarioQuery& query,
                                const std::vector<ScoredFrame>& keyframes, double delta_seconds) {
  const auto record = [&](FrameIndex f) {
    FrameRecord r;
    r.frame = f;
    r.timestamp = static_cast<double>(f) / scenario.fps;
    r.labels = scenario.labels_at(f);
    return r;
  };
  std::vector<FrameRecord> pred, gt;
  for (const auto& kf : keyframes) pred.push_back(record(kf.frame));
  for (const FrameIndex f : query.gt_keyframes) gt.push_back(record(f));
  return evaluate(pred, gt, delta_seconds, "label_jaccard",
                  [](const FrameRecord& a, const FrameRecord& b) { return label_jaccard_similarity(a, b); });
}

BenchSuite default_bench_suite() {
  BenchSuite suite;
  suite.config.K = 2;
  const TemplateKind kinds[] = {TemplateKind::spatial, TemplateKind::attribute, TemplateKind::time,
                                TemplateKind::causal};
  for (int i = 0; i < 50; ++i) suite.entries.push_back({kinds[i % 4], static_cast<std::uint64_t>(i + 1), 300});
  return suite;
}

BenchSuite bench_suite_from_json(const nlohmann::json& doc) {
  BenchSuite suite;
  try {
    if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "bench suite must be a JSON object");
    if (doc.contains("config")) suite.config = config_from_json(doc.at("config"), suite.config);
    suite.delta_frames = doc.value("delta_frames", suite.delta_frames);
    for (const auto& e : doc.at("entries")) {
      BenchEntry entry;
      entry.kind = parse_template_kind(e.at("template").get<std::string>());
      entry.seed = e.value("seed", std::uint64_t{0});
      entry.n_frames = e.value("n_frames", entry.n_frames);
      suite.entries.push_back(entry);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed bench suite: ") + e.what());
  }
  if (suite.entries.empty()) throw Error(ErrorCode::InvalidConfig, "bench suite has no entries");
  suite.config.validate();
  return suite;
}

BenchReport run_bench(const BenchSuite& suite, int jobs) {
  if (suite.entries.empty()) throw Error(ErrorCode::InvalidConfig, "bench suite has no entries");
  const int workers = std::max(1, jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency()));
  BenchReport report;
  report.entries.resize(suite.entries.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::future<void>> pool;
  for (int w = 0; w < std::min<int>(workers, static_cast<int>(suite.entries.size())); ++w) {
    pool.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < suite.entries.size(); i = next++) {
        report.entries[i] = run_entry(suite.entries[i], suite);
      }
    }));
  }
  for (auto& f : pool) f.get();

  int improved = 0;
  for (const auto& e : report.entries) {
    if (!e.relations || !e.baseline) {
      ++report.failures;
      continue;
    }
    accumulate(report.relations, *e.relations);
    accumulate(report.baseline, *e.baseline);
    if (e.relations->temporal_coverage > e.baseline->temporal_coverage) ++improved;
  }
  finish(report.relations);
  finish(report.baseline);
  if (report.relations.runs > 0) {
    report.strict_improvement_fraction = static_cast<double>(improved) / report.relations.runs;
  }
  return report;
}

nlohmann::json bench_report_to_json(const BenchReport& report, const BenchSuite& suite) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json item{{"template", to_string(e.entry.kind)}, {"seed", e.entry.seed}, {"n_frames", e.entry.n_frames}};
    if (e.relations) item["relations"] = metrics_json(*e.relations);
    if (e.baseline) item["baseline"] = metrics_json(*e.baseline);
    item["error"] = e.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(e.error);
    entries.push_back(std::move(item));
  }
  return {{"variants", {{"relations", aggregate_json(report.relations)}, {"baseline", aggregate_json(report.baseline)}}},
          {"temporal_coverage_gain", report.relations.temporal_coverage - report.baseline.temporal_coverage},
          {"strict_improvement_fraction", report.strict_improvement_fraction},
          {"iteration_ratio", report.baseline.iterations > 0 ? report.relations.iterations / report.baseline.iterations : 0.0},
          {"failures", report.failures},
          {"delta_frames", suite.delta_frames},
          {"phi", "label_jaccard"},
          {"config", config_to_json(suite.config)},
          {"entries", entries}};
}

}  // namespace vsls
