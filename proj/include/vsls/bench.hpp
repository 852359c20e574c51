#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsls/metrics.hpp"
#include "vsls/search.hpp"
#include "vsls/synth.hpp"

namespace vsls {

// Metrics of one search against a scenario query, with label-Jaccard similarity.
EvalReport evaluate_on_scenario(const Scenario& scenario, const ScenarioQuery& query,
                                const std::vector<ScoredFrame>& keyframes, double delta_seconds);

struct BenchEntry {
  TemplateKind kind = TemplateKind::spatial;
  std::uint64_t seed = 0;
  FrameIndex n_frames = 300;
};

struct BenchSuite {
  std::vector<BenchEntry> entries;
  SearchConfig config;
  double delta_frames = 5.0;
};

struct RunMetrics {
  double temporal_coverage = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
};

struct BenchEntryResult {
  BenchEntry entry;
  std::optional<RunMetrics> relations;
  std::optional<RunMetrics> baseline;
  std::string error;
};

struct VariantAggregate {
  double temporal_coverage = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double iterations = 0.0;
  double wall_ms = 0.0;
  int runs = 0;
};

struct BenchReport {
  std::vector<BenchEntryResult> entries;
  VariantAggregate relations;
  VariantAggregate baseline;
  int failures = 0;
  // Share of successful entries where relations strictly raised coverage.
  double strict_improvement_fraction = 0.0;
};

// 50 entries cycling the four relation templates.
BenchSuite default_bench_suite();
// {"entries": [{"template", "seed", "n_frames"}], "config": {...}, "delta_frames": num}.
// Throws InvalidConfig; an empty entry list is an error.
BenchSuite bench_suite_from_json(const nlohmann::json& doc);

// Runs every entry with relations on and with all gammas at 0, same seed.
// Entry failures are recorded and the suite continues.
BenchReport run_bench(const BenchSuite& suite, int jobs = 0);
nlohmann::json bench_report_to_json(const BenchReport& report, const BenchSuite& suite);

}  // namespace vsls
