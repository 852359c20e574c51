#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vsls/detect.hpp"
#include "vsls/query.hpp"
#include "vsls/random.hpp"

namespace vsls {

enum class DiffusionKernel { inverse_distance, gaussian };
enum class SamplerKind { score_proportional, thompson };

struct SearchConfig {
  int K = 8;
  double alpha = 0.3;
  double gamma_spatial = 0.5;
  double gamma_attribute = 0.5;
  double gamma_time = 0.5;
  double gamma_causal = 0.5;
  double tau = 0.5;
  int delta_t = 5;
  int diffusion_window = 5;
  DiffusionKernel diffusion_kernel = DiffusionKernel::inverse_distance;
  double gaussian_sigma = 2.0;
  SamplerKind sampler = SamplerKind::score_proportional;
  double thompson_alpha0 = 1.0;
  double thompson_beta0 = 1.0;
  int k_max = 8;
  double found_threshold = 0.6;
  std::uint64_t seed = 0;
  // Initial frame budget; the frame count when unset.
  std::optional<std::int64_t> budget;
  // When false the relation stage is skipped entirely (detection-only search).
  bool enable_relations = true;
  // Distribution rows are written for every n-th frame only.
  int trace_stride = 1;

  double gamma(RelationType type) const;
  void set_all_gammas(double value);
  // Throws InvalidConfig.
  void validate() const;
};

nlohmann::json config_to_json(const SearchConfig& cfg);
// Fields absent from `doc` keep their value from `base`.
SearchConfig config_from_json(const nlohmann::json& doc, SearchConfig base = {});

// min(1000, floor(0.1 * duration)), never below 1.
int iteration_cap(double duration_seconds);

inline constexpr double kMinProbabilityMass = 1e-6;

struct SearchState {
  FrameIndex n_frames = 0;
  std::vector<double> P;
  std::vector<double> S;
  std::vector<std::int64_t> visit_count;
  // Commits per frame; the observation count of the Thompson sampler.
  std::vector<std::int64_t> observations;
  std::vector<std::uint8_t> visited;
  // Committed or diffused-to at least once; these are the spline knots.
  std::vector<std::uint8_t> touched;
  std::vector<double> base;
  std::vector<double> bonus;
  std::int64_t unvisited = 0;

  std::int64_t budget = 0;
  std::set<std::string> remaining_key_objects;  // normalized labels
  std::set<std::pair<FrameIndex, std::size_t>> applied_bonuses;  // (frame, relation index)
  int iteration = 0;
  int iteration_cap = 1;
  Rng rng;

  // Every detection seen this session, by frame.
  DetectionsByFrame evidence;
  // Frames whose score changed in the current iteration; the diffusion sources.
  std::vector<FrameIndex> updated;

  double committed(FrameIndex f) const { return base[f] + bonus[f]; }
};

struct ScoredFrame {
  FrameIndex frame = 0;
  double score = 0.0;
  bool operator==(const ScoredFrame&) const = default;
};

struct TraceRow {
  FrameIndex frame = 0;
  double score = 0.0;
  bool sampled = false;
  double p_after_refresh = 0.0;
  bool operator==(const TraceRow&) const = default;
};

struct IterationRecord {
  int iteration = 0;
  int k = 0;
  std::vector<FrameIndex> sampled;
  std::vector<ScoredFrame> assigned;  // committed score per sampled frame
  // Frames that were sampled, changed score, or changed probability (strided).
  std::vector<TraceRow> rows;
  std::vector<std::string> remaining_key_objects;
  std::int64_t budget_after = 0;
  bool operator==(const IterationRecord&) const = default;
};

struct SearchTrace {
  std::vector<IterationRecord> iterations;
  bool operator==(const SearchTrace&) const = default;
};

struct SearchResult {
  std::vector<ScoredFrame> keyframes;
  int iterations_used = 0;
  std::int64_t frames_detected = 0;
  SearchTrace trace;
};

// Columns: iteration,frame_index,score,sampled,p_after_refresh
std::string trace_to_csv(const SearchTrace& trace);

// --- individual stages -----------------------------------------------------

SearchState init_state(FrameIndex n_frames, double duration_seconds, const QuerySpec& query,
                       const SearchConfig& cfg);

int choose_grid_size(const SearchState& state, const SearchConfig& cfg);

// k*k distinct frames drawn without replacement with probability proportional
// to P (exponential-key method), ascending. k shrinks if fewer frames have P > 0.
std::vector<FrameIndex> sample_frames(SearchState& state, int k);

// max over query-matching detections of confidence * weight; 0 when none match.
double base_score(std::span<const Detection> detections, const QuerySpec& query);

bool check_spatial(const RelationTriplet& rel, std::span<const Detection> frame_dets);
bool check_attribute(const RelationTriplet& rel, std::span<const Detection> frame_dets, double tau);

using FramePairs = std::set<std::pair<FrameIndex, FrameIndex>>;
FramePairs check_time_pairs(const RelationTriplet& rel, const DetectionsByFrame& dets_by_frame,
                            int delta_t);
FramePairs check_causal_pairs(const RelationTriplet& rel, const DetectionsByFrame& dets_by_frame);

// Frames that belong to at least one satisfying time or causal pair, computed
// without enumerating the pairs.
std::set<FrameIndex> relation_participants(const RelationTriplet& rel,
                                           const DetectionsByFrame& dets_by_frame, int delta_t);

struct BonusUpdate {
  // Total relation bonus of every sampled frame.
  std::map<FrameIndex, double> sampled;
  // New bonus totals of earlier-visited frames that joined a satisfying pair.
  std::map<FrameIndex, double> retroactive;
};

// Records satisfied (frame, relation) pairs in state.applied_bonuses; each pair
// contributes alpha * gamma to its frame exactly once.
BonusUpdate apply_relation_bonuses(SearchState& state, std::span<const FrameIndex> sampled,
                                   const QuerySpec& query, const SearchConfig& cfg);

// Overwrites S for the given frames and resets their visit counters.
void commit_scores(SearchState& state, const std::map<FrameIndex, double>& frame_scores);

// S[f +- d] = max(S[f +- d], S[f] / (1 + d)) for each source f and 1 <= d <= window.
// Source values are read before any update.
void diffuse_inverse_distance(std::span<double> scores, std::span<const FrameIndex> sources,
                              int window, std::vector<std::uint8_t>* touched = nullptr);
// S'(t) = S(t) + sum over sources k with 0 < |k - t| <= 3 sigma of
// exp(-(k - t)^2 / (2 sigma^2)) * S(k).
void diffuse_gaussian(std::span<double> scores, std::span<const FrameIndex> sources, double sigma,
                      std::vector<std::uint8_t>* touched = nullptr);

void diffuse_scores(SearchState& state, const SearchConfig& cfg);

void refresh_distribution(SearchState& state, const SearchConfig& cfg);

// Highest-S visited frames, ties to the lower index; fewer than K if fewer were visited.
std::vector<ScoredFrame> top_k_visited(const SearchState& state, int K);

void mark_found(SearchState& state, const QuerySpec& query, const SearchConfig& cfg);

// --- the loop --------------------------------------------------------------

class SearchSession {
 public:
  SearchSession(FrameIndex n_frames, double duration_seconds, QuerySpec query,
                DetectorBackend& backend, SearchConfig cfg, std::string video = "video");

  bool done() const;
  // Runs one sample/detect/score/diffuse/refresh round.
  const IterationRecord& iterate();
  SearchResult result() const;

  const SearchState& state() const { return state_; }
  const QuerySpec& query() const { return query_; }
  const SearchConfig& config() const { return cfg_; }

 private:
  QuerySpec query_;
  SearchConfig cfg_;
  DetectorBackend& backend_;
  std::string video_;
  std::vector<std::string> vocabulary_;
  DetectionCache cache_;
  SearchState state_;
  SearchTrace trace_;
};

SearchResult run_search(FrameIndex n_frames, double duration_seconds, const QuerySpec& query,
                        DetectorBackend& backend, const SearchConfig& cfg);

nlohmann::json result_to_json(const SearchResult& result, double wall_ms);

}  // namespace vsls
