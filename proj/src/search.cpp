#include "vsls/search.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vsls/error.hpp"
#include "vsls/spline.hpp"

namespace vsls {
namespace {

std::int64_t isqrt(std::int64_t v) {
  if (v <= 0) return 0;
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

double bonus_total(const SearchState& state, FrameIndex frame, const QuerySpec& query,
                   const SearchConfig& cfg) {
  double total = 0.0;
  for (auto it = state.applied_bonuses.lower_bound({frame, 0});
       it != state.applied_bonuses.end() && it->first == frame; ++it) {
    total += cfg.alpha * cfg.gamma(query.relations[it->second].type);
  }
  return total;
}

void set_uniform(std::vector<double>& p) {
  const double u = 1.0 / static_cast<double>(p.size());
  std::fill(p.begin(), p.end(), u);
}

void normalize_in_place(std::vector<double>& values) {
  for (double& v : values) v = std::max(v, kMinProbabilityMass);
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  for (double& v : values) v /= sum;
}

double beta_draw(Rng& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng.engine());
  const double y = gb(rng.engine());
  const double s = x + y;
  return s > 0.0 ? x / s : 0.5;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SearchState init_state(FrameIndex n_frames, double duration_seconds, const QuerySpec& query,
                       const SearchConfig& cfg) {
  if (n_frames < 1) throw Error(ErrorCode::EmptyVideo, "video has no frames");
  cfg.validate();
  const auto n = static_cast<std::size_t>(n_frames);
  SearchState state;
  state.n_frames = n_frames;
  state.P.assign(n, 0.0);
  set_uniform(state.P);
  state.S.assign(n, 0.0);
  state.visit_count.assign(n, 0);
  state.observations.assign(n, 0);
  state.visited.assign(n, 0);
  state.touched.assign(n, 0);
  state.base.assign(n, 0.0);
  state.bonus.assign(n, 0.0);
  state.unvisited = n_frames;
  state.budget = cfg.budget.value_or(n_frames);
  for (const auto& label : query.key_labels()) state.remaining_key_objects.insert(normalize_label(label));
  state.iteration_cap = iteration_cap(duration_seconds);
  state.rng = Rng(cfg.seed);
  return state;
}

int choose_grid_size(const SearchState& state, const SearchConfig& cfg) {
  const std::int64_t k = std::min({isqrt(state.budget), static_cast<std::int64_t>(cfg.k_max),
                                   isqrt(state.unvisited)});
  return static_cast<int>(std::max<std::int64_t>(1, k));
}

std::vector<FrameIndex> sample_frames(SearchState& state, int k) {
  const auto positive = static_cast<std::int64_t>(
      std::count_if(state.P.begin(), state.P.end(), [](double p) { return p > 0.0; }));
  std::int64_t kk = std::max(1, k);
  while (kk > 1 && kk * kk > positive) --kk;
  const auto count = static_cast<std::size_t>(kk * kk);

  // Exponential keys log(u) / p; the largest `count` keys form the sample.
  std::vector<std::pair<double, FrameIndex>> keys;
  keys.reserve(state.P.size());
  for (std::size_t i = 0; i < state.P.size(); ++i) {
    const double u = state.rng.uniform_open();
    if (state.P[i] <= 0.0) continue;
    keys.emplace_back(std::log(u) / state.P[i], static_cast<FrameIndex>(i));
  }
  const auto take = std::min(count, keys.size());
  std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(take) - 1, keys.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<FrameIndex> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(keys[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

BonusUpdate apply_relation_bonuses(SearchState& state, std::span<const FrameIndex> sampled,
                                   const QuerySpec& query, const SearchConfig& cfg) {
  std::set<FrameIndex> touched_elsewhere;
  const std::set<FrameIndex> sampled_set(sampled.begin(), sampled.end());

  for (std::size_t r = 0; r < query.relations.size(); ++r) {
    const RelationTriplet& rel = query.relations[r];
    switch (rel.type) {
      case RelationType::spatial:
      case RelationType::attribute:
        for (const FrameIndex f : sampled) {
          const auto it = state.evidence.find(f);
          if (it == state.evidence.end()) continue;
          const bool ok = rel.type == RelationType::spatial
                              ? check_spatial(rel, it->second)
                              : check_attribute(rel, it->second, cfg.tau);
          if (ok) state.applied_bonuses.emplace(f, r);
        }
        break;
      case RelationType::time:
      case RelationType::causal:
        for (const FrameIndex f : relation_participants(rel, state.evidence, cfg.delta_t)) {
          if (state.applied_bonuses.emplace(f, r).second && !sampled_set.contains(f)) {
            touched_elsewhere.insert(f);
          }
        }
        break;
    }
  }

  BonusUpdate update;
  for (const FrameIndex f : sampled) update.sampled[f] = bonus_total(state, f, query, cfg);
  for (const FrameIndex f : touched_elsewhere) {
    const double total = bonus_total(state, f, query, cfg);
    if (total != state.bonus[f]) update.retroactive[f] = total;
  }
  return update;
}

void commit_scores(SearchState& state, const std::map<FrameIndex, double>& frame_scores) {
  for (auto& c : state.visit_count) ++c;
  for (const auto& [f, score] : frame_scores) {
    state.S[f] = score;
    state.visit_count[f] = 0;
    ++state.observations[f];
    if (!state.visited[f]) {
      state.visited[f] = 1;
      --state.unvisited;
    }
    state.touched[f] = 1;
  }
}

void diffuse_inverse_distance(std::span<double> scores, std::span<const FrameIndex> sources,
                              int window, std::vector<std::uint8_t>* touched) {
  std::vector<std::pair<FrameIndex, double>> snapshot;
  snapshot.reserve(sources.size());
  for (const FrameIndex f : sources) snapshot.emplace_back(f, scores[f]);
  const auto n = static_cast<FrameIndex>(scores.size());
  for (const auto& [f, value] : snapshot) {
    for (int d = 1; d <= window; ++d) {
      const double spread = value / (1.0 + d);
      for (const FrameIndex g : {f - d, f + d}) {
        if (g < 0 || g >= n) continue;
        scores[g] = std::max(scores[g], spread);
        if (touched) (*touched)[g] = 1;
      }
    }
  }
}

void diffuse_gaussian(std::span<double> scores, std::span<const FrameIndex> sources, double sigma,
                      std::vector<std::uint8_t>* touched) {
  std::vector<std::pair<FrameIndex, double>> snapshot;
  snapshot.reserve(sources.size());
  for (const FrameIndex f : sources) snapshot.emplace_back(f, scores[f]);
  const auto n = static_cast<FrameIndex>(scores.size());
  const auto radius = static_cast<FrameIndex>(std::floor(3.0 * sigma));
  for (const auto& [k, value] : snapshot) {
    for (FrameIndex t = std::max<FrameIndex>(0, k - radius); t <= std::min(n - 1, k + radius); ++t) {
      if (t == k) continue;
      const double dist = static_cast<double>(k - t);
      scores[t] += std::exp(-(dist * dist) / (2.0 * sigma * sigma)) * value;
      if (touched) (*touched)[t] = 1;
    }
  }
}

void diffuse_scores(SearchState& state, const SearchConfig& cfg) {
  if (cfg.diffusion_kernel == DiffusionKernel::gaussian) {
    diffuse_gaussian(state.S, state.updated, cfg.gaussian_sigma, &state.touched);
  } else {
    diffuse_inverse_distance(state.S, state.updated, cfg.diffusion_window, &state.touched);
  }
}

void refresh_distribution(SearchState& state, const SearchConfig& cfg) {
  const bool degenerate = std::all_of(state.S.begin(), state.S.end(), [](double s) { return s == 0.0; });
  if (degenerate) {
    set_uniform(state.P);
    return;
  }

  if (cfg.sampler == SamplerKind::thompson) {
    for (std::size_t f = 0; f < state.S.size(); ++f) {
      const double s = state.S[f];
      const double n = static_cast<double>(state.observations[f]);
      const double a = cfg.thompson_alpha0 + s * n;
      const double b = cfg.thompson_beta0 + n * (1.0 - std::min(s, 1.0));
      state.P[f] = beta_draw(state.rng, a, b);
    }
    normalize_in_place(state.P);
    return;
  }

  std::vector<double> xs, ys;
  for (std::size_t f = 0; f < state.S.size(); ++f) {
    if (!state.touched[f]) continue;
    xs.push_back(static_cast<double>(f));
    ys.push_back(state.S[f]);
  }
  if (xs.empty()) {
    set_uniform(state.P);
    return;
  }
  state.P = MonotoneCubic(std::move(xs), std::move(ys)).evaluate_integers(state.n_frames);
  normalize_in_place(state.P);
}

std::vector<ScoredFrame> top_k_visited(const SearchState& state, int K) {
  std::vector<ScoredFrame> frames;
  frames.reserve(state.evidence.size());
  for (const auto& [f, dets] : state.evidence) frames.push_back({f, state.S[f]});
  const auto take = std::min(frames.size(), static_cast<std::size_t>(std::max(K, 0)));
  std::partial_sort(frames.begin(), frames.begin() + static_cast<std::ptrdiff_t>(take), frames.end(),
                    [](const ScoredFrame& a, const ScoredFrame& b) {
                      return a.score != b.score ? a.score > b.score : a.frame < b.frame;
                    });
  frames.resize(take);
  return frames;
}

void mark_found(SearchState& state, const QuerySpec& query, const SearchConfig& cfg) {
  (void)query;
  for (const auto& top : top_k_visited(state, cfg.K)) {
    const auto it = state.evidence.find(top.frame);
    if (it == state.evidence.end()) continue;
    for (const auto& det : it->second) {
      if (det.confidence >= cfg.found_threshold) {
        state.remaining_key_objects.erase(normalize_label(det.label));
      }
    }
  }
}

SearchSession::SearchSession(FrameIndex n_frames, double duration_seconds, QuerySpec query,
                             DetectorBackend& backend, SearchConfig cfg, std::string video)
    : query_(std::move(query)),
      cfg_(std::move(cfg)),
      backend_(backend),
      video_(std::move(video)),
      vocabulary_(query_.vocabulary()),
      state_(init_state(n_frames, duration_seconds, query_, cfg_)) {}

bool SearchSession::done() const {
  return state_.budget <= 0 || state_.remaining_key_objects.empty() ||
         state_.iteration >= state_.iteration_cap;
}

const IterationRecord& SearchSession::iterate() {
  SearchState& st = state_;
  const std::vector<double> s_before = st.S;
  const std::vector<double> p_before = st.P;

  const std::vector<FrameIndex> sampled = sample_frames(st, choose_grid_size(st, cfg_));
  const int k = static_cast<int>(isqrt(static_cast<std::int64_t>(sampled.size())));

  for (auto& [f, dets] : cached_detect(backend_, cache_, video_, sampled, vocabulary_)) {
    st.evidence[f] = std::move(dets);
  }
  for (const FrameIndex f : sampled) st.base[f] = base_score(st.evidence[f], query_);

  BonusUpdate bonuses;
  if (cfg_.enable_relations) bonuses = apply_relation_bonuses(st, sampled, query_, cfg_);

  std::map<FrameIndex, double> scores;
  for (const FrameIndex f : sampled) {
    const auto it = bonuses.sampled.find(f);
    st.bonus[f] = it == bonuses.sampled.end() ? 0.0 : it->second;
    scores[f] = st.committed(f);
  }
  st.updated.assign(sampled.begin(), sampled.end());
  commit_scores(st, scores);
  for (const auto& [f, total] : bonuses.retroactive) {
    st.S[f] += total - st.bonus[f];
    st.bonus[f] = total;
    st.updated.push_back(f);
  }

  diffuse_scores(st, cfg_);
  refresh_distribution(st, cfg_);
  st.budget -= static_cast<std::int64_t>(k) * k;
  mark_found(st, query_, cfg_);
  ++st.iteration;

  IterationRecord record;
  record.iteration = st.iteration;
  record.k = k;
  record.sampled = sampled;
  for (const auto& [f, c] : scores) record.assigned.push_back({f, c});
  std::vector<std::uint8_t> is_sampled(st.S.size(), 0);
  for (const FrameIndex f : sampled) is_sampled[f] = 1;
  for (std::size_t f = 0; f < st.S.size(); ++f) {
    const bool score_changed = st.S[f] != s_before[f];
    const bool p_changed = st.P[f] != p_before[f] && f % static_cast<std::size_t>(cfg_.trace_stride) == 0;
    if (is_sampled[f] || score_changed || p_changed) {
      record.rows.push_back({static_cast<FrameIndex>(f), st.S[f], is_sampled[f] != 0, st.P[f]});
    }
  }
  record.remaining_key_objects.assign(st.remaining_key_objects.begin(), st.remaining_key_objects.end());
  record.budget_after = st.budget;
  trace_.iterations.push_back(std::move(record));
  return trace_.iterations.back();
}

SearchResult SearchSession::result() const {
  SearchResult out;
  out.keyframes = top_k_visited(state_, cfg_.K);
  out.iterations_used = state_.iteration;
  out.frames_detected = static_cast<std::int64_t>(state_.evidence.size());
  out.trace = trace_;
  return out;
}

SearchResult run_search(FrameIndex n_frames, double duration_seconds, const QuerySpec& query,
                        DetectorBackend& backend, const SearchConfig& cfg) {
  SearchSession session(n_frames, duration_seconds, query, backend, cfg);
  while (!session.done()) session.iterate();
  return session.result();
}

std::string trace_to_csv(const SearchTrace& trace) {
  std::string out = "iteration,frame_index,score,sampled,p_after_refresh\n";
  for (const auto& it : trace.iterations) {
    for (const auto& row : it.rows) {
      out += std::to_string(it.iteration) + "," + std::to_string(row.frame) + "," +
             format_double(row.score) + "," + (row.sampled ? "1" : "0") + "," +
             format_double(row.p_after_refresh) + "\n";
    }
  }
  return out;
}

nlohmann::json result_to_json(const SearchResult& result, double wall_ms) {
  nlohmann::json doc;
  doc["keyframes"] = nlohmann::json::array();
  for (const auto& kf : result.keyframes) {
    doc["keyframes"].push_back({{"frame", kf.frame}, {"score", kf.score}});
  }
  doc["iterations"] = result.iterations_used;
  doc["frames_detected"] = result.frames_detected;
  doc["wall_ms"] = wall_ms;
  return doc;
}

}  // namespace vsls
