#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <numeric>
#include <random>

#include "test_util.hpp"
#include "vsls/search.hpp"

using namespace vsls;
using vsls::testing::code_of;

namespace {

QuerySpec make_query(const std::string& text) { return validate_query(parse_grounding_text(text)).query; }

Detection det(FrameIndex f, const std::string& label, double conf, BBox box = {0.1, 0.1, 0.4, 0.4}) {
  return {f, label, conf, box};
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void expect_distribution(const std::vector<double>& p) {
  EXPECT_NEAR(sum(p), 1.0, 1e-9);
  for (double v : p) ASSERT_GE(v, 0.0);
}

}  // namespace

TEST(SearchInit, UniformStart) {
  const QuerySpec q = make_query("Key Objects: person, dog\n");
  const SearchState s = init_state(4, 4.0, q, {});
  EXPECT_EQ(s.P, (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  EXPECT_EQ(s.budget, 4);
  EXPECT_EQ(s.remaining_key_objects, (std::set<std::string>{"person", "dog"}));
  EXPECT_EQ(init_state(1, 1.0, q, {}).P, (std::vector<double>{1.0}));
  EXPECT_EQ(code_of([&] { init_state(0, 0.0, q, {}); }), ErrorCode::EmptyVideo);
  SearchConfig bad;
  bad.K = 0;
  EXPECT_EQ(code_of([&] { init_state(4, 4.0, q, bad); }), ErrorCode::InvalidConfig);
}

TEST(SearchInit, IterationCap) {
  EXPECT_EQ(iteration_cap(300.0), 30);
  EXPECT_EQ(iteration_cap(5.0), 1);
  EXPECT_EQ(iteration_cap(0.0), 1);
  EXPECT_EQ(iteration_cap(99.0), 9);
  EXPECT_EQ(iteration_cap(1e6), 1000);
}

TEST(SearchConfig, JsonRoundTripAndValidation) {
  SearchConfig cfg;
  cfg.K = 3;
  cfg.gamma_time = 0.25;
  cfg.budget = 40;
  cfg.sampler = SamplerKind::thompson;
  cfg.diffusion_kernel = DiffusionKernel::gaussian;
  const SearchConfig back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  EXPECT_DOUBLE_EQ(config_from_json(nlohmann::json{{"gamma", 0.0}}).gamma_causal, 0.0);
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json{{"sampler", "greedy"}}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json{{"K", "three"}}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { config_from_json(nlohmann::json::array()); }), ErrorCode::InvalidConfig);
  for (const char* field : {"tau", "k_max", "trace_stride", "budget"}) {
    const SearchConfig c = config_from_json(nlohmann::json{{field, 0}});
    EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig) << field;
  }
}

TEST(GridSize, Examples) {
  const QuerySpec q = make_query("Key Objects: a\n");
  SearchConfig cfg;
  SearchState s = init_state(100, 100.0, q, cfg);
  s.budget = 100;
  EXPECT_EQ(choose_grid_size(s, cfg), 8);
  s.budget = 9;
  EXPECT_EQ(choose_grid_size(s, cfg), 3);
  s.budget = 1;
  EXPECT_EQ(choose_grid_size(s, cfg), 1);
  s.budget = 100;
  s.unvisited = 10;
  EXPECT_EQ(choose_grid_size(s, cfg), 3);
}

TEST(Sampling, Examples) {
  const QuerySpec q = make_query("Key Objects: a\n");
  SearchState s = init_state(16, 16.0, q, {});
  std::vector<FrameIndex> all(16);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(sample_frames(s, 4), all);

  s.P.assign(16, 0.0);
  s.P[7] = 1.0;
  EXPECT_EQ(sample_frames(s, 1), (std::vector<FrameIndex>{7}));
  // k shrinks when too few frames have mass.
  EXPECT_EQ(sample_frames(s, 3), (std::vector<FrameIndex>{7}));
  s.P[9] = 1.0;
  s.P[2] = 1.0;
  s.P[3] = 1.0;
  EXPECT_EQ(sample_frames(s, 2), (std::vector<FrameIndex>{2, 3, 7, 9}));
}

TEST(Sampling, FrequencyMatchesProbability) {
  SearchState s = init_state(4, 4.0, make_query("Key Objects: a\n"), {.seed = 21});
  s.P = {0.7, 0.1, 0.1, 0.1};
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += sample_frames(s, 1).front() == 0;
  EXPECT_NEAR(hits / 10000.0, 0.70, 0.02);
}

TEST(Sampling, ChiSquaredGoodnessOfFit) {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    SearchConfig cfg;
    cfg.seed = 100 + trial;
    SearchState s = init_state(16, 16.0, make_query("Key Objects: a\n"), cfg);
    for (double& p : s.P) p = u(gen);
    const double total = sum(s.P);
    for (double& p : s.P) p /= total;
    std::vector<int> counts(16, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++counts[sample_frames(s, 1).front()];
    double chi2 = 0.0;
    for (int f = 0; f < 16; ++f) {
      const double expected = draws * s.P[f];
      chi2 += (counts[f] - expected) * (counts[f] - expected) / expected;
    }
    const double p_value = 1.0 - boost::math::cdf(boost::math::chi_squared(15), chi2);
    EXPECT_GT(p_value, 0.001) << "trial " << trial << " chi2 " << chi2;
  }
}

TEST(Sampling, DistinctAndSorted) {
  std::mt19937_64 gen(2);
  SearchState s = init_state(50, 50.0, make_query("Key Objects: a\n"), {.seed = 4});
  for (int i = 0; i < 200; ++i) {
    for (double& p : s.P) p = static_cast<double>(gen() % 5);
    if (sum(s.P) == 0) s.P[0] = 1;
    const int k = 1 + static_cast<int>(gen() % 5);
    const auto picked = sample_frames(s, k);
    ASSERT_TRUE(std::is_sorted(picked.begin(), picked.end()));
    ASSERT_EQ(std::adjacent_find(picked.begin(), picked.end()), picked.end());
    for (const FrameIndex f : picked) ASSERT_GT(s.P[f], 0.0);
  }
}

TEST(BaseScore, Examples) {
  const QuerySpec q = make_query("Key Objects: person\nCue Objects: book\n");
  const std::vector<Detection> both{det(0, "person", 0.9), det(0, "book", 0.8)};
  EXPECT_DOUBLE_EQ(base_score(both, q), 0.9);
  EXPECT_DOUBLE_EQ(base_score({}, q), 0.0);
  const std::vector<Detection> book{det(0, "book", 0.8)};
  EXPECT_DOUBLE_EQ(base_score(book, q), 0.4);
  const std::vector<Detection> other{det(0, "Chair", 0.99)};
  EXPECT_DOUBLE_EQ(base_score(other, q), 0.0);
}

TEST(Relations, Spatial) {
  const RelationTriplet rel{"person", RelationType::spatial, "vase"};
  const std::vector<Detection> both{det(0, "person", 0.9), det(0, "Vase", 0.5)};
  const std::vector<Detection> one{det(0, "person", 0.9)};
  EXPECT_TRUE(check_spatial(rel, both));
  EXPECT_FALSE(check_spatial(rel, one));
  EXPECT_FALSE(check_spatial(rel, {}));
}

TEST(Relations, Attribute) {
  const RelationTriplet rel{"person", RelationType::attribute, "red clothes"};
  const BBox b1{0.0, 0.0, 0.5, 0.5};
  const std::vector<Detection> same{det(0, "person", 0.9, b1), det(0, "red clothes", 0.9, b1)};
  EXPECT_TRUE(check_attribute(rel, same, 0.5));
  const std::vector<Detection> disjoint{det(0, "person", 0.9, b1), det(0, "red clothes", 0.9, {0.6, 0.6, 0.9, 0.9})};
  EXPECT_FALSE(check_attribute(rel, disjoint, 0.5));
  const std::vector<Detection> quarter{det(0, "person", 0.9, b1), det(0, "red clothes", 0.9, {0.25, 0.25, 0.75, 0.75})};
  EXPECT_FALSE(check_attribute(rel, quarter, 0.5));
  EXPECT_TRUE(check_attribute(rel, quarter, 0.2));
}

TEST(Relations, TimePairs) {
  const RelationTriplet rel{"dog", RelationType::time, "cat"};
  DetectionsByFrame ev{{10, {det(10, "dog", 0.9)}}, {12, {det(12, "cat", 0.9)}}};
  EXPECT_EQ(check_time_pairs(rel, ev, 5), (FramePairs{{10, 12}}));
  DetectionsByFrame far{{10, {det(10, "dog", 0.9)}}, {20, {det(20, "cat", 0.9)}}};
  EXPECT_TRUE(check_time_pairs(rel, far, 5).empty());
  ev[11] = {det(11, "dog", 0.9)};
  EXPECT_EQ(check_time_pairs(rel, ev, 5), (FramePairs{{10, 12}, {11, 12}}));
  // Window boundary: a gap of exactly delta_t is outside.
  DetectionsByFrame edge{{10, {det(10, "dog", 0.9)}}, {15, {det(15, "cat", 0.9)}}};
  EXPECT_TRUE(check_time_pairs(rel, edge, 5).empty());
  DetectionsByFrame inside{{10, {det(10, "dog", 0.9)}}, {14, {det(14, "cat", 0.9)}}};
  EXPECT_EQ(check_time_pairs(rel, inside, 5).size(), 1u);
}

TEST(Relations, SelfTimePairs) {
  const RelationTriplet rel{"dog", RelationType::time, "dog"};
  DetectionsByFrame ev{{3, {det(3, "dog", 0.9)}}, {5, {det(5, "dog", 0.9)}}, {30, {det(30, "dog", 0.9)}}};
  EXPECT_EQ(check_time_pairs(rel, ev, 5), (FramePairs{{3, 5}}));
}

TEST(Relations, CausalPairs) {
  const RelationTriplet rel{"girl", RelationType::causal, "pieces"};
  EXPECT_EQ(check_causal_pairs(rel, {{5, {det(5, "girl", 0.9)}}, {9, {det(9, "pieces", 0.9)}}}),
            (FramePairs{{5, 9}}));
  EXPECT_TRUE(check_causal_pairs(rel, {{9, {det(9, "girl", 0.9)}}, {5, {det(5, "pieces", 0.9)}}}).empty());
  EXPECT_TRUE(check_causal_pairs(rel, {{5, {det(5, "girl", 0.9), det(5, "pieces", 0.9)}}}).empty());
}

// Frames in some pair equal the pair-enumeration result on random evidence.
TEST(Relations, ParticipantsMatchPairEnumeration) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 400; ++trial) {
    DetectionsByFrame ev;
    for (int i = 0; i < 12; ++i) {
      const FrameIndex f = rng() % 40;
      ev[f].push_back(det(f, rng() % 2 ? "a" : "b", 0.9));
    }
    const int delta = static_cast<int>(rng() % 7);
    for (const RelationTriplet& rel : {RelationTriplet{"a", RelationType::time, "b"},
                                       RelationTriplet{"a", RelationType::time, "a"},
                                       RelationTriplet{"a", RelationType::causal, "b"}}) {
      const FramePairs pairs = rel.type == RelationType::time ? check_time_pairs(rel, ev, delta)
                                                              : check_causal_pairs(rel, ev);
      std::set<FrameIndex> expected;
      for (const auto& [a, b] : pairs) {
        expected.insert(a);
        expected.insert(b);
      }
      ASSERT_EQ(relation_participants(rel, ev, delta), expected) << trial;
    }
  }
}

TEST(RelationBonus, Examples) {
  const QuerySpec q = make_query(
      "Key Objects: person\nCue Objects: vase, red clothes\n"
      "Rel: (person; spatial; vase), (person; attribute; red clothes)\n");
  SearchConfig cfg;
  SearchState s = init_state(10, 10.0, q, cfg);
  const BBox box{0.2, 0.2, 0.6, 0.8};
  s.evidence[2] = {det(2, "person", 0.5, box), det(2, "vase", 0.5, {0.7, 0.7, 0.9, 0.9})};
  s.evidence[4] = {det(4, "person", 0.5, box), det(4, "vase", 0.5, {0.7, 0.7, 0.9, 0.9}),
                   det(4, "red clothes", 0.5, {0.3, 0.3, 0.5, 0.5})};
  s.evidence[6] = {det(6, "person", 0.5, box)};
  const std::vector<FrameIndex> sampled{2, 4, 6};
  const BonusUpdate u = apply_relation_bonuses(s, sampled, q, cfg);
  EXPECT_NEAR(base_score(s.evidence[2], q) + u.sampled.at(2), 0.65, 1e-12);
  EXPECT_NEAR(u.sampled.at(4), 0.30, 1e-12);
  EXPECT_EQ(u.sampled.at(6), 0.0);
  EXPECT_TRUE(u.retroactive.empty());

  // Re-applying to the same frames adds nothing new.
  const auto before = s.applied_bonuses;
  const BonusUpdate again = apply_relation_bonuses(s, sampled, q, cfg);
  EXPECT_EQ(s.applied_bonuses, before);
  EXPECT_EQ(again.sampled, u.sampled);

  const QuerySpec plain = make_query("Key Objects: person\n");
  SearchState t = init_state(10, 10.0, plain, cfg);
  t.evidence = s.evidence;
  for (const auto& [f, b] : apply_relation_bonuses(t, sampled, plain, cfg).sampled) EXPECT_EQ(b, 0.0);
}

TEST(RelationBonus, TimeRelationReachesEarlierFrames) {
  const QuerySpec q = make_query("Key Objects: dog, cat\nRel: (dog; time; cat)\n");
  SearchConfig cfg;
  SearchState s = init_state(30, 30.0, q, cfg);
  s.evidence[10] = {det(10, "dog", 0.9)};
  const std::vector<FrameIndex> first{10};
  EXPECT_EQ(apply_relation_bonuses(s, first, q, cfg).sampled.at(10), 0.0);
  s.evidence[12] = {det(12, "cat", 0.9)};
  const std::vector<FrameIndex> second{12};
  const BonusUpdate u = apply_relation_bonuses(s, second, q, cfg);
  EXPECT_NEAR(u.sampled.at(12), 0.15, 1e-12);
  ASSERT_TRUE(u.retroactive.contains(10));
  EXPECT_NEAR(u.retroactive.at(10), 0.15, 1e-12);
}

TEST(CommitScores, Overwrite) {
  SearchState s = init_state(5, 5.0, make_query("Key Objects: a\n"), {});
  s.S[1] = 0.9;
  commit_scores(s, {{1, 0.2}});
  EXPECT_EQ(s.S[1], 0.2);
  EXPECT_EQ(s.visit_count[1], 0);
  EXPECT_EQ(s.visit_count[0], 1);
  EXPECT_EQ(s.visited[1], 1);
  EXPECT_EQ(s.unvisited, 4);
  commit_scores(s, {{1, 0.3}});
  EXPECT_EQ(s.unvisited, 4);
  EXPECT_EQ(s.observations[1], 2);
  EXPECT_EQ(s.visit_count[0], 2);
}

TEST(Diffusion, InverseDistanceExamples) {
  std::vector<double> s(9, 0.0);
  s[4] = 1.0;
  const std::vector<FrameIndex> src{4};
  diffuse_inverse_distance(s, src, 2);
  EXPECT_EQ(s, (std::vector<double>{0, 0, 1.0 / 3, 0.5, 1.0, 0.5, 1.0 / 3, 0, 0}));

  std::vector<double> z(5, 0.0);
  z[2] = 1.0;
  diffuse_inverse_distance(z, src, 0);
  EXPECT_EQ(z, (std::vector<double>{0, 0, 1, 0, 0}));

  std::vector<double> m{0.9, 1.0, 0.0};
  const std::vector<FrameIndex> one{1};
  diffuse_inverse_distance(m, one, 1);
  EXPECT_EQ(m[0], 0.9);
  EXPECT_EQ(m[2], 0.5);

  // Boundary clamp.
  std::vector<double> edge{1.0, 0.0};
  const std::vector<FrameIndex> zero{0};
  diffuse_inverse_distance(edge, zero, 5);
  EXPECT_EQ(edge, (std::vector<double>{1.0, 0.5}));
}

TEST(Diffusion, SourcesReadFromSnapshot) {
  std::vector<double> s{0, 0, 0, 0, 0, 1.0, 0.0, 0.0};
  const std::vector<FrameIndex> src{5, 6};
  diffuse_inverse_distance(s, src, 1);
  EXPECT_EQ(s[6], 0.5);
  EXPECT_EQ(s[7], 0.0);
}

TEST(Diffusion, InverseDistanceNeverDecreases) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> s(40);
    for (double& v : s) v = u(gen) < 0.5 ? 0.0 : u(gen);
    std::vector<FrameIndex> src;
    for (int i = 0; i < 5; ++i) src.push_back(static_cast<FrameIndex>(gen() % 40));
    const auto before = s;
    std::vector<std::uint8_t> touched(40, 0);
    diffuse_inverse_distance(s, src, static_cast<int>(gen() % 8), &touched);
    for (std::size_t i = 0; i < s.size(); ++i) ASSERT_GE(s[i], before[i]);
  }
}

TEST(Diffusion, Gaussian) {
  std::vector<double> s(21, 0.0);
  s[10] = 1.0;
  s[11] = 0.5;
  const std::vector<FrameIndex> src{10, 11};
  std::vector<std::uint8_t> touched(21, 0);
  diffuse_gaussian(s, src, 1.0, &touched);
  EXPECT_NEAR(s[10], 1.0 + std::exp(-0.5) * 0.5, 1e-15);
  EXPECT_NEAR(s[11], 0.5 + std::exp(-0.5) * 1.0, 1e-15);
  EXPECT_NEAR(s[13], std::exp(-4.5) + std::exp(-2.0) * 0.5, 1e-15);
  EXPECT_NEAR(s[14], std::exp(-4.5) * 0.5, 1e-15);
  EXPECT_EQ(s[15], 0.0);
  EXPECT_EQ(s[6], 0.0);
  EXPECT_TRUE(touched[7] && touched[14] && !touched[6] && !touched[15]);
}

TEST(Refresh, DegenerateIsUniform) {
  SearchState s = init_state(8, 8.0, make_query("Key Objects: a\n"), {});
  s.P = {1, 0, 0, 0, 0, 0, 0, 0};
  refresh_distribution(s, {});
  for (double p : s.P) EXPECT_DOUBLE_EQ(p, 0.125);
}

TEST(Refresh, SingleCommittedFramePeaks) {
  SearchConfig cfg;
  SearchState s = init_state(40, 40.0, make_query("Key Objects: a\n"), cfg);
  commit_scores(s, {{20, 1.0}});
  s.updated = {20};
  diffuse_scores(s, cfg);
  refresh_distribution(s, cfg);
  expect_distribution(s.P);
  const auto peak = std::max_element(s.P.begin(), s.P.end()) - s.P.begin();
  EXPECT_EQ(peak, 20);
  for (int f = 1; f <= 20; ++f) EXPECT_GE(s.P[f], s.P[f - 1]);
  for (int f = 21; f < 40; ++f) EXPECT_LE(s.P[f], s.P[f - 1]);
  EXPECT_GT(s.P.front(), 0.0);
}

TEST(Refresh, AlwaysAValidDistribution) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 1.3);
  for (const SamplerKind sampler : {SamplerKind::score_proportional, SamplerKind::thompson}) {
    for (int trial = 0; trial < 200; ++trial) {
      SearchConfig cfg;
      cfg.sampler = sampler;
      cfg.seed = trial;
      SearchState s = init_state(30, 30.0, make_query("Key Objects: a\n"), cfg);
      std::map<FrameIndex, double> scores;
      for (int i = 0; i < 1 + static_cast<int>(gen() % 6); ++i) scores[gen() % 30] = u(gen) < 0.3 ? 0.0 : u(gen);
      commit_scores(s, scores);
      for (const auto& [f, v] : scores) s.updated.push_back(f);
      diffuse_scores(s, cfg);
      refresh_distribution(s, cfg);
      expect_distribution(s.P);
    }
  }
}

TEST(Refresh, ThompsonIsSeeded) {
  const auto run = [](std::uint64_t seed) {
    SearchConfig cfg;
    cfg.sampler = SamplerKind::thompson;
    cfg.seed = seed;
    SearchState s = init_state(12, 12.0, make_query("Key Objects: a\n"), cfg);
    commit_scores(s, {{3, 0.8}, {9, 0.2}});
    refresh_distribution(s, cfg);
    return s.P;
  };
  EXPECT_EQ(run(5), run(5));
  EXPECT_NE(run(5), run(6));
}

TEST(TopK, TiesAndShortLists) {
  SearchState s = init_state(10, 10.0, make_query("Key Objects: a\n"), {});
  for (FrameIndex f : {1, 3, 5, 7}) s.evidence[f] = {};
  s.S = {9, 0.5, 9, 0.7, 9, 0.5, 9, 0.1, 9, 9};
  EXPECT_EQ(top_k_visited(s, 3), (std::vector<ScoredFrame>{{3, 0.7}, {1, 0.5}, {5, 0.5}}));
  EXPECT_EQ(top_k_visited(s, 10).size(), 4u);
}

TEST(MarkFound, Threshold) {
  const QuerySpec q = make_query("Key Objects: person, dog\n");
  SearchConfig cfg;
  cfg.K = 1;
  SearchState s = init_state(10, 10.0, q, cfg);
  s.evidence[2] = {det(2, "person", 0.9)};
  s.evidence[3] = {det(3, "Dog", 0.9)};
  s.S[2] = 0.9;
  s.S[3] = 0.5;
  mark_found(s, q, cfg);
  EXPECT_EQ(s.remaining_key_objects, (std::set<std::string>{"dog"}));

  SearchState low = init_state(10, 10.0, q, cfg);
  low.evidence[2] = {det(2, "person", 0.4)};
  low.S[2] = 0.4;
  mark_found(low, q, cfg);
  EXPECT_EQ(low.remaining_key_objects.size(), 2u);
}
