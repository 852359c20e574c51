#include "vsls/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "vsls/error.hpp"
#include "vsls/io.hpp"

namespace vsls {
namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

BBox lerp(const BBox& a, const BBox& b, double t) {
  return {a.x0 + t * (b.x0 - a.x0), a.y0 + t * (b.y0 - a.y0), a.x1 + t * (b.x1 - a.x1),
          a.y1 + t * (b.y1 - a.y1)};
}

BBox shifted(const BBox& b, double dx, double dy) {
  return {b.x0 + dx, b.y0 + dy, b.x1 + dx, b.y1 + dy};
}

// Box in the given relative position inside `outer`.
BBox inner_box(const BBox& outer, double fx0, double fy0, double fx1, double fy1) {
  return {outer.x0 + fx0 * outer.width(), outer.y0 + fy0 * outer.height(),
          outer.x0 + fx1 * outer.width(), outer.y0 + fy1 * outer.height()};
}

struct Builder {
  const ScenarioTemplate& tmpl;
  Rng rng;
  std::vector<ObjectTrack> tracks;

  double between(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
  int between_int(int lo, int hi) {
    return lo + static_cast<int>(rng.engine()() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  ObjectTrack& track(const std::string& label, bool distractor, double conf) {
    for (auto& t : tracks) {
      if (t.label == label && t.distractor == distractor) return t;
    }
    ObjectTrack t;
    t.label = label;
    t.distractor = distractor;
    t.conf = conf;
    t.jitter = tmpl.jitter;
    tracks.push_back(std::move(t));
    return tracks.back();
  }

  // Appearance over [s, e] drifting from `box` by dx.
  void appear(const std::string& label, bool distractor, double conf, FrameIndex s, FrameIndex e,
              const BBox& box, double dx) {
    ObjectTrack& t = track(label, distractor, conf);
    t.intervals.emplace_back(s, e);
    t.bbox_keys.emplace_back(s, box);
    if (e > s) t.bbox_keys.emplace_back(e, shifted(box, dx, 0.0));
  }

  BBox person_box() {
    const double w = between(0.2, 0.3);
    const double h = between(0.45, 0.6);
    const double x = between(0.05, 0.2);
    const double y = between(0.1, 0.3);
    return BBox::from_xywh(x, y, w, h);
  }
  BBox right_box(double ylo, double yhi) {
    const double w = between(0.1, 0.15);
    const double h = between(0.1, 0.15);
    const double x = between(0.6, 0.8);
    const double y = between(ylo, yhi);
    return BBox::from_xywh(x, y, w, h);
  }
  double drift() { return between(-0.05, 0.05); }
};

struct Block {
  FrameIndex length = 0;
  std::function<void(Builder&, FrameIndex)> place;
};

void lay_out(Builder& b, std::vector<Block>& blocks, bool shuffle) {
  if (shuffle) {
    for (std::size_t i = blocks.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(b.rng.engine()() % i);
      std::swap(blocks[i - 1], blocks[j]);
    }
  }
  FrameIndex used = 0;
  for (const auto& blk : blocks) used += blk.length;
  const FrameIndex min_gaps = static_cast<FrameIndex>(b.tmpl.min_gap) *
                              static_cast<FrameIndex>(blocks.size() - 1);
  const FrameIndex slack = b.tmpl.n_frames - used - min_gaps;
  if (slack < 0) {
    throw Error(ErrorCode::InfeasibleTemplate,
                "template needs " + std::to_string(used + min_gaps) + " frames, video has " +
                    std::to_string(b.tmpl.n_frames));
  }
  std::vector<double> weights(blocks.size() + 1);
  for (double& w : weights) w = b.rng.uniform_open();
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<FrameIndex> extra(weights.size());
  FrameIndex assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    extra[i] = static_cast<FrameIndex>(std::floor(static_cast<double>(slack) * weights[i] / total));
    assigned += extra[i];
  }
  extra.back() += slack - assigned;

  FrameIndex cursor = extra[0];
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].place(b, cursor);
    cursor += blocks[i].length + b.tmpl.min_gap + extra[i + 1];
  }
}

WeightedObject key(const std::string& label) { return {label, kDefaultKeyWeight, ObjectKind::key}; }
WeightedObject cue(const std::string& label) { return {label, kDefaultCueWeight, ObjectKind::cue}; }

// Frames satisfying every relation of the query with the whole video known.
std::vector<FrameIndex> satisfying_frames(const Scenario& scenario, const QuerySpec& query) {
  SearchConfig cfg;
  cfg.set_all_gammas(1.0);
  cfg.alpha = 1.0;
  QuerySpec bonus_only = query;
  for (auto& obj : bonus_only.objects) obj.weight = 1e-12;
  const auto full = brute_force_search(scenario, bonus_only, cfg, 1);
  const double want = static_cast<double>(query.relations.size());
  std::vector<FrameIndex> out;
  for (FrameIndex f = 0; f < scenario.n_frames; ++f) {
    if (full.scores[f] >= want) out.push_back(f);
  }
  return out;
}

}  // namespace

bool ObjectTrack::covers(FrameIndex frame) const {
  const auto it = std::upper_bound(intervals.begin(), intervals.end(), frame,
                                   [](FrameIndex f, const auto& iv) { return f < iv.first; });
  if (it == intervals.begin()) return false;
  return frame <= std::prev(it)->second;
}

BBox ObjectTrack::bbox_at(FrameIndex frame) const {
  if (bbox_keys.empty()) return {0.0, 0.0, 1.0, 1.0};
  if (frame <= bbox_keys.front().first) return bbox_keys.front().second;
  if (frame >= bbox_keys.back().first) return bbox_keys.back().second;
  const auto it = std::upper_bound(bbox_keys.begin(), bbox_keys.end(), frame,
                                   [](FrameIndex f, const auto& k) { return f < k.first; });
  const auto& [f1, b1] = *it;
  const auto& [f0, b0] = *std::prev(it);
  return lerp(b0, b1, static_cast<double>(frame - f0) / static_cast<double>(f1 - f0));
}

std::set<std::string> Scenario::labels_at(FrameIndex frame) const {
  std::set<std::string> out;
  for (const auto& t : tracks) {
    if (t.covers(frame)) out.insert(normalize_label(t.label));
  }
  return out;
}

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::spatial: return "spatial";
    case TemplateKind::attribute: return "attribute";
    case TemplateKind::time: return "time";
    case TemplateKind::causal: return "causal";
    case TemplateKind::mixed: return "mixed";
    case TemplateKind::adversarial_empty: return "adversarial_empty";
  }
  return "unknown";
}

TemplateKind parse_template_kind(std::string_view name) {
  for (const auto kind : {TemplateKind::spatial, TemplateKind::attribute, TemplateKind::time,
                          TemplateKind::causal, TemplateKind::mixed, TemplateKind::adversarial_empty}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error(ErrorCode::InvalidScenario, "unknown template '" + std::string(name) + "'");
}

Scenario generate_scenario(const ScenarioTemplate& tmpl, std::uint64_t seed) {
  if (tmpl.n_frames < 1 || !(tmpl.fps > 0.0) || tmpl.min_event_length < 1 ||
      tmpl.max_event_length < tmpl.min_event_length || tmpl.distractors < 0 || tmpl.min_gap < 0 || tmpl.time_lag < 0 ||
      !(tmpl.key_conf > 0.0 && tmpl.key_conf <= 1.0) || !(tmpl.cue_conf > 0.0 && tmpl.cue_conf <= 1.0) ||
      tmpl.jitter < 0.0 || tmpl.jitter >= std::min(tmpl.key_conf, tmpl.cue_conf)) {
    throw Error(ErrorCode::InvalidScenario, "invalid scenario template parameters");
  }

  Builder b{tmpl, Rng(mix64(seed ^ fnv1a(to_string(tmpl.kind)))), {}};
  const double kc = tmpl.key_conf;
  const double cc = tmpl.cue_conf;
  const auto length = [&] { return static_cast<FrameIndex>(b.between_int(tmpl.min_event_length, tmpl.max_event_length)); };

  QuerySpec query;
  std::vector<Block> blocks;
  bool shuffle = true;

  switch (tmpl.kind) {
    case TemplateKind::spatial:
    case TemplateKind::adversarial_empty: {
      query.question = "What is the person next to the vase holding?";
      query.objects = {key("person"), cue("vase")};
      query.relations = {{"person", RelationType::spatial, "vase"}};
      if (tmpl.kind == TemplateKind::adversarial_empty) {
        for (int i = 0; i < std::max(1, tmpl.distractors); ++i) {
          const FrameIndex len = length();
          blocks.push_back({len, [len, kc, cc](Builder& bb, FrameIndex s) {
                              const double dx = bb.drift();
                              bb.appear("tree", false, kc, s, s + len - 1, bb.person_box(), dx);
                              bb.appear("car", false, cc, s, s + len - 1, bb.right_box(0.5, 0.7), dx);
                            }});
        }
        break;
      }
      const FrameIndex len = length();
      blocks.push_back({len, [len, kc, cc](Builder& bb, FrameIndex s) {
                          const double dx = bb.drift();
                          bb.appear("person", false, kc, s, s + len - 1, bb.person_box(), dx);
                          bb.appear("vase", false, cc, s, s + len - 1, bb.right_box(0.5, 0.7), dx);
                        }});
      for (int i = 0; i < tmpl.distractors; ++i) {
        const FrameIndex dl = length();
        blocks.push_back({dl, [dl, kc](Builder& bb, FrameIndex s) {
                            {
                              const BBox box = bb.person_box();
                              bb.appear("person", true, kc, s, s + dl - 1, box, bb.drift());
                            }
                          }});
      }
      break;
    }
    case TemplateKind::attribute: {
      query.question = "Where is the person in red clothes standing?";
      query.objects = {key("person"), cue("red clothes")};
      query.relations = {{"person", RelationType::attribute, "red clothes"}};
      const FrameIndex len = length();
      blocks.push_back({len, [len, kc, cc](Builder& bb, FrameIndex s) {
                          const double dx = bb.drift();
                          const BBox p = bb.person_box();
                          bb.appear("person", false, kc, s, s + len - 1, p, dx);
                          bb.appear("red clothes", false, cc, s, s + len - 1, inner_box(p, 0.15, 0.25, 0.85, 0.6), dx);
                        }});
      for (int i = 0; i < tmpl.distractors; ++i) {
        const FrameIndex dl = length();
        const bool with_clothes = i % 2 == 0;
        blocks.push_back({dl, [dl, kc, cc, with_clothes](Builder& bb, FrameIndex s) {
                            const double dx = bb.drift();
                            bb.appear("person", true, kc, s, s + dl - 1, bb.person_box(), dx);
                            if (with_clothes) {
                              bb.appear("red clothes", true, cc, s, s + dl - 1, bb.right_box(0.2, 0.6), dx);
                            }
                          }});
      }
      break;
    }
    case TemplateKind::time: {
      query.question = "What does the dog do right before the cat shows up?";
      query.objects = {key("dog"), cue("cat")};
      query.relations = {{"dog", RelationType::time, "cat"}};
      const FrameIndex len = length();
      const FrameIndex lag = std::min<FrameIndex>(tmpl.time_lag, len - 1);
      blocks.push_back({len + lag, [len, lag, kc, cc](Builder& bb, FrameIndex s) {
                          {
                            const BBox box = bb.person_box();
                            bb.appear("dog", false, kc, s, s + len - 1, box, bb.drift());
                          }
                          {
                            const BBox box = bb.right_box(0.5, 0.7);
                            bb.appear("cat", false, cc, s + lag, s + lag + len - 1, box, bb.drift());
                          }
                        }});
      for (int i = 0; i < tmpl.distractors; ++i) {
        const FrameIndex dl = length();
        if (i % 2 == 0) {
          blocks.push_back({dl, [dl, kc](Builder& bb, FrameIndex s) {
                              {
                                const BBox box = bb.person_box();
                                bb.appear("dog", true, kc, s, s + dl - 1, box, bb.drift());
                              }
                            }});
        } else {
          blocks.push_back({2 * dl, [dl, kc, cc](Builder& bb, FrameIndex s) {
                              {
                                const BBox box = bb.right_box(0.5, 0.7);
                                bb.appear("cat", true, cc, s, s + dl - 1, box, bb.drift());
                              }
                              {
                                const BBox box = bb.person_box();
                                bb.appear("dog", true, kc, s + dl, s + 2 * dl - 1, box, bb.drift());
                              }
                            }});
        }
      }
      break;
    }
    case TemplateKind::causal: {
      query.question = "What did the girl do before the vase lay in pieces?";
      query.objects = {key("girl"), cue("pieces")};
      query.relations = {{"girl", RelationType::causal, "pieces"}};
      shuffle = false;
      const FrameIndex len = length();
      blocks.push_back({len, [len, kc](Builder& bb, FrameIndex s) {
                          {
                            const BBox box = bb.person_box();
                            bb.appear("girl", false, kc, s, s + len - 1, box, bb.drift());
                          }
                        }});
      const FrameIndex plen = length();
      blocks.push_back({plen, [plen, cc](Builder& bb, FrameIndex s) {
                          bb.appear("pieces", false, cc, s, s + plen - 1, bb.right_box(0.7, 0.8), 0.0);
                        }});
      for (int i = 0; i < tmpl.distractors; ++i) {
        const FrameIndex dl = length();
        blocks.push_back({dl, [dl, kc](Builder& bb, FrameIndex s) {
                            {
                              const BBox box = bb.person_box();
                              bb.appear("girl", true, kc, s, s + dl - 1, box, bb.drift());
                            }
                          }});
      }
      break;
    }
    case TemplateKind::mixed: {
      query.question = "What is the person in red clothes next to the vase doing?";
      query.objects = {key("person"), cue("vase"), cue("red clothes")};
      query.relations = {{"person", RelationType::spatial, "vase"},
                         {"person", RelationType::attribute, "red clothes"}};
      const FrameIndex len = length();
      blocks.push_back({len, [len, kc, cc](Builder& bb, FrameIndex s) {
                          const double dx = bb.drift();
                          const BBox p = bb.person_box();
                          bb.appear("person", false, kc, s, s + len - 1, p, dx);
                          bb.appear("red clothes", false, cc, s, s + len - 1, inner_box(p, 0.15, 0.25, 0.85, 0.6), dx);
                          bb.appear("vase", false, cc, s, s + len - 1, bb.right_box(0.5, 0.7), dx);
                        }});
      for (int i = 0; i < tmpl.distractors; ++i) {
        const FrameIndex dl = length();
        const int variant = i % 3;
        blocks.push_back({dl, [dl, kc, cc, variant](Builder& bb, FrameIndex s) {
                            const double dx = bb.drift();
                            const BBox p = bb.person_box();
                            bb.appear("person", true, kc, s, s + dl - 1, p, dx);
                            if (variant == 0) bb.appear("vase", true, cc, s, s + dl - 1, bb.right_box(0.5, 0.7), dx);
                            if (variant == 1) {
                              bb.appear("red clothes", true, cc, s, s + dl - 1, inner_box(p, 0.15, 0.25, 0.85, 0.6), dx);
                            }
                          }});
      }
      break;
    }
  }

  lay_out(b, blocks, shuffle);

  Scenario scenario;
  scenario.n_frames = tmpl.n_frames;
  scenario.fps = tmpl.fps;
  scenario.seed = seed;
  scenario.tracks = std::move(b.tracks);
  for (auto& t : scenario.tracks) {
    std::sort(t.intervals.begin(), t.intervals.end());
    std::sort(t.bbox_keys.begin(), t.bbox_keys.end(),
              [](const auto& a, const auto& c) { return a.first < c.first; });
  }

  ScenarioQuery sq;
  sq.id = std::string(to_string(tmpl.kind)) + "-" + std::to_string(seed);
  sq.spec = query;
  if (tmpl.kind != TemplateKind::adversarial_empty) {
    sq.gt_keyframes = satisfying_frames(scenario, query);
    const auto ref = brute_force_search(scenario, query, SearchConfig{}, 1);
    if (sq.gt_keyframes.empty() ||
        !std::binary_search(sq.gt_keyframes.begin(), sq.gt_keyframes.end(), ref.top_k.front().frame)) {
      throw Error(ErrorCode::InfeasibleTemplate,
                  "exhaustive reference does not rank a ground-truth frame first");
    }
  }
  scenario.queries.push_back(std::move(sq));
  return scenario;
}

double track_confidence(const Scenario& scenario, const ObjectTrack& track, FrameIndex frame) {
  const std::uint64_t key =
      mix64(scenario.seed ^ mix64(static_cast<std::uint64_t>(frame) ^ mix64(fnv1a(normalize_label(track.label)))));
  const double u = bits_to_unit(key);
  const double conf = track.conf + track.jitter * (2.0 * u - 1.0);
  return std::clamp(conf, 1e-9, 1.0);
}

std::vector<Detection> oracle_detect(const Scenario& scenario, std::span<const FrameIndex> frames,
                                     std::span<const std::string> vocabulary) {
  std::set<std::string> vocab;
  for (const auto& v : vocabulary) vocab.insert(normalize_label(v));
  std::vector<const ObjectTrack*> visible;
  for (const auto& t : scenario.tracks) {
    if (vocab.contains(normalize_label(t.label))) visible.push_back(&t);
  }
  std::vector<Detection> out;
  for (const FrameIndex f : frames) {
    if (f < 0 || f >= scenario.n_frames) {
      throw Error(ErrorCode::InvalidScenario, "frame " + std::to_string(f) + " outside the scenario");
    }
    for (const ObjectTrack* t : visible) {
      if (!t->covers(f)) continue;
      out.push_back({f, t->label, track_confidence(scenario, *t, f), t->bbox_at(f)});
    }
  }
  return out;
}

ScenarioBackend::ScenarioBackend(std::shared_ptr<const Scenario> scenario)
    : scenario_(std::move(scenario)) {}

std::vector<Detection> ScenarioBackend::detect(std::span<const FrameRef> frames,
                                               std::span<const std::string> vocabulary) {
  ++calls_;
  std::vector<FrameIndex> indices;
  indices.reserve(frames.size());
  for (const auto& ref : frames) indices.push_back(ref.index);
  return oracle_detect(*scenario_, indices, vocabulary);
}

double label_gray_level(const Scenario& scenario, std::string_view label) {
  std::set<std::string> labels;
  for (const auto& t : scenario.tracks) labels.insert(normalize_label(t.label));
  std::vector<int> levels;
  for (int step = 32; step >= 1; step /= 2) {
    for (int v = step; v < 256; v += step) {
      if (v != 128 && std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
    }
  }
  const auto it = labels.find(normalize_label(label));
  if (it == labels.end()) return 0.0;
  const auto i = static_cast<std::size_t>(std::distance(labels.begin(), it));
  return static_cast<double>(levels[i % levels.size()]);
}

GrayImage render_frame(const Scenario& scenario, FrameIndex frame, int width, int height) {
  GrayImage img(width, height, 128.0);
  for (const auto& t : scenario.tracks) {
    if (!t.covers(frame)) continue;
    const BBox box = t.bbox_at(frame);
    const double level = label_gray_level(scenario, t.label);
    for (int y = 0; y < height; ++y) {
      const double cy = (y + 0.5) / height;
      if (cy < box.y0 || cy >= box.y1) continue;
      for (int x = 0; x < width; ++x) {
        const double cx = (x + 0.5) / width;
        if (cx >= box.x0 && cx < box.x1) img.at(x, y) = level;
      }
    }
  }
  return img;
}

RenderedFrameSource::RenderedFrameSource(std::shared_ptr<const Scenario> scenario, int width, int height)
    : scenario_(std::move(scenario)), width_(width), height_(height) {}

std::optional<GrayImage> RenderedFrameSource::raster(FrameIndex frame) const {
  if (frame < 0 || frame >= scenario_->n_frames) return std::nullopt;
  return render_frame(*scenario_, frame, width_, height_);
}

BruteForceResult brute_force_search(const Scenario& scenario, const QuerySpec& query,
                                    const SearchConfig& cfg, int K) {
  const FrameIndex n = scenario.n_frames;
  if (n > kBruteForceFrameLimit) {
    throw Error(ErrorCode::TooLarge, "exhaustive reference is limited to " +
                                         std::to_string(kBruteForceFrameLimit) + " frames");
  }

  std::vector<FrameIndex> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), FrameIndex{0});
  const auto vocab = query.vocabulary();
  std::vector<std::vector<Detection>> per_frame(all.size());
  for (auto& det : oracle_detect(scenario, all, vocab)) per_frame[det.frame_index].push_back(std::move(det));

  const auto weight_of = [&](const std::string& label) {
    double w = -1.0;
    for (const auto& obj : query.objects) {
      if (normalize_label(obj.label) == normalize_label(label)) w = std::max(w, obj.weight);
    }
    return w;
  };
  const auto present = [&](FrameIndex f, const std::string& label) {
    for (const auto& d : per_frame[f]) {
      if (normalize_label(d.label) == normalize_label(label)) return true;
    }
    return false;
  };

  BruteForceResult out;
  out.scores.assign(all.size(), 0.0);
  for (FrameIndex f = 0; f < n; ++f) {
    double best = 0.0;
    for (const auto& d : per_frame[f]) {
      const double w = weight_of(d.label);
      if (w >= 0.0) best = std::max(best, d.confidence * w);
    }
    out.scores[f] = best;
  }

  if (cfg.enable_relations) {
    std::vector<double> bonus(all.size(), 0.0);
    for (const auto& rel : query.relations) {
      std::vector<char> subj(all.size()), obj(all.size());
      for (FrameIndex f = 0; f < n; ++f) {
        subj[f] = present(f, rel.subject);
        obj[f] = present(f, rel.object);
      }
      const bool same = normalize_label(rel.subject) == normalize_label(rel.object);
      const double amount = cfg.alpha * cfg.gamma(rel.type);
      for (FrameIndex f = 0; f < n; ++f) {
        bool ok = false;
        switch (rel.type) {
          case RelationType::spatial:
            ok = subj[f] && obj[f];
            break;
          case RelationType::attribute:
            for (const auto& a : per_frame[f]) {
              for (const auto& c : per_frame[f]) {
                if (&a == &c) continue;
                if (normalize_label(a.label) != normalize_label(rel.subject) ||
                    normalize_label(c.label) != normalize_label(rel.object)) {
                  continue;
                }
                const double iw = std::max(0.0, std::min(a.bbox.x1, c.bbox.x1) - std::max(a.bbox.x0, c.bbox.x0));
                const double ih = std::max(0.0, std::min(a.bbox.y1, c.bbox.y1) - std::max(a.bbox.y0, c.bbox.y0));
                const double smaller = std::min((a.bbox.x1 - a.bbox.x0) * (a.bbox.y1 - a.bbox.y0),
                                                (c.bbox.x1 - c.bbox.x0) * (c.bbox.y1 - c.bbox.y0));
                if (smaller > 0.0 && iw * ih / smaller > cfg.tau) ok = true;
              }
            }
            break;
          case RelationType::time:
            for (FrameIndex g = 0; g < n && !ok; ++g) {
              // f as the earlier element, then f as the later one.
              if (subj[f] && obj[g] && f <= g && g - f < cfg.delta_t && !(same && f == g)) ok = true;
              if (subj[g] && obj[f] && g <= f && f - g < cfg.delta_t && !(same && f == g)) ok = true;
            }
            break;
          case RelationType::causal:
            for (FrameIndex g = 0; g < n && !ok; ++g) {
              if ((subj[f] && obj[g] && f < g) || (subj[g] && obj[f] && g < f)) ok = true;
            }
            break;
        }
        if (ok) bonus[f] += amount;
      }
    }
    for (FrameIndex f = 0; f < n; ++f) out.scores[f] += bonus[f];
  }

  std::vector<FrameIndex> order = all;
  std::stable_sort(order.begin(), order.end(),
                   [&](FrameIndex a, FrameIndex c) { return out.scores[a] > out.scores[c]; });
  const auto take = std::min(order.size(), static_cast<std::size_t>(std::max(K, 0)));
  for (std::size_t i = 0; i < take; ++i) out.top_k.push_back({order[i], out.scores[order[i]]});
  return out;
}

nlohmann::json scenario_to_json(const Scenario& scenario) {
  nlohmann::json tracks = nlohmann::json::array();
  for (const auto& t : scenario.tracks) {
    nlohmann::json intervals = nlohmann::json::array();
    for (const auto& [s, e] : t.intervals) intervals.push_back({s, e});
    nlohmann::json keys = nlohmann::json::array();
    for (const auto& [f, b] : t.bbox_keys) keys.push_back({f, {b.x0, b.y0, b.x1, b.y1}});
    tracks.push_back({{"label", t.label},
                      {"intervals", intervals},
                      {"bbox_keys", keys},
                      {"conf", t.conf},
                      {"jitter", t.jitter},
                      {"distractor", t.distractor}});
  }
  nlohmann::json queries = nlohmann::json::array();
  for (const auto& q : scenario.queries) {
    queries.push_back({{"id", q.id}, {"spec", query_to_json(q.spec)}, {"gt_keyframes", q.gt_keyframes}});
  }
  return {{"n_frames", scenario.n_frames},
          {"fps", scenario.fps},
          {"seed", scenario.seed},
          {"tracks", tracks},
          {"queries", queries}};
}

Scenario scenario_from_json(const nlohmann::json& doc) {
  const auto fail = [](const std::string& what) -> void { throw Error(ErrorCode::InvalidScenario, what); };
  Scenario sc;
  try {
    if (!doc.is_object()) fail("scenario must be a JSON object");
    sc.n_frames = doc.at("n_frames").get<FrameIndex>();
    sc.fps = doc.value("fps", 1.0);
    sc.seed = doc.value("seed", std::uint64_t{0});
    if (sc.n_frames < 1) fail("n_frames must be >= 1");
    if (!(sc.fps > 0.0) || !std::isfinite(sc.fps)) fail("fps must be > 0");
    for (const auto& jt : doc.at("tracks")) {
      ObjectTrack t;
      t.label = jt.at("label").get<std::string>();
      t.conf = jt.value("conf", 0.9);
      t.jitter = jt.value("jitter", 0.0);
      t.distractor = jt.value("distractor", false);
      if (normalize_label(t.label).empty()) fail("track label must be non-empty");
      if (!(t.conf > 0.0 && t.conf <= 1.0)) fail("track conf must lie in (0, 1]");
      if (t.jitter < 0.0 || !(t.conf - t.jitter > 0.0)) fail("track jitter must be >= 0 and below conf");
      for (const auto& iv : jt.at("intervals")) {
        const auto s = iv.at(0).get<FrameIndex>();
        const auto e = iv.at(1).get<FrameIndex>();
        if (s < 0 || e < s || e >= sc.n_frames) fail("track interval out of range");
        if (!t.intervals.empty() && s <= t.intervals.back().second) {
          fail("track intervals must be sorted and non-overlapping");
        }
        t.intervals.emplace_back(s, e);
      }
      for (const auto& k : jt.value("bbox_keys", nlohmann::json::array())) {
        const auto f = k.at(0).get<FrameIndex>();
        const auto& b = k.at(1);
        const BBox box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
        if (!box.valid()) fail("track bbox is not a valid normalized corner box");
        if (!t.bbox_keys.empty() && f <= t.bbox_keys.back().first) fail("bbox keys must be sorted by frame");
        t.bbox_keys.emplace_back(f, box);
      }
      for (const auto& [f, box] : t.bbox_keys) {
        if (!t.covers(f)) fail("bbox key frame outside the track intervals");
      }
      sc.tracks.push_back(std::move(t));
    }
    for (const auto& jq : doc.value("queries", nlohmann::json::array())) {
      ScenarioQuery q;
      q.id = jq.value("id", std::string{});
      q.spec = query_from_json(jq.at("spec"));
      q.gt_keyframes = jq.value("gt_keyframes", std::vector<FrameIndex>{});
      for (const FrameIndex f : q.gt_keyframes) {
        if (f < 0 || f >= sc.n_frames) fail("gt keyframe out of range");
      }
      sc.queries.push_back(std::move(q));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidScenario, std::string("malformed scenario: ") + e.what());
  }
  return sc;
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path, ErrorCode::InvalidScenario));
}

void save_scenario_file(const std::filesystem::path& path, const Scenario& scenario) {
  write_json_file(path, scenario_to_json(scenario));
}

}  // namespace vsls
