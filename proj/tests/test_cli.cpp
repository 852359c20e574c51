#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "vsls/cli.hpp"
#include "vsls/io.hpp"
#include "vsls/synth.hpp"

using namespace vsls;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vsls");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Runs the installed binary through the shell, for the process-level exit code.
int binary(const std::string& args) {
  const std::string cmd = std::string(VSLS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("vsls_cli_" + std::to_string(::getpid()) + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }
  void write(const std::string& name, const std::string& text) const { write_text_file(dir / name, text); }

  fs::path dir;
};

nlohmann::json without_wall(nlohmann::json doc) {
  doc.erase("wall_ms");
  return doc;
}

}  // namespace

TEST_F(CliTest, GroundExample) {
  write("g.txt",
        "Key Objects: person, dog, red clothes\nCue Objects: grassy_area, leash, fence\n"
        "Rel: (person; attribute; red clothes), (person; spatial; dog)\n");
  const CliRun r = cli({"ground", p("g.txt"), "-o", p("q.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json_file(p("q.json"));
  EXPECT_EQ(doc.at("relations").size(), 2u);
  const CliRun stdout_run = cli({"ground", p("g.txt")});
  EXPECT_EQ(nlohmann::json::parse(stdout_run.out), doc);
}

TEST_F(CliTest, GroundErrors) {
  write("empty.txt", "");
  const CliRun empty = cli({"ground", p("empty.txt")});
  EXPECT_EQ(empty.code, 2);
  EXPECT_NE(empty.err.find("MissingSection"), std::string::npos) << empty.err;

  write("bad.txt", "Key Objects: a\nRel: (a; spatial)\n");
  const CliRun bad = cli({"ground", p("bad.txt")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("line 2, column 6"), std::string::npos) << bad.err;

  write("ok.txt", "Key Objects: a\nRel: (a; spatial; pieces)\n");
  write("file", "x");
  EXPECT_EQ(cli({"ground", p("ok.txt"), "-o", p("file") + "/q.json"}).code, 3);
  EXPECT_EQ(cli({"ground", p("missing.txt")}).code, 3);
  const CliRun warned = cli({"ground", p("ok.txt")});
  EXPECT_EQ(warned.code, 0);
  EXPECT_NE(warned.err.find("pieces"), std::string::npos);
}

TEST_F(CliTest, ProcessExitCodes) {
  EXPECT_EQ(binary("--help"), 0);
  EXPECT_EQ(binary("--no-such-flag"), 2);
  EXPECT_EQ(binary("gen nonsense --out-dir " + p("x")), 2);
  EXPECT_EQ(binary("gen spatial --n-frames 30 --out-dir " + p("x")), 2);
  EXPECT_EQ(binary("gen spatial --seed 2 --out-dir " + p("ok")), 0);
  EXPECT_EQ(binary("search --scenario " + p("ok/scenario.json") + " --out-dir " + p("run")), 0);
  EXPECT_EQ(binary("search --scenario " + p("nope.json")), 3);
  write("q.txt", "Key Objects: person\n");
  EXPECT_EQ(binary("search --video " + p("ok") + " --query " + p("q.txt") + " --backend tcp:127.0.0.1:1"), 2);
  EXPECT_EQ(binary("gen spatial --seed 2 --out-dir " + p("ok") + " --render-dir " + p("ok/frames") +
                   " --width 8 --height 8"),
            0);
  EXPECT_EQ(binary("search --video " + p("ok/frames") + " --query " + p("q.txt") + " --backend tcp:127.0.0.1:1"), 4);
}

TEST_F(CliTest, GenIsDeterministic) {
  ASSERT_EQ(cli({"gen", "causal", "--n-frames", "1000", "--seed", "7", "-o", p("a.json")}).code, 0);
  const CliRun again = cli({"gen", "causal", "--n-frames", "1000", "--seed", "7", "-o", p("b.json")});
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(read_text_file(p("a.json")), read_text_file(p("b.json")));
  EXPECT_NE(again.out.find("causal-7:"), std::string::npos);

  // Subject precedes object.
  const Scenario s = load_scenario_file(p("a.json"));
  FrameIndex girl = -1, pieces = -1;
  for (const auto& t : s.tracks) {
    if (t.label == "girl" && !t.distractor) girl = t.intervals.front().first;
    if (t.label == "pieces") pieces = t.intervals.front().first;
  }
  ASSERT_GE(girl, 0);
  ASSERT_GE(pieces, 0);
  EXPECT_LT(girl, pieces);

  ASSERT_EQ(cli({"gen", "adversarial_empty", "-o", p("adv.json"), "--annotations", p("adv_ann.json")}).code, 0);
  const Scenario adv = load_scenario_file(p("adv.json"));
  EXPECT_TRUE(adv.queries[0].gt_keyframes.empty());
}

TEST_F(CliTest, SearchOnScenario) {
  ASSERT_EQ(cli({"gen", "spatial", "--seed", "1", "-o", p("s.json"), "--annotations", p("ann.json")}).code, 0);
  const CliRun r = cli({"search", "--scenario", p("s.json"), "--seed", "1", "--out-dir", p("a")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto result = read_json_file(p("a/result.json"));
  ASSERT_FALSE(result.at("keyframes").empty());
  EXPECT_GE(result.at("iterations").get<int>(), 1);

  // Every keyframe sits within the coverage tolerance of some ground-truth frame.
  const Scenario s = load_scenario_file(p("s.json"));
  const auto& gt = s.queries[0].gt_keyframes;
  const FrameIndex top = result.at("keyframes")[0].at("frame").get<FrameIndex>();
  EXPECT_TRUE(std::any_of(gt.begin(), gt.end(), [&](FrameIndex g) { return std::abs(g - top) <= 5; }));

  ASSERT_EQ(cli({"search", "--scenario", p("s.json"), "--seed", "1", "--out-dir", p("b")}).code, 0);
  EXPECT_EQ(without_wall(read_json_file(p("b/result.json"))), without_wall(result));
  EXPECT_EQ(read_text_file(p("a/trace.csv")), read_text_file(p("b/trace.csv")));
}

TEST_F(CliTest, ZeroGammaMatchesBaseline) {
  ASSERT_EQ(cli({"gen", "time", "--seed", "3", "-o", p("s.json")}).code, 0);
  for (const std::string k : {"2", "8"}) {
    ASSERT_EQ(cli({"search", "--scenario", p("s.json"), "-K", k, "--found-threshold", "0.95", "--gamma", "0",
                   "--out-dir", p("g" + k)})
                  .code,
              0);
    ASSERT_EQ(cli({"search", "--scenario", p("s.json"), "-K", k, "--found-threshold", "0.95", "--no-relations",
                   "--out-dir", p("n" + k)})
                  .code,
              0);
    EXPECT_EQ(without_wall(read_json_file(p("g" + k + "/result.json"))).dump(),
              without_wall(read_json_file(p("n" + k + "/result.json"))).dump());
    EXPECT_EQ(read_text_file(p("g" + k + "/trace.csv")), read_text_file(p("n" + k + "/trace.csv")));
  }
}

TEST_F(CliTest, TraceReproducesKeyframeOrder) {
  ASSERT_EQ(cli({"gen", "mixed", "--seed", "4", "-o", p("s.json")}).code, 0);
  ASSERT_EQ(cli({"search", "--scenario", p("s.json"), "--found-threshold", "0.95", "--out-dir", p("r")}).code, 0);
  std::map<FrameIndex, double> final_score;
  std::set<FrameIndex> visited;
  std::istringstream in(read_text_file(p("r/trace.csv")));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string it, frame, score, sampled, prob;
    std::getline(row, it, ',');
    std::getline(row, frame, ',');
    std::getline(row, score, ',');
    std::getline(row, sampled, ',');
    std::getline(row, prob, ',');
    final_score[std::stoll(frame)] = std::stod(score);
    if (sampled == "1") visited.insert(std::stoll(frame));
  }
  std::vector<std::pair<double, FrameIndex>> ranked;
  for (const FrameIndex f : visited) ranked.emplace_back(-final_score[f], f);
  std::sort(ranked.begin(), ranked.end());
  const auto result = read_json_file(p("r/result.json"));
  const auto& kfs = result.at("keyframes");
  ASSERT_LE(kfs.size(), ranked.size());
  for (std::size_t i = 0; i < kfs.size(); ++i) {
    EXPECT_EQ(kfs[i].at("frame").get<FrameIndex>(), ranked[i].second);
    EXPECT_EQ(kfs[i].at("score").get<double>(), -ranked[i].first);
  }
}

TEST_F(CliTest, LargeKWarns) {
  ASSERT_EQ(cli({"gen", "spatial", "--seed", "5", "-o", p("s.json")}).code, 0);
  const CliRun r = cli({"search", "--scenario", p("s.json"), "-K", "400", "--out-dir", p("r")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("fewer than K"), std::string::npos);
  const auto result = read_json_file(p("r/result.json"));
  EXPECT_EQ(result.at("keyframes").size(), result.at("frames_detected").get<std::size_t>());
  EXPECT_LT(result.at("keyframes").size(), 400u);
}

TEST_F(CliTest, SearchInputErrors) {
  ASSERT_EQ(cli({"gen", "spatial", "--seed", "5", "-o", p("s.json")}).code, 0);
  fs::create_directories(dir / "frames");
  write("q.txt", "Key Objects: person\n");
  EXPECT_EQ(cli({"search"}).code, 2);
  EXPECT_EQ(cli({"search", "--scenario", p("s.json"), "--video", p("frames"), "--backend", "pipe:true"}).code, 2);
  EXPECT_EQ(cli({"search", "--scenario", p("s.json"), "--tau", "1.5"}).code, 2);
  EXPECT_EQ(cli({"search", "--scenario", p("s.json"), "--sampler", "greedy"}).code, 2);
  EXPECT_EQ(cli({"search", "--scenario", p("s.json"), "--query-id", "nope"}).code, 2);
  EXPECT_EQ(cli({"search", "--scenario", p("s.json"), "--backend", "ftp:x"}).code, 2);
  EXPECT_EQ(cli({"search", "--video", p("frames"), "--backend", "pipe:true", "--query", p("q.txt")}).code, 2);
  EXPECT_EQ(cli({"search", "--video", p("none"), "--backend", "pipe:true", "--query", p("q.txt")}).code, 3);
  write("cfg.json", "{\"K\": ");
  EXPECT_EQ(cli({"search", "--scenario", p("s.json"), "--config", p("cfg.json")}).code, 2);
  write("cfg2.json", "{\"K\": 3, \"alpha\": 0.2}");
  EXPECT_EQ(cli({"search", "--scenario", p("s.json"), "--config", p("cfg2.json"), "--out-dir", p("r")}).code, 0);
  EXPECT_EQ(read_json_file(p("r/result.json")).at("keyframes").size(), 3u);
  // A flag overrides the config file.
  EXPECT_EQ(cli({"search", "--scenario", p("s.json"), "--config", p("cfg2.json"), "-K", "1", "--out-dir", p("r")}).code, 0);
  EXPECT_EQ(read_json_file(p("r/result.json")).at("keyframes").size(), 1u);
}

TEST_F(CliTest, BackendFailures) {
  ASSERT_EQ(cli({"gen", "spatial", "--seed", "5", "-o", p("s.json"), "--render-dir", p("frames"), "--width", "16",
                 "--height", "16"})
                .code,
            0);
  write("q.txt", "Key Objects: person\nCue Objects: vase\nRel: (person; spatial; vase)\n");
  const std::string stub = STUB_DETECTOR_PATH;
  for (const auto& [backend, code] : std::vector<std::pair<std::string, int>>{
           {"pipe:" + stub + " error", 4},
           {"pipe:" + stub + " garbage", 4},
           {"pipe:" + stub + " exit", 4},
           {"pipe:/nonexistent/detector", 4},
           {"tcp:127.0.0.1:1", 4}}) {
    EXPECT_EQ(cli({"search", "--video", p("frames"), "--backend", backend, "--query", p("q.txt"), "--out-dir", p("r")}).code,
              code)
        << backend;
  }
}

// The pipe transport with oracle detections reproduces the in-process scenario backend.
TEST_F(CliTest, PipeBackendMatchesScenarioBackend) {
  for (const std::string kind : {"spatial", "time", "causal"}) {
    const std::string sc = p(kind + ".json");
    ASSERT_EQ(cli({"gen", kind, "--seed", "2", "-o", sc, "--render-dir", p(kind + "_frames"), "--width", "16",
                   "--height", "16"})
                  .code,
              0);
    const Scenario s = load_scenario_file(sc);
    write(kind + "_q.json", query_to_json(s.queries[0].spec).dump());
    ASSERT_EQ(cli({"search", "--scenario", sc, "--found-threshold", "0.95", "--out-dir", p(kind + "_direct")}).code, 0);
    const CliRun piped = cli({"search", "--video", p(kind + "_frames"), "--backend",
                           "pipe:" + std::string(STUB_DETECTOR_PATH) + " oracle " + sc, "--query", p(kind + "_q.json"),
                           "--found-threshold", "0.95", "--out-dir", p(kind + "_pipe")});
    ASSERT_EQ(piped.code, 0) << piped.err;
    EXPECT_EQ(without_wall(read_json_file(p(kind + "_pipe/result.json"))),
              without_wall(read_json_file(p(kind + "_direct/result.json"))));
    EXPECT_EQ(read_text_file(p(kind + "_pipe/trace.csv")), read_text_file(p(kind + "_direct/trace.csv")));

    const CliRun grid = cli({"search", "--video", p(kind + "_frames"), "--backend",
                          "pipe:" + std::string(STUB_DETECTOR_PATH) + " oracle " + sc, "--query", p(kind + "_q.json"),
                          "--grid", "--out-dir", p(kind + "_grid")});
    ASSERT_EQ(grid.code, 0) << grid.err;
    EXPECT_FALSE(read_json_file(p(kind + "_grid/result.json")).at("keyframes").empty());
  }
}

TEST_F(CliTest, Eval) {
  ASSERT_EQ(cli({"gen", "attribute", "--seed", "3", "-o", p("s.json"), "--annotations", p("ann.json")}).code, 0);
  const Scenario s = load_scenario_file(p("s.json"));
  nlohmann::json perfect{{"keyframes", nlohmann::json::array()}, {"iterations", 1}, {"frames_detected", 1}, {"wall_ms", 0}};
  for (const FrameIndex f : s.queries[0].gt_keyframes) perfect["keyframes"].push_back({{"frame", f}, {"score", 1.0}});
  write("perfect.json", perfect.dump());
  const CliRun r = cli({"eval", "--result", p("perfect.json"), "--annotations", p("ann.json"), "--scenario", p("s.json"),
                     "--delta", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report.at("precision"), 1.0);
  EXPECT_EQ(report.at("recall"), 1.0);
  EXPECT_EQ(report.at("temporal_coverage"), 1.0);

  // Disjoint predictions at zero tolerance cover nothing.
  nlohmann::json far = perfect;
  far["keyframes"] = nlohmann::json::array();
  for (FrameIndex f = 0; f < s.n_frames && far["keyframes"].size() < 3; ++f) {
    const auto& gt = s.queries[0].gt_keyframes;
    if (!std::binary_search(gt.begin(), gt.end(), f)) far["keyframes"].push_back({{"frame", f}, {"score", 0.1}});
  }
  write("far.json", far.dump());
  const CliRun d = cli({"eval", "--result", p("far.json"), "--annotations", p("ann.json"), "--scenario", p("s.json"),
                     "--delta", "0", "-o", p("report.json")});
  ASSERT_EQ(d.code, 0);
  EXPECT_EQ(read_json_file(p("report.json")).at("temporal_coverage"), 0.0);

  const CliRun ssim = cli({"eval", "--result", p("perfect.json"), "--annotations", p("ann.json"), "--scenario",
                        p("s.json"), "--phi", "ssim"});
  ASSERT_EQ(ssim.code, 0) << ssim.err;
  const auto ssim_report = nlohmann::json::parse(ssim.out);
  EXPECT_EQ(ssim_report.at("phi"), "ssim");
  EXPECT_NEAR(ssim_report.at("precision").get<double>(), 1.0, 1e-9);

  EXPECT_EQ(cli({"eval", "--result", p("perfect.json"), "--annotations", p("ann.json"), "--scenario", p("s.json"),
                 "--query-id", "missing"})
                .code,
            2);
  write("empty_ann.json", R"([{"query_id": "q", "gt_frames": []}])");
  EXPECT_EQ(cli({"eval", "--result", p("perfect.json"), "--annotations", p("empty_ann.json"), "--scenario", p("s.json")}).code,
            2);
  EXPECT_EQ(cli({"eval", "--result", p("perfect.json"), "--annotations", p("ann.json")}).code, 2);
  EXPECT_EQ(cli({"eval", "--result", p("nope.json"), "--annotations", p("ann.json"), "--scenario", p("s.json")}).code, 3);
}

TEST_F(CliTest, EvalSsimOnFrameDirectory) {
  ASSERT_EQ(cli({"gen", "spatial", "--seed", "3", "-o", p("s.json"), "--annotations", p("ann.json"), "--render-dir",
                 p("frames")})
                .code,
            0);
  ASSERT_EQ(cli({"search", "--scenario", p("s.json"), "--out-dir", p("r")}).code, 0);
  const CliRun r = cli({"eval", "--result", p("r/result.json"), "--annotations", p("ann.json"), "--frames", p("frames"),
                     "--phi", "ssim"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_TRUE(doc.contains("ssim_params"));
  EXPECT_GE(doc.at("precision").get<double>(), 0.0);
  EXPECT_LE(doc.at("precision").get<double>(), 1.0);
}

TEST_F(CliTest, Bench) {
  write("suite.json", R"({"config": {"K": 2}, "entries": [{"template": "spatial", "seed": 1}, {"template": "time", "seed": 2}]})");
  const CliRun r = cli({"bench", p("suite.json"), "--out-dir", p("b"), "--jobs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = read_json_file(p("b/bench.json"));
  EXPECT_EQ(doc.at("variants").at("relations").at("runs"), 2);
  EXPECT_EQ(doc.at("entries").size(), 2u);
  write("empty.json", R"({"entries": []})");
  EXPECT_EQ(cli({"bench", p("empty.json"), "--out-dir", p("b")}).code, 2);
}
