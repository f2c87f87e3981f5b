#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cpgnn/cli.hpp"
#include "cpgnn/graph.hpp"
#include "cpgnn/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "cpgnn");
  std::ostringstream out, err;
  const int code = cpgnn::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read(const fs::path& p) { return json::parse(slurp(p)); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("cpgnn_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string p(const std::string& rel) const { return (dir_ / rel).string(); }
  void write(const std::string& rel, const std::string& body) const { std::ofstream(dir_ / rel) << body; }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SynthWritesFilesAndEchoesFlags) {
  const auto r = run({"synth", "--topology", "grid", "--nodes", "400", "--num-seeds", "4", "--seed", "7", "--out", p("d")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"nodes.csv", "edges.csv", "splits.json", "manifest.json"}) EXPECT_TRUE(fs::exists(dir_ / "d" / f));
  const auto m = read(dir_ / "d" / "manifest.json");
  EXPECT_EQ(m["manifest"]["seed"], 7);
  EXPECT_EQ(m["manifest"]["config"]["num_nodes"], 400);
  EXPECT_EQ(m["manifest"]["command"][0], "synth");
  EXPECT_TRUE(m["manifest"].contains("timestamp"));
  const auto ds = cpgnn::load_graph(dir_ / "d" / "nodes.csv", dir_ / "d" / "edges.csv");
  EXPECT_EQ(ds.graph.num_nodes(), 400u);
}

TEST_F(CliTest, SynthRerunIsByteIdentical) {
  const std::vector<std::string> a{"synth", "--nodes", "300", "--num-seeds", "3", "--seed", "3", "--out", p("a")};
  std::vector<std::string> b = a;
  b.back() = p("b");
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  for (const char* f : {"nodes.csv", "edges.csv", "splits.json"}) EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f));
}

TEST_F(CliTest, MissingRequiredFlagIsUsageError) {
  EXPECT_EQ(run({"synth", "--out", p("x")}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"synth", "--nodes", "100", "--out", p("x"), "--ratio", "0.9"}).code, 2);
}

TEST_F(CliTest, MetricsTriangleFixture) {
  write("nodes.csv", "node_id,label\n0,1\n1,0\n2,0\n");
  write("edges.csv", "src,dst\n0,1\n1,2\n0,2\n");
  const auto r = run({"metrics", "--nodes", p("nodes.csv"), "--edges", p("edges.csv"), "--k", "1,2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  const auto rep = cpgnn::metric_report_from_json(j);
  EXPECT_DOUBLE_EQ(rep.at(1, 1).ancd, 0.0);
  EXPECT_DOUBLE_EQ(rep.at(0, 1).ancd, 0.5);
  EXPECT_DOUBLE_EQ(rep.at(0, 2).ancc, 1.0);
  EXPECT_EQ(json::parse(j.dump()), j);
}

TEST_F(CliTest, MetricsDefaultHopGrid) {
  ASSERT_EQ(run({"synth", "--nodes", "400", "--num-seeds", "4", "--out", p("d")}).code, 0);
  const auto r = run({"metrics", "--data", p("d"), "--out", p("m.json"), "--csv", p("m.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read(dir_ / "m.json");
  std::size_t cells = 0;
  for (const char* m : {"ancd", "ancc"})
    for (const char* z : {"0", "1"}) cells += j[m][z].size();
  EXPECT_EQ(cells, 20u);  // 5 hop bounds x 2 metrics x 2 classes
  EXPECT_EQ(j["k"], json({1, 2, 4, 8, 10}));
  EXPECT_EQ(j["manifest"]["inputs"].size(), 2u);
  EXPECT_NE(slurp(dir_ / "m.csv").find("k,ancd_0,ancd_1,ancc_0,ancc_1\n1,"), std::string::npos);
}

TEST_F(CliTest, UnknownLabelInMetricsIsDataFailure) {
  write("nodes.csv", "node_id,label\n0,1\n1,?\n2,0\n");
  write("edges.csv", "src,dst\n0,1\n1,2\n");
  const auto r = run({"metrics", "--nodes", p("nodes.csv"), "--edges", p("edges.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(CliTest, MalformedInputReportsLine) {
  write("nodes.csv", "node_id,label\n0,1\n1,x\n");
  write("edges.csv", "src,dst\n0,1\n");
  const auto r = run({"metrics", "--nodes", p("nodes.csv"), "--edges", p("edges.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 3"), std::string::npos);
}

TEST_F(CliTest, TtestOverPlantedSuite) {
  ASSERT_EQ(run({"synth", "--nodes", "900", "--num-seeds", "9", "--suite", "8", "--seed", "1", "--no-split", "--out",
                 p("suite")})
                .code,
            0);
  std::vector<std::string> args{"ttest", "--k", "1", "--out", p("t.json")};
  for (int j = 0; j < 8; ++j) {
    const std::string d = p("suite/dataset_00" + std::to_string(j));
    EXPECT_FALSE(fs::exists(fs::path(d) / "splits.json"));
    const std::string out = p("m" + std::to_string(j) + ".json");
    ASSERT_EQ(run({"metrics", "--data", d, "--k", "1", "--out", out}).code, 0);
    args.push_back(out);
  }
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read(dir_ / "t.json");
  EXPECT_LT(j["ttest"]["ANCD"]["1"]["p_one_sided"].get<double>(), 0.01);
  EXPECT_LT(j["ttest"]["ANCC"]["1"]["p_one_sided"].get<double>(), 0.01);
  EXPECT_EQ(j["ttest"]["ANCD"]["1"]["df"], 7);
}

TEST_F(CliTest, TtestNeedsTwoReports) {
  write("nodes.csv", "node_id,label\n0,1\n1,0\n2,0\n");
  write("edges.csv", "src,dst\n0,1\n1,2\n0,2\n");
  ASSERT_EQ(run({"metrics", "--nodes", p("nodes.csv"), "--edges", p("edges.csv"), "--out", p("m.json")}).code, 0);
  EXPECT_EQ(run({"ttest", p("m.json")}).code, 1);
  EXPECT_EQ(run({"ttest", p("m.json"), p("m.json"), "--metric", "XYZ"}).code, 2);
}

TEST_F(CliTest, TrainBothArmsAndReport) {
  ASSERT_EQ(run({"synth", "--nodes", "400", "--num-seeds", "4", "--out", p("d")}).code, 0);
  for (const std::string arm : {"cp", "no-cp"}) {
    const auto r = run({"train", "--data", p("d"), "--out", p(arm), "--" + arm, "--epochs", "15", "--seeds", "3",
                        "--workers", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto e = read(dir_ / "cp" / "eval.json");
  EXPECT_EQ(e["arm"], "cp");
  EXPECT_EQ(e["runs"].size(), 3u);
  EXPECT_EQ(e["summary"]["test"]["f1"]["n"], 3);
  EXPECT_TRUE(e["summary"]["test"]["f1"].contains("sd"));
  for (int s = 0; s < 3; ++s) {
    const auto run_dir = dir_ / "cp" / ("run_" + std::to_string(s));
    EXPECT_TRUE(fs::exists(run_dir / "checkpoint.json"));
    const auto hist = slurp(run_dir / "history.csv");
    EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 16);
  }
  // The split the dataset shipped with is the one used.
  EXPECT_EQ(slurp(dir_ / "cp" / "splits.json"), slurp(dir_ / "d" / "splits.json"));

  const auto text = run({"report", p("no-cp"), p("cp")});
  ASSERT_EQ(text.code, 0) << text.err;
  EXPECT_NE(text.out.find("delta"), std::string::npos);
  const auto js = run({"report", p("no-cp"), p("cp"), "--format", "json"});
  const auto j = json::parse(js.out);
  const double delta = j["delta"]["f1"].get<double>();
  EXPECT_DOUBLE_EQ(delta, e["summary"]["test"]["f1"]["mean"].get<double>() -
                              read(dir_ / "no-cp" / "eval.json")["summary"]["test"]["f1"]["mean"].get<double>());
  EXPECT_TRUE(j["warnings"].empty());
  std::ostringstream four;
  four << std::fixed << std::setprecision(4) << j["rows"][1]["f1"]["mean"].get<double>();
  EXPECT_NE(text.out.find(four.str()), std::string::npos);  // text and json carry the same numbers
}

TEST_F(CliTest, ReportWithMissingArmWarns) {
  ASSERT_EQ(run({"synth", "--nodes", "400", "--num-seeds", "4", "--out", p("d")}).code, 0);
  ASSERT_EQ(run({"train", "--data", p("d"), "--out", p("cp"), "--epochs", "3"}).code, 0);
  const auto r = run({"report", p("cp"), "--format", "json"});
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["rows"].size(), 1u);
  EXPECT_TRUE(j["delta"].is_null());
  EXPECT_NE(r.err.find("missing arm 'baseline'"), std::string::npos);
}

TEST_F(CliTest, TrainRejectsOutOfRangeMaskRate) {
  ASSERT_EQ(run({"synth", "--nodes", "400", "--num-seeds", "4", "--out", p("d")}).code, 0);
  EXPECT_EQ(run({"train", "--data", p("d"), "--out", p("r"), "--mask-rate", "0.6"}).code, 2);
  EXPECT_FALSE(fs::exists(dir_ / "r"));
}

TEST_F(CliTest, TrainRerunIsIdenticalModuloTimestamp) {
  ASSERT_EQ(run({"synth", "--nodes", "400", "--num-seeds", "4", "--out", p("d")}).code, 0);
  const std::vector<std::string> cmd{"train", "--data", p("d"), "--out", p("r"), "--epochs", "10", "--seeds", "2"};
  ASSERT_EQ(run(cmd).code, 0);
  const auto first = cpgnn::cli::strip_timestamp(read(dir_ / "r" / "eval.json")).dump();
  const auto ckpt = slurp(dir_ / "r" / "run_1" / "checkpoint.json");
  auto more_workers = cmd;
  more_workers.insert(more_workers.end(), {"--workers", "2"});
  ASSERT_EQ(run(cmd).code, 0);
  EXPECT_EQ(cpgnn::cli::strip_timestamp(read(dir_ / "r" / "eval.json")).dump(), first);
  EXPECT_EQ(slurp(dir_ / "r" / "run_1" / "checkpoint.json"), ckpt);
  // Worker count changes scheduling only.
  ASSERT_EQ(run(more_workers).code, 0);
  const auto parallel = read(dir_ / "r" / "eval.json");
  const auto serial = json::parse(first);
  EXPECT_EQ(parallel["runs"], serial["runs"]);
  EXPECT_EQ(parallel["summary"], serial["summary"]);
  EXPECT_EQ(slurp(dir_ / "r" / "run_1" / "checkpoint.json"), ckpt);
}

TEST(CliDigest, KnownSha256) {
  const auto path = fs::temp_directory_path() / "cpgnn_digest_abc.txt";
  std::ofstream(path, std::ios::binary) << "abc";
  EXPECT_EQ(cpgnn::cli::file_digest(path), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove(path);
}

TEST(CliDigest, ReportDigestIgnoresTimestamp) {
  json a{{"x", 1}, {"manifest", {{"seed", 3}, {"timestamp", {{"started_utc", "2026-01-01T00:00:00Z"}}}}}};
  json b = a;
  b["manifest"]["timestamp"]["started_utc"] = "2026-02-02T00:00:00Z";
  EXPECT_EQ(cpgnn::cli::report_digest(a), cpgnn::cli::report_digest(b));
  b["x"] = 2;
  EXPECT_NE(cpgnn::cli::report_digest(a), cpgnn::cli::report_digest(b));
}
