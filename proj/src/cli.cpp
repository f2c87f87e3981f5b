#include "cpgnn/cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "cpgnn/error.hpp"
#include "cpgnn/eval.hpp"
#include "cpgnn/experiment.hpp"
#include "cpgnn/gnn.hpp"
#include "cpgnn/graph.hpp"
#include "cpgnn/metrics.hpp"
#include "cpgnn/stats.hpp"
#include "cpgnn/synth.hpp"

namespace cpgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw DataError("sha256 init failed");
  }
  void update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return out.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Sha256 sha;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) sha.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return sha.hex();
}

std::string report_digest(const json& report) {
  const std::string text = strip_timestamp(report).dump();
  Sha256 sha;
  sha.update(text.data(), text.size());
  return sha.hex();
}

json strip_timestamp(json report) {
  if (report.contains("manifest") && report["manifest"].is_object()) report["manifest"].erase("timestamp");
  return report;
}

namespace {

class Manifest {
 public:
  explicit Manifest(std::vector<std::string> command)
      : command_(std::move(command)), started_(std::chrono::system_clock::now()),
        clock_(std::chrono::steady_clock::now()) {}

  void add_input(const fs::path& p) { inputs_[p.string()] = file_digest(p); }
  void add_report_input(const fs::path& p, const json& report) { inputs_[p.string()] = report_digest(report); }

  json finish(json config, std::optional<std::uint64_t> seed) const {
    const auto t = std::chrono::system_clock::to_time_t(started_);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream iso;
    iso << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
    json m{{"tool", "cpgnn"},
           {"version", kToolVersion},
           {"command", command_},
           {"config", std::move(config)},
           {"inputs", inputs_},
           {"timestamp", {{"started_utc", iso.str()}, {"wall_time_s", wall}}}};
    m["seed"] = seed ? json(*seed) : json(nullptr);
    return m;
  }

 private:
  std::vector<std::string> command_;
  std::map<std::string, std::string> inputs_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point clock_;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void emit_json(const json& j, const std::string& out_path, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) out << text;
  else write_text(out_path, text);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

struct DataPaths {
  fs::path nodes;
  fs::path edges;
};

DataPaths resolve_data(const std::string& dir, const std::string& nodes, const std::string& edges) {
  if (!dir.empty()) return {fs::path(dir) / "nodes.csv", fs::path(dir) / "edges.csv"};
  if (nodes.empty() || edges.empty()) throw ConfigError("give --data DIR or both --nodes and --edges");
  return {nodes, edges};
}

json load_warnings(const RoadGraph::BuildStats& s) {
  return {{"self_loops_dropped", s.self_loops_dropped}, {"duplicate_edges_collapsed", s.duplicates_collapsed}};
}

void warn_load(const RoadGraph::BuildStats& s, std::ostream& err) {
  if (s.self_loops_dropped) err << "warning: dropped " << s.self_loops_dropped << " self-loop(s)\n";
  if (s.duplicates_collapsed) err << "warning: collapsed " << s.duplicates_collapsed << " duplicate edge(s)\n";
}

// ---- synth ----

struct SynthArgs {
  SynthConfig config;
  std::string topology = "grid";
  std::string labels = "planted";
  std::string out_dir;
  std::size_t suite = 0;
  bool write_split = true;
  std::uint64_t split_seed = 0;
};

void write_dataset(const SynthDataset& ds, const fs::path& dir, bool write_split, std::uint64_t split_seed) {
  fs::create_directories(dir);
  save_graph(ds.graph, ds.labels, dir / "nodes.csv", dir / "edges.csv");
  if (write_split) save_split(stratified_split(ds.labels, {}, split_seed), dir / "splits.json");
}

int cmd_synth(SynthArgs& a, const Manifest& manifest, std::ostream& out) {
  a.config.topology = parse_topology(a.topology);
  a.config.label_mode = parse_label_mode(a.labels);
  a.config.check();
  const fs::path dir(a.out_dir);
  json datasets = json::array();
  if (a.suite == 0) {
    const auto ds = generate_dataset(a.config);
    write_dataset(ds, dir, a.write_split, a.split_seed);
    datasets.push_back({{"dir", "."}, {"config", to_json(ds.config)}, {"num_nodes", ds.graph.num_nodes()},
                        {"num_edges", ds.graph.num_edges()}});
  } else {
    const auto suite = generate_suite(a.suite, a.config, a.config.seed);
    for (std::size_t j = 0; j < suite.size(); ++j) {
      std::ostringstream name;
      name << "dataset_" << std::setw(3) << std::setfill('0') << j;
      write_dataset(suite[j], dir / name.str(), a.write_split, a.split_seed);
      datasets.push_back({{"dir", name.str()}, {"config", to_json(suite[j].config)},
                          {"num_nodes", suite[j].graph.num_nodes()}, {"num_edges", suite[j].graph.num_edges()}});
    }
  }
  json config = to_json(a.config);
  config["suite"] = a.suite;
  config["split_seed"] = a.split_seed;
  json report{{"datasets", datasets}, {"manifest", manifest.finish(config, a.config.seed)}};
  emit_json(report, (dir / "manifest.json").string(), out);
  out << "wrote " << datasets.size() << " dataset(s) to " << dir.string() << "\n";
  return kOk;
}

// ---- metrics ----

struct MetricsArgs {
  std::string data_dir, nodes, edges, out_path, csv_path;
  std::vector<unsigned> ks = kDefaultHops;
  unsigned workers = 1;
};

int cmd_metrics(const MetricsArgs& a, Manifest& manifest, std::ostream& out, std::ostream& err) {
  const auto paths = resolve_data(a.data_dir, a.nodes, a.edges);
  const auto ds = load_graph(paths.nodes, paths.edges);
  warn_load(ds.load_stats, err);
  manifest.add_input(paths.nodes);
  manifest.add_input(paths.edges);
  const auto report = metric_report(ds.graph, ds.labels, a.ks, a.workers);
  json j = to_json(report);
  j["load_warnings"] = load_warnings(ds.load_stats);
  j["num_nodes"] = ds.graph.num_nodes();
  j["num_edges"] = ds.graph.num_edges();
  j["manifest"] = manifest.finish({{"k", a.ks}}, std::nullopt);
  if (!a.csv_path.empty()) {
    std::ostringstream csv;
    csv << "k,ancd_0,ancd_1,ancc_0,ancc_1\n";
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      csv << report.ks[i] << ',' << format_double(report.cells[0][i].ancd) << ','
          << format_double(report.cells[1][i].ancd) << ',' << format_double(report.cells[0][i].ancc) << ','
          << format_double(report.cells[1][i].ancc) << '\n';
    }
    write_text(a.csv_path, csv.str());
  }
  emit_json(j, a.out_path, out);
  return kOk;
}

// ---- ttest ----

struct TtestArgs {
  std::vector<std::string> reports;
  std::string metric;  // empty: both
  std::vector<unsigned> ks;  // empty: every k shared by all reports
  std::string out_path;
};

int cmd_ttest(const TtestArgs& a, Manifest& manifest, std::ostream& out) {
  std::vector<MetricReport> reports;
  for (const auto& p : a.reports) {
    const json j = read_json(p);
    reports.push_back(metric_report_from_json(j));
    manifest.add_report_input(p, j);
  }
  if (reports.size() < 2) throw DataError("paired test needs at least 2 reports, got " + std::to_string(reports.size()));
  std::vector<unsigned> ks = a.ks;
  if (ks.empty()) {
    for (unsigned k : reports.front().ks) {
      if (std::all_of(reports.begin(), reports.end(), [k](const MetricReport& r) { return r.has_k(k); })) ks.push_back(k);
    }
  }
  std::vector<HopMetric> metrics;
  if (a.metric.empty()) metrics = {HopMetric::Ancd, HopMetric::Ancc};
  else metrics = {parse_hop_metric(a.metric)};

  json table = json::object();
  for (auto m : metrics) {
    json row = json::object();
    for (unsigned k : ks) row[std::to_string(k)] = to_json(hypothesis_test(reports, m, k));
    table[to_string(m)] = row;
  }
  json config{{"k", ks}, {"metric", a.metric.empty() ? json("both") : json(a.metric)}};
  json j{{"ttest", table}, {"inputs", a.reports}, {"manifest", manifest.finish(config, std::nullopt)}};
  emit_json(j, a.out_path, out);
  return kOk;
}

// ---- train ----

struct TrainArgs {
  TrainConfig config;
  std::string data_dir, out_dir, split_path;
  std::size_t seeds = 1;
  std::uint64_t split_seed = 0;
  unsigned workers = 1;
};

int cmd_train(const TrainArgs& a, Manifest& manifest, std::ostream& out, std::ostream& err) {
  a.config.check();
  if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");
  const fs::path data(a.data_dir);
  const fs::path dir(a.out_dir);
  const auto ds = load_graph(data / "nodes.csv", data / "edges.csv");
  warn_load(ds.load_stats, err);
  manifest.add_input(data / "nodes.csv");
  manifest.add_input(data / "edges.csv");

  Split split;
  fs::path split_file = a.split_path.empty() ? data / "splits.json" : fs::path(a.split_path);
  if (fs::exists(split_file)) {
    split = load_split(split_file);
    manifest.add_input(split_file);
  } else if (!a.split_path.empty()) {
    throw DataError("split file not found: " + split_file.string());
  } else {
    split = stratified_split(ds.labels, {}, a.split_seed);
  }
  if (const auto v = validate_split(split, ds.labels); !v.ok()) throw DataError("invalid split: " + v.violations.front());

  const auto runs = run_arm(ds.graph, ds.labels, split, a.config, a.seeds, a.workers);

  fs::create_directories(dir);
  save_split(split, dir / "splits.json");
  json run_list = json::array();
  for (const auto& r : runs) {
    TrainConfig c = a.config;
    c.seed = r.seed;
    const fs::path run_dir = dir / ("run_" + std::to_string(r.seed));
    fs::create_directories(run_dir);
    write_text(run_dir / "checkpoint.json", checkpoint_to_json(r.trained.model, c).dump() + "\n");
    std::ostringstream csv;
    csv << "epoch,loss,val_f1\n";
    for (const auto& h : r.trained.history) {
      csv << h.epoch << ',' << format_double(h.loss) << ',' << format_double(h.val_f1) << '\n';
    }
    write_text(run_dir / "history.csv", csv.str());
    run_list.push_back({{"seed", r.seed}, {"valid", to_json(r.valid)}, {"test", to_json(r.test)},
                        {"final_loss", r.trained.history.back().loss}});
  }
  json config = to_json(a.config);
  config["seeds"] = a.seeds;
  config["split_seed"] = a.split_seed;
  json j{{"arm", a.config.use_cp ? "cp" : "baseline"},
         {"dataset", a.data_dir},
         {"split_sizes", {{"train", split.train.size()}, {"valid", split.valid.size()}, {"test", split.test.size()}}},
         {"runs", run_list},
         {"summary", {{"valid", summarize(runs, Subset::Valid)}, {"test", summarize(runs, Subset::Test)}}},
         {"manifest", manifest.finish(config, a.config.seed)}};
  emit_json(j, (dir / "eval.json").string(), out);
  const auto& test = j["summary"]["test"];
  out << (a.config.use_cp ? "cp" : "baseline") << ": test F1 " << std::fixed << std::setprecision(4)
      << test["f1"]["mean"].get<double>() << " +- " << test["f1"]["sd"].get<double>() << ", AUC "
      << test["auc"]["mean"].get<double>() << " +- " << test["auc"]["sd"].get<double>() << "\n";
  return kOk;
}

// ---- report ----

struct ReportArgs {
  std::vector<std::string> run_dirs;
  std::string format = "text";
  std::string out_path;
};

int cmd_report(const ReportArgs& a, Manifest& manifest, std::ostream& out, std::ostream& err) {
  if (a.format != "text" && a.format != "json") throw ConfigError("--format must be text or json");
  json rows = json::array();
  json warnings = json::array();
  std::map<std::string, json> by_arm;
  for (const auto& d : a.run_dirs) {
    const fs::path eval_path = fs::path(d) / "eval.json";
    const json e = read_json(eval_path);
    manifest.add_report_input(eval_path, e);
    const std::string arm = e.at("arm").get<std::string>();
    if (by_arm.count(arm)) {
      warnings.push_back("duplicate arm '" + arm + "' in " + d + " ignored");
      continue;
    }
    const auto& test = e.at("summary").at("test");
    json row{{"arm", arm}, {"source", d}, {"f1", test.at("f1")}, {"auc", test.at("auc")}};
    by_arm[arm] = row;
  }
  for (const char* arm : {"baseline", "cp"}) {
    if (by_arm.count(arm)) rows.push_back(by_arm[arm]);
    else warnings.push_back(std::string("missing arm '") + arm + "'");
  }
  json delta = nullptr;
  if (by_arm.count("cp") && by_arm.count("baseline")) {
    delta = {{"f1", by_arm["cp"]["f1"]["mean"].get<double>() - by_arm["baseline"]["f1"]["mean"].get<double>()},
             {"auc", by_arm["cp"]["auc"]["mean"].get<double>() - by_arm["baseline"]["auc"]["mean"].get<double>()}};
  }
  for (const auto& w : warnings) err << "warning: " << w.get<std::string>() << "\n";

  json j{{"rows", rows}, {"delta", delta}, {"warnings", warnings},
         {"manifest", manifest.finish({{"format", a.format}}, std::nullopt)}};
  if (a.format == "json") {
    emit_json(j, a.out_path, out);
    return kOk;
  }
  std::ostringstream t;
  t << std::left << std::setw(10) << "arm" << std::right << std::setw(20) << "test F1" << std::setw(20) << "test AUC"
    << "\n";
  t << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    std::ostringstream f1, auc_cell;
    f1 << std::fixed << std::setprecision(4) << r["f1"]["mean"].get<double>() << " +- " << r["f1"]["sd"].get<double>();
    auc_cell << std::fixed << std::setprecision(4) << r["auc"]["mean"].get<double>() << " +- "
             << r["auc"]["sd"].get<double>();
    t << std::left << std::setw(10) << r["arm"].get<std::string>() << std::right << std::setw(20) << f1.str()
      << std::setw(20) << auc_cell.str() << "\n";
  }
  if (!delta.is_null()) {
    t << std::left << std::setw(10) << "delta" << std::right << std::showpos << std::setw(20)
      << delta["f1"].get<double>() << std::setw(20) << delta["auc"].get<double>() << std::noshowpos << "\n";
  }
  if (a.out_path.empty()) out << t.str();
  else write_text(a.out_path, t.str());
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neighbor-incident metrics, paired tests and label-token GCN training on road graphs", "cpgnn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic road-like datasets");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--nodes", synth.config.num_nodes, "Number of nodes")->required();
  synth_cmd->add_option("--topology", synth.topology, "grid | rgg")->capture_default_str();
  synth_cmd->add_option("--grid-width", synth.config.grid_width, "Lattice width (0: ceil(sqrt(N)))");
  synth_cmd->add_option("--radius", synth.config.geo_radius, "Connection radius for rgg")->capture_default_str();
  synth_cmd->add_option("--labels", synth.labels, "planted | independent")->capture_default_str();
  synth_cmd->add_option("--num-seeds", synth.config.num_seeds, "Incident cluster seeds")->capture_default_str();
  synth_cmd->add_option("--diffusion-prob", synth.config.diffusion_prob)->capture_default_str();
  synth_cmd->add_option("--rounds", synth.config.diffusion_rounds)->capture_default_str();
  synth_cmd->add_option("--ratio", synth.config.target_positive_ratio, "Target positive ratio")->capture_default_str();
  synth_cmd->add_option("--feature-dim", synth.config.feature_dim)->capture_default_str();
  synth_cmd->add_option("--signal-dims", synth.config.signal_dims)->capture_default_str();
  synth_cmd->add_option("--feature-signal", synth.config.feature_signal)->capture_default_str();
  synth_cmd->add_option("--signal-shift", synth.config.signal_shift)->capture_default_str();
  synth_cmd->add_option("--seed", synth.config.seed)->capture_default_str();
  synth_cmd->add_option("--suite", synth.suite, "Generate this many jittered datasets (0: one)");
  synth_cmd->add_option("--split-seed", synth.split_seed)->capture_default_str();
  synth_cmd->add_flag("!--no-split", synth.write_split, "Do not write splits.json");

  MetricsArgs metrics;
  metrics.workers = default_workers();
  auto* metrics_cmd = app.add_subcommand("metrics", "ANCD/ANCC over a hop grid");
  metrics_cmd->add_option("--data", metrics.data_dir, "Directory holding nodes.csv and edges.csv");
  metrics_cmd->add_option("--nodes", metrics.nodes);
  metrics_cmd->add_option("--edges", metrics.edges);
  metrics_cmd->add_option("--k", metrics.ks, "Hop bounds, comma separated")->delimiter(',')->capture_default_str();
  metrics_cmd->add_option("--out", metrics.out_path, "Report path (default stdout)");
  metrics_cmd->add_option("--csv", metrics.csv_path, "Also write metric-vs-k series");
  metrics_cmd->add_option("--workers", metrics.workers);

  TtestArgs ttest;
  auto* ttest_cmd = app.add_subcommand("ttest", "One-sided paired t-test across metric reports");
  ttest_cmd->add_option("reports", ttest.reports, "Metric report JSON files")->required();
  ttest_cmd->add_option("--metric", ttest.metric, "ANCD | ANCC (default both)");
  ttest_cmd->add_option("--k", ttest.ks, "Hop bounds (default all shared)")->delimiter(',');
  ttest_cmd->add_option("--out", ttest.out_path);

  TrainArgs trainer;
  trainer.workers = default_workers();
  auto* train_cmd = app.add_subcommand("train", "Train the graph convolution classifier with or without label tokens");
  train_cmd->add_option("--data", trainer.data_dir, "Dataset directory")->required();
  train_cmd->add_option("--out", trainer.out_dir, "Run output directory")->required();
  train_cmd->add_flag("--cp,!--no-cp", trainer.config.use_cp, "Use label tokens (default on)");
  train_cmd->add_option("--mask-rate", trainer.config.mask_rate)->capture_default_str();
  train_cmd->add_option("--lr", trainer.config.learning_rate)->capture_default_str();
  train_cmd->add_option("--weight-decay", trainer.config.weight_decay)->capture_default_str();
  train_cmd->add_option("--epochs", trainer.config.epochs)->capture_default_str();
  train_cmd->add_option("--hidden", trainer.config.hidden_dim)->capture_default_str();
  train_cmd->add_option("--seed", trainer.config.seed, "First run seed")->capture_default_str();
  train_cmd->add_option("--seeds", trainer.seeds, "Number of runs")->capture_default_str();
  train_cmd->add_option("--split", trainer.split_path, "splits.json (default DATA/splits.json if present)");
  train_cmd->add_option("--split-seed", trainer.split_seed)->capture_default_str();
  train_cmd->add_option("--workers", trainer.workers);

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Compare training arms");
  report_cmd->add_option("runs", report.run_dirs, "Run directories holding eval.json")->required();
  report_cmd->add_option("--format", report.format, "text | json")->capture_default_str();
  report_cmd->add_option("--out", report.out_path);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  Manifest manifest(std::vector<std::string>(args.begin() + 1, args.end()));
  try {
    if (*synth_cmd) return cmd_synth(synth, manifest, out);
    if (*metrics_cmd) return cmd_metrics(metrics, manifest, out, err);
    if (*ttest_cmd) return cmd_ttest(ttest, manifest, out);
    if (*train_cmd) return cmd_train(trainer, manifest, out, err);
    if (*report_cmd) return cmd_report(report, manifest, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataFailure;
  }
  return kUsage;
}

}  // namespace cpgnn::cli
