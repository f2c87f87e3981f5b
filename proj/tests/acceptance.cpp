// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cpgnn/cli.hpp"
#include "cpgnn/error.hpp"
#include "cpgnn/experiment.hpp"
#include "cpgnn/gnn.hpp"
#include "cpgnn/metrics.hpp"
#include "cpgnn/stats.hpp"
#include "cpgnn/synth.hpp"
#include "oracles.hpp"

using namespace cpgnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

unsigned hw_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---- 1 ----
Outcome metric_oracle_equivalence() {
  Timer timer;
  std::mt19937_64 gen(2024);
  std::size_t mismatches = 0, degenerate = 0;
  for (int g = 0; g < 50; ++g) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 200)(gen);
    const double deg = std::uniform_real_distribution<double>(0.5, 5.0)(gen);
    const double pos = std::uniform_real_distribution<double>(0.05, 0.6)(gen);
    const auto inst = oracle::random_instance(n, deg, pos, gen());
    const auto dist = oracle::all_pairs_hops(inst.graph);
    // Eligibility (non-empty neighborhood) is the same for every k >= 1.
    bool any_empty_class = false;
    for (int z = 0; z < 2; ++z) any_empty_class |= oracle::class_means(dist, inst.labels, z, 1).counted == 0;
    if (any_empty_class) {
      ++degenerate;
      try {
        metric_report(inst.graph, inst.labels, kDefaultHops);
        ++mismatches;
      } catch (const DataError&) {
      }
      continue;
    }
    const auto report = metric_report(inst.graph, inst.labels, kDefaultHops);
    for (int z = 0; z < 2; ++z) {
      for (unsigned k : kDefaultHops) {
        const auto want = oracle::class_means(dist, inst.labels, z, k);
        const auto& got = report.at(z, k);
        if (got.counted_nodes != static_cast<std::size_t>(want.counted) ||
            got.excluded_isolated != static_cast<std::size_t>(want.excluded) ||
            std::abs(got.ancd - want.ancd) > 1e-12 || std::abs(got.ancc - want.ancc) > 1e-12) {
          ++mismatches;
        }
      }
    }
  }
  const double secs = timer.seconds();
  return {mismatches == 0 && secs < 10.0, std::to_string(mismatches) + " mismatches over 50 graphs (" +
                                              std::to_string(degenerate) + " with an empty class), " +
                                              fmt("%.2fs", secs)};
}

// ---- 2 ----
Outcome metric_invariants() {
  std::size_t violations = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto n = 50 + 7 * s;
    const auto inst = oracle::random_instance(n, 2.0 + 0.1 * static_cast<double>(s), 0.1 + 0.015 * s, 500 + s);
    for (NodeId i = 0; i < n; ++i) {
      for (unsigned k : kDefaultHops) {
        const auto d = ncd(inst.graph, inst.labels, i, k);
        if (d && ncc(inst.graph, inst.labels, i, k) < *d) ++violations;
      }
    }
    const auto base = metric_report(inst.graph, inst.labels, kDefaultHops, 1);
    for (int z = 0; z < 2; ++z)
      for (std::size_t t = 1; t < base.ks.size(); ++t)
        if (base.cells[z][t].ancc < base.cells[z][t - 1].ancc) ++violations;
    for (unsigned w : {2u, 8u})
      if (!(metric_report(inst.graph, inst.labels, kDefaultHops, w) == base)) ++violations;

    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    std::mt19937_64 gen(s);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<std::pair<NodeId, NodeId>> pe;
    for (const auto& e : inst.graph.edges()) pe.push_back({perm[e.u], perm[e.v]});
    LabelVector pl(n);
    for (std::size_t i = 0; i < n; ++i) pl[perm[i]] = inst.labels[i];
    const auto permuted = metric_report(RoadGraph::build(n, pe), pl, kDefaultHops);
    for (int z = 0; z < 2; ++z)
      for (std::size_t t = 0; t < base.ks.size(); ++t) {
        const auto &a = base.cells[z][t], &b = permuted.cells[z][t];
        if (a.counted_nodes != b.counted_nodes || a.excluded_isolated != b.excluded_isolated ||
            std::abs(a.ancd - b.ancd) > 1e-12 || std::abs(a.ancc - b.ancc) > 1e-12)
          ++violations;
      }
  }
  return {violations == 0, std::to_string(violations) + " violations over 20 instances, workers {1,2,8}"};
}

// ---- 3 ----
Outcome ttest_correctness() {
  double closed = 0.0, anti = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double t = -50.0 + 100.0 * i / 99.0;
    closed = std::max(closed, std::abs(t_cdf(t, 1) - (0.5 + std::atan(t) / std::numbers::pi)));
    closed = std::max(closed, std::abs(t_cdf(t, 2) - 0.5 * (1.0 + t / std::sqrt(2.0 + t * t))));
    for (double df : {1.0, 3.0, 30.0, 1e4})
      anti = std::max(anti, std::abs(t_cdf(-t, df) + t_cdf(t, df) - 1.0));
  }
  const double normal = std::abs(t_cdf(1.96, 1e5) - 0.9750021);
  const std::vector<double> m0{0.1, 0.2, 0.15}, m1{0.3, 0.5, 0.25};
  const auto r = paired_t_test(m0, m1);
  const bool worked = std::abs(r.t_stat + 3.4641) < 1e-4 && std::abs(r.p_one_sided - 0.03709) < 1e-4 && r.df == 2;
  const bool pass = closed < 1e-10 && anti < 1e-12 && normal < 1e-4 && worked;
  std::ostringstream d;
  d << "closed-form err " << closed << ", antisymmetry err " << anti << ", normal-limit err " << normal
    << ", worked example t=" << fmt("%.4f", r.t_stat) << " p=" << fmt("%.5f", r.p_one_sided);
  return {pass, d.str()};
}

// ---- 4 ----
std::vector<MetricReport> suite_reports(const std::vector<SynthDataset>& suite) {
  std::vector<MetricReport> out;
  for (const auto& ds : suite) out.push_back(metric_report(ds.graph, ds.labels, {1}));
  return out;
}

Outcome hypothesis_controls() {
  Timer timer;
  const SynthConfig planted;
  const auto pos = suite_reports(generate_suite(20, planted, 1));
  const double p_ancd = hypothesis_test(pos, HopMetric::Ancd, 1).p_one_sided;
  const double p_ancc = hypothesis_test(pos, HopMetric::Ancc, 1).p_one_sided;

  SynthConfig independent;
  independent.label_mode = LabelMode::Independent;
  int reject_ancd = 0, reject_ancc = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto neg = suite_reports(generate_suite(20, independent, 1000 + s));
    reject_ancd += hypothesis_test(neg, HopMetric::Ancd, 1).p_one_sided < 0.01;
    reject_ancc += hypothesis_test(neg, HopMetric::Ancc, 1).p_one_sided < 0.01;
  }
  const double secs = timer.seconds();
  std::ostringstream d;
  d << "planted p(ANCD)=" << p_ancd << " p(ANCC)=" << p_ancc << "; independent rejections ANCD " << reject_ancd
    << "/20, ANCC " << reject_ancc << "/20; " << fmt("%.1fs", secs);
  return {p_ancd < 0.01 && p_ancc < 0.01 && reject_ancd <= 2 && reject_ancc <= 2 && secs < 120.0, d.str()};
}

// ---- 5 ----
Split parity_split(std::size_t n) {
  Split s;
  for (NodeId i = 0; i < n; ++i) {
    if (i % 2 == 0) s.train.push_back(i);
    else if (i % 4 == 1) s.valid.push_back(i);
    else s.test.push_back(i);
  }
  return s;
}

CpGcnModel perturbed_model(std::size_t in, std::size_t d, bool cp, std::uint64_t seed) {
  auto m = CpGcnModel::init(in, d, 2, cp, seed);
  std::mt19937_64 gen(seed + 17);
  std::normal_distribution<double> nd(0.0, 0.5);
  for (auto* v : {&m.w1.data(), &m.b1, &m.w2.data(), &m.b2, &m.token_table.data()})
    for (double& x : *v) x = nd(gen);
  return m;
}

Outcome gradient_correctness() {
  double worst = 0.0;
  std::size_t entries = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto inst = oracle::random_instance(12, 3.0, 0.4, 9000 + s, 5);
    const auto split = parity_split(12);
    Rng rng(s);
    const auto tokens = tokenize_labels(inst.labels, split, sample_mask(12, 0.25, rng));
    const auto adj = normalize_adjacency(inst.graph);
    for (bool cp : {false, true}) {
      const auto model = perturbed_model(5, 6, cp, s);
      const auto* tk = cp ? &tokens : nullptr;
      const auto lg = loss_and_grads(model, adj, inst.graph.node_features(), tk, inst.labels, split.train);
      const auto gc = oracle::gradient_check(model, lg.grads, inst.graph, tk, inst.labels, split.train);
      worst = std::max(worst, gc.max_rel_err);
      entries += gc.entries;
    }
  }
  std::ostringstream d;
  d << "max rel err " << worst << " over " << entries << " entries, 20 instances x 2 arms";
  return {worst < 1e-5, d.str()};
}

// ---- 6 ----
Outcome cp_accounting() {
  bool ok = true;
  std::string d;
  for (std::size_t hidden : {1, 8, 16, 64}) {
    const auto delta = CpGcnModel::init(8, hidden, 2, true, 0).parameter_count() -
                       CpGcnModel::init(8, hidden, 2, false, 0).parameter_count();
    ok &= delta == 3 * hidden && delta == count_cp_params(2, hidden);
    d += (d.empty() ? "" : ", ") + std::string("d=") + std::to_string(hidden) + ": " + std::to_string(delta);
  }
  return {ok, d};
}

// ---- 7 ----
Outcome non_leakage() {
  std::size_t changed = 0, checks = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto inst = oracle::random_instance(80, 3.0, 0.3, 700 + s, 4);
    const auto split = stratified_split(inst.labels, SplitRatios{}, s);
    TrainConfig tc;
    tc.epochs = 20;
    tc.seed = s;
    const auto model = train(inst.graph, inst.labels, split, tc).model;
    const auto before = predict(model, inst.graph, inst.labels, split);
    auto all = inst.labels;
    for (NodeId i : split.test) {
      auto one = inst.labels;
      for (Label l : {Label::Negative, Label::Positive, Label::Unknown}) {
        one[i] = l;
        changed += !(predict(model, inst.graph, one, split) == before);
        ++checks;
      }
      all[i] = all[i] == Label::Positive ? Label::Negative : Label::Positive;
    }
    changed += !(predict(model, inst.graph, all, split) == before);
    ++checks;
  }
  return {changed == 0, std::to_string(changed) + " of " + std::to_string(checks) +
                            " test-label perturbations changed predict output"};
}

// ---- 8 ----
Outcome directional_cp_gain() {
  Timer timer;
  const auto ds = generate_dataset(SynthConfig{});
  const auto split = stratified_split(ds.labels, SplitRatios{}, 0);
  TrainConfig tc;
  double f1[2], auc[2];
  for (int arm = 0; arm < 2; ++arm) {
    tc.use_cp = arm == 1;
    const auto s = summarize(run_arm(ds.graph, ds.labels, split, tc, 10, hw_workers()), Subset::Test);
    f1[arm] = s["f1"]["mean"].get<double>();
    auc[arm] = s["auc"]["mean"].get<double>();
  }
  const double secs = timer.seconds();
  std::ostringstream d;
  d << "N=" << ds.graph.num_nodes() << ", 10 seeds: F1 " << fmt("%.4f", f1[0]) << " -> " << fmt("%.4f", f1[1])
    << " (delta " << fmt("%+.4f", f1[1] - f1[0]) << "), AUC " << fmt("%.4f", auc[0]) << " -> "
    << fmt("%.4f", auc[1]) << " (delta " << fmt("%+.4f", auc[1] - auc[0]) << "); " << fmt("%.1fs", secs);
  return {f1[1] - f1[0] > 0.0 && auc[1] - auc[0] > 0.0 && secs < 300.0, d.str()};
}

// ---- 9 ----
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "cpgnn_acceptance_determinism";
  fs::remove_all(root);
  auto p = [&](const std::string& rel) { return (root / rel).string(); };
  const std::vector<std::vector<std::string>> commands{
      {"synth", "--nodes", "600", "--num-seeds", "6", "--seed", "5", "--out", p("data")},
      {"synth", "--nodes", "500", "--num-seeds", "5", "--suite", "3", "--seed", "9", "--out", p("suite")},
      {"metrics", "--data", p("data"), "--out", p("m0.json"), "--csv", p("m0.csv"), "--workers", "3"},
      {"metrics", "--data", p("suite/dataset_000"), "--out", p("m1.json")},
      {"metrics", "--data", p("suite/dataset_001"), "--out", p("m2.json")},
      {"ttest", p("m0.json"), p("m1.json"), p("m2.json"), "--out", p("t.json")},
      {"train", "--data", p("data"), "--out", p("cp"), "--cp", "--epochs", "25", "--seeds", "3", "--workers", "2"},
      {"train", "--data", p("data"), "--out", p("base"), "--no-cp", "--epochs", "25", "--seeds", "3"},
      {"report", p("base"), p("cp"), "--format", "json", "--out", p("report.json")},
  };
  const std::vector<std::string> json_outputs{"data/manifest.json", "suite/manifest.json", "m0.json", "m1.json",
                                              "m2.json", "t.json", "cp/eval.json", "base/eval.json", "report.json"};
  const std::vector<std::string> raw_outputs{"data/nodes.csv", "data/edges.csv", "data/splits.json", "m0.csv",
                                             "suite/dataset_002/nodes.csv", "cp/run_2/checkpoint.json",
                                             "cp/run_0/history.csv", "base/run_1/checkpoint.json"};
  auto run_all = [&]() -> std::vector<std::string> {
    for (auto args : commands) {
      args.insert(args.begin(), "cpgnn");
      std::ostringstream out, err;
      if (const int code = cli::run(args, out, err); code != 0)
        throw std::runtime_error(args[1] + " exited " + std::to_string(code) + ": " + err.str());
    }
    std::vector<std::string> bytes;
    for (const auto& f : json_outputs) bytes.push_back(cli::strip_timestamp(nlohmann::json::parse(slurp(root / f))).dump(2));
    for (const auto& f : raw_outputs) bytes.push_back(slurp(root / f));
    return bytes;
  };
  const auto first = run_all();
  const auto second = run_all();
  std::size_t differing = 0;
  for (std::size_t i = 0; i < first.size(); ++i) differing += first[i] != second[i];
  fs::remove_all(root);
  return {differing == 0, std::to_string(differing) + " of " + std::to_string(first.size()) +
                              " outputs differ across reruns of " + std::to_string(commands.size()) + " commands"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", metric_oracle_equivalence},
      {"metric invariants", metric_invariants},
      {"t-test correctness", ttest_correctness},
      {"hypothesis positive/negative control", hypothesis_controls},
      {"gradient correctness", gradient_correctness},
      {"CP parameter accounting", cp_accounting},
      {"non-leakage", non_leakage},
      {"directional CP gain", directional_cp_gain},
      {"determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
