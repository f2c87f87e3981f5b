#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "cpgnn/error.hpp"
#include "cpgnn/graph.hpp"

namespace cpgnn {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void fail(const fs::path& file, std::size_t line, const std::string& what) {
  throw DataError(file.filename().string() + " line " + std::to_string(line) + ": " + what);
}

double parse_real(std::string_view field, const fs::path& file, std::size_t line) {
  double v = 0.0;
  // from_chars is locale-independent and does not accept a leading '+'.
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    fail(file, line, "malformed number '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) fail(file, line, "non-finite feature value '" + std::string(field) + "'");
  return v;
}

std::uint64_t parse_id(std::string_view field, const fs::path& file, std::size_t line) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    fail(file, line, "malformed node id '" + std::string(field) + "'");
  }
  return v;
}

struct CsvReader {
  explicit CsvReader(const fs::path& p) : path(p), in(p) {
    if (!in) throw DataError("cannot open " + p.string());
  }
  // Next non-empty line; false at EOF.
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  }
  fs::path path;
  std::ifstream in;
  std::size_t line_no = 0;
};

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Dataset load_graph(const fs::path& nodes_path, const fs::path& edges_path) {
  CsvReader nodes(nodes_path);
  std::string line;
  if (!nodes.next(line)) fail(nodes_path, nodes.line_no, "missing header");
  const auto header = split_fields(line);
  if (header.size() < 2 || header.front() != "node_id" || header.back() != "label") {
    fail(nodes_path, nodes.line_no, "header must be node_id,f_0,...,label");
  }
  const std::size_t d1 = header.size() - 2;

  std::vector<std::pair<std::uint64_t, std::size_t>> ids;  // (id, row)
  std::vector<double> feats;
  std::vector<Label> row_labels;
  while (nodes.next(line)) {
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      fail(nodes_path, nodes.line_no,
           "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    ids.push_back({parse_id(f[0], nodes_path, nodes.line_no), row_labels.size()});
    for (std::size_t j = 0; j < d1; ++j) feats.push_back(parse_real(f[1 + j], nodes_path, nodes.line_no));
    const auto lab = f.back();
    if (lab == "0") row_labels.push_back(Label::Negative);
    else if (lab == "1") row_labels.push_back(Label::Positive);
    else if (lab == "?") row_labels.push_back(Label::Unknown);
    else fail(nodes_path, nodes.line_no, "label must be 0, 1 or ?, got '" + std::string(lab) + "'");
  }
  const std::size_t n = ids.size();
  std::vector<std::size_t> row_of(n, n);
  for (const auto& [id, row] : ids) {
    if (id >= n) throw DataError(nodes_path.filename().string() + ": node ids must be contiguous 0..N-1, found " + std::to_string(id));
    if (row_of[id] != n) throw DataError(nodes_path.filename().string() + ": duplicate node id " + std::to_string(id));
    row_of[id] = row;
  }
  Matrix x(n, d1);
  LabelVector labels(n);
  for (std::size_t id = 0; id < n; ++id) {
    const std::size_t r = row_of[id];
    for (std::size_t j = 0; j < d1; ++j) x(id, j) = feats[r * d1 + j];
    labels[id] = row_labels[r];
  }

  CsvReader edges(edges_path);
  if (!edges.next(line)) fail(edges_path, edges.line_no, "missing header");
  const auto eheader = split_fields(line);
  if (eheader.size() < 2 || eheader[0] != "src" || eheader[1] != "dst") {
    fail(edges_path, edges.line_no, "header must be src,dst,g_0,...");
  }
  const std::size_t d2 = eheader.size() - 2;
  std::vector<std::pair<NodeId, NodeId>> pairs;
  std::vector<double> efeats;
  while (edges.next(line)) {
    const auto f = split_fields(line);
    if (f.size() != eheader.size()) {
      fail(edges_path, edges.line_no,
           "expected " + std::to_string(eheader.size()) + " fields, got " + std::to_string(f.size()));
    }
    const auto a = parse_id(f[0], edges_path, edges.line_no);
    const auto b = parse_id(f[1], edges_path, edges.line_no);
    if (a >= n || b >= n) {
      fail(edges_path, edges.line_no, "dangling node id " + std::to_string(a >= n ? a : b));
    }
    pairs.push_back({static_cast<NodeId>(a), static_cast<NodeId>(b)});
    for (std::size_t j = 0; j < d2; ++j) efeats.push_back(parse_real(f[2 + j], edges_path, edges.line_no));
  }
  Matrix ef(pairs.size(), d2, std::move(efeats));

  Dataset ds;
  ds.graph = RoadGraph::build(n, pairs, std::move(x), std::move(ef), &ds.load_stats);
  ds.labels = std::move(labels);
  return ds;
}

void save_graph(const RoadGraph& graph, const LabelVector& labels, const fs::path& nodes_path,
                const fs::path& edges_path) {
  if (labels.size() != graph.num_nodes()) throw DataError("label count != num_nodes");
  {
    std::ofstream out(nodes_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + nodes_path.string());
    const auto& x = graph.node_features();
    out << "node_id";
    for (std::size_t j = 0; j < x.cols(); ++j) out << ",f_" << j;
    out << ",label\n";
    for (std::size_t i = 0; i < graph.num_nodes(); ++i) {
      out << i;
      for (double v : x.row(i)) out << ',' << format_double(v);
      out << ',' << (labels[i] == Label::Unknown ? "?" : labels[i] == Label::Positive ? "1" : "0") << '\n';
    }
  }
  std::ofstream out(edges_path, std::ios::binary);
  if (!out) throw DataError("cannot write " + edges_path.string());
  const auto& ef = graph.edge_features();
  out << "src,dst";
  for (std::size_t j = 0; j < ef.cols(); ++j) out << ",g_" << j;
  out << '\n';
  for (std::size_t e = 0; e < graph.edges().size(); ++e) {
    out << graph.edges()[e].u << ',' << graph.edges()[e].v;
    for (double v : ef.row(e)) out << ',' << format_double(v);
    out << '\n';
  }
}

Split load_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    Split s;
    s.train = j.at("train").get<std::vector<NodeId>>();
    s.valid = j.at("valid").get<std::vector<NodeId>>();
    s.test = j.at("test").get<std::vector<NodeId>>();
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.valid.begin(), s.valid.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
}

void save_split(const Split& split, const fs::path& path) {
  nlohmann::json j{{"train", split.train}, {"valid", split.valid}, {"test", split.test}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
}

}  // namespace cpgnn
