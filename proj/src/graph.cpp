#include "f2/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "f2/errors.hpp"

namespace f2 {

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

[[noreturn]] void parse_fail(const std::string& file, int lineno, const std::string& what) {
  throw ParseError(file + " line " + std::to_string(lineno) + ": " + what);
}

int parse_int(const std::string& tok, const std::string& file, int lineno) {
  int out = 0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e) parse_fail(file, lineno, "expected integer, got '" + tok + "'");
  return out;
}

double parse_double(const std::string& tok, const std::string& file, int lineno) {
  double out = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e) parse_fail(file, lineno, "expected number, got '" + tok + "'");
  if (!std::isfinite(out)) parse_fail(file, lineno, "non-finite value '" + tok + "'");
  return out;
}

std::ifstream open_or_fail(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return in;
}

}  // namespace

AdjScheme adj_scheme_from_string(const std::string& s) {
  if (s == "sym-selfloop") return AdjScheme::SymSelfloop;
  if (s == "rw-selfloop") return AdjScheme::RwSelfloop;
  if (s == "raw") return AdjScheme::Raw;
  throw UsageError("unknown adjacency scheme '" + s + "' (expected sym-selfloop, rw-selfloop, or raw)");
}

Graph load_graph(const std::string& dir) {
  namespace fs = std::filesystem;
  Graph g;

  // labels.tsv fixes n and the class count
  {
    const std::string path = dir + "/labels.tsv";
    std::ifstream in = open_or_fail(path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(line);
      if (line.empty()) parse_fail(path, lineno, "empty line");
      const int label = parse_int(line, path, lineno);
      if (label < 0) parse_fail(path, lineno, "negative class id " + std::to_string(label));
      g.labels.push_back(label);
      g.num_classes = std::max(g.num_classes, label + 1);
    }
    g.n = static_cast<int>(g.labels.size());
    if (g.n == 0) throw ParseError(path + ": no nodes");
  }

  // features.csv, one row per node
  {
    const std::string path = dir + "/features.csv";
    std::ifstream in = open_or_fail(path);
    std::string line;
    int lineno = 0;
    std::vector<std::vector<double>> rows;
    int width = -1;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(line);
      std::vector<double> row;
      std::size_t start = 0;
      while (true) {
        const std::size_t comma = line.find(',', start);
        const std::string tok = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        row.push_back(parse_double(tok, path, lineno));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      if (width < 0) width = static_cast<int>(row.size());
      if (static_cast<int>(row.size()) != width)
        parse_fail(path, lineno, "expected " + std::to_string(width) + " values, got " + std::to_string(row.size()));
      rows.push_back(std::move(row));
    }
    if (static_cast<int>(rows.size()) != g.n)
      throw ParseError(path + ": " + std::to_string(rows.size()) + " feature rows for " + std::to_string(g.n) + " nodes");
    g.features = DenseTensor::from_rows(rows);
  }

  // edges.tsv, undirected, one pair per line
  {
    const std::string path = dir + "/edges.tsv";
    std::ifstream in = open_or_fail(path);
    std::string line;
    int lineno = 0;
    std::set<std::pair<int, int>> seen;
    long collapsed = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_cr(line);
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos) parse_fail(path, lineno, "expected 'u<TAB>v'");
      int u = parse_int(line.substr(0, tab), path, lineno);
      int v = parse_int(line.substr(tab + 1), path, lineno);
      if (u < 0 || u >= g.n || v < 0 || v >= g.n)
        parse_fail(path, lineno, "edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range for n=" + std::to_string(g.n));
      if (u == v) parse_fail(path, lineno, "self-loop at node " + std::to_string(u));
      if (u > v) std::swap(u, v);
      if (!seen.insert({u, v}).second) ++collapsed;
    }
    if (collapsed > 0)
      std::cerr << "warning: " << path << ": collapsed " << collapsed
                << " duplicate/reversed edge line(s)\n";
    g.edges.assign(seen.begin(), seen.end());
  }

  // masks.tsv is optional
  {
    const std::string path = dir + "/masks.tsv";
    if (fs::exists(path)) {
      std::ifstream in = open_or_fail(path);
      std::string line;
      int lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (lineno > g.n) parse_fail(path, lineno, "more mask lines than nodes");
        const int node = lineno - 1;
        if (line == "train") g.masks.train.push_back(node);
        else if (line == "val") g.masks.val.push_back(node);
        else if (line == "test") g.masks.test.push_back(node);
        else if (line != "none")
          parse_fail(path, lineno, "expected train|val|test|none, got '" + line + "'");
      }
      if (lineno != g.n)
        throw ParseError(path + ": " + std::to_string(lineno) + " mask lines for " + std::to_string(g.n) + " nodes");
    }
  }

  return g;
}

void save_graph(const Graph& g, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream out(dir + "/labels.tsv");
    for (int label : g.labels) out << label << "\n";
  }
  {
    std::ofstream out(dir + "/features.csv");
    char buf[64];
    for (int r = 0; r < g.features.rows(); ++r) {
      for (int c = 0; c < g.features.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", g.features.at(r, c));
        if (c) out << ',';
        out << buf;
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(dir + "/edges.tsv");
    for (const auto& [u, v] : g.edges) out << u << '\t' << v << "\n";
  }
  if (g.has_masks()) {
    std::vector<std::string> tags(static_cast<std::size_t>(g.n), "none");
    for (int u : g.masks.train) tags[(std::size_t)u] = "train";
    for (int u : g.masks.val) tags[(std::size_t)u] = "val";
    for (int u : g.masks.test) tags[(std::size_t)u] = "test";
    std::ofstream out(dir + "/masks.tsv");
    for (const auto& t : tags) out << t << "\n";
  }
}

double homophily_ratio(const Graph& g) {
  if (g.edges.empty()) throw UsageError("homophily ratio needs a non-empty edge set");
  long same = 0;
  for (const auto& [u, v] : g.edges)
    if (g.labels[(std::size_t)u] == g.labels[(std::size_t)v]) ++same;
  return static_cast<double>(same) / static_cast<double>(g.edges.size());
}

SparseMatrix normalize_adjacency(const Graph& g, AdjScheme scheme) {
  std::vector<CooEntry> entries;
  if (scheme == AdjScheme::Raw) {
    entries.reserve(g.edges.size() * 2);
    for (const auto& [u, v] : g.edges) {
      entries.push_back({u, v, 1.0});
      entries.push_back({v, u, 1.0});
    }
    return SparseMatrix(g.n, entries);
  }

  std::vector<double> deg(static_cast<std::size_t>(g.n), 1.0);  // self-loop included
  for (const auto& [u, v] : g.edges) {
    deg[(std::size_t)u] += 1.0;
    deg[(std::size_t)v] += 1.0;
  }
  entries.reserve(g.edges.size() * 2 + static_cast<std::size_t>(g.n));
  if (scheme == AdjScheme::SymSelfloop) {
    for (const auto& [u, v] : g.edges) {
      const double w = 1.0 / std::sqrt(deg[(std::size_t)u] * deg[(std::size_t)v]);
      entries.push_back({u, v, w});
      entries.push_back({v, u, w});
    }
    for (int u = 0; u < g.n; ++u) entries.push_back({u, u, 1.0 / deg[(std::size_t)u]});
  } else {  // RwSelfloop
    for (const auto& [u, v] : g.edges) {
      entries.push_back({u, v, 1.0 / deg[(std::size_t)u]});
      entries.push_back({v, u, 1.0 / deg[(std::size_t)v]});
    }
    for (int u = 0; u < g.n; ++u) entries.push_back({u, u, 1.0 / deg[(std::size_t)u]});
  }
  return SparseMatrix(g.n, entries);
}

SplitMasks split_nodes(const Graph& g, const SplitConfig& cfg) {
  auto check_frac = [](double f, const char* name) {
    if (!(f > 0.0 && f < 1.0))
      throw UsageError(std::string(name) + " fraction must lie in (0,1)");
  };
  check_frac(cfg.train_frac, "train");
  check_frac(cfg.val_frac, "val");
  check_frac(cfg.test_frac, "test");
  if (cfg.train_frac + cfg.val_frac + cfg.test_frac > 1.0 + 1e-12)
    throw UsageError("split fractions sum to more than 1");

  Rng rng(cfg.seed);
  SplitMasks out;
  auto assign = [&](std::vector<int>& ids) {
    rng.shuffle(ids);
    const auto total = static_cast<double>(ids.size());
    const std::size_t n_tr = static_cast<std::size_t>(std::floor(cfg.train_frac * total));
    const std::size_t n_va = static_cast<std::size_t>(std::floor(cfg.val_frac * total));
    const std::size_t n_te = static_cast<std::size_t>(std::floor(cfg.test_frac * total));
    std::size_t i = 0;
    for (std::size_t k = 0; k < n_tr; ++k) out.train.push_back(ids[i++]);
    for (std::size_t k = 0; k < n_va; ++k) out.val.push_back(ids[i++]);
    for (std::size_t k = 0; k < n_te; ++k) out.test.push_back(ids[i++]);
    // leftover ids stay unassigned
    return std::min({n_tr, n_va, n_te});
  };

  if (cfg.stratified) {
    std::map<int, std::vector<int>> by_class;
    for (int u = 0; u < g.n; ++u) by_class[g.labels[(std::size_t)u]].push_back(u);
    for (auto& [cls, ids] : by_class) {
      if (assign(ids) == 0)
        throw UsageError("class " + std::to_string(cls) + " has too few nodes (" +
                         std::to_string(ids.size()) + ") to stratify");
    }
  } else {
    std::vector<int> ids(static_cast<std::size_t>(g.n));
    for (int u = 0; u < g.n; ++u) ids[(std::size_t)u] = u;
    assign(ids);
  }

  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Graph generate_synthetic(const SbmConfig& cfg) {
  if (cfg.n <= 0) throw UsageError("synthetic graph needs n > 0");
  if (cfg.num_classes <= 0 || cfg.n < cfg.num_classes)
    throw UsageError("synthetic graph needs n >= classes >= 1");
  if (cfg.feature_dim <= 0) throw UsageError("synthetic graph needs feature dim > 0");
  auto check_prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw UsageError(std::string(name) + " probability must lie in [0,1]");
  };
  check_prob(cfg.intra_prob, "intra-edge");
  check_prob(cfg.inter_prob, "inter-edge");

  Rng rng(cfg.seed);
  Graph g;
  g.n = cfg.n;
  g.num_classes = cfg.num_classes;
  g.labels.resize(static_cast<std::size_t>(cfg.n));
  for (int u = 0; u < cfg.n; ++u) g.labels[(std::size_t)u] = u % cfg.num_classes;

  // class means first, then node features, then edges: fixed draw order makes
  // the whole graph reproducible per seed
  DenseTensor means(cfg.num_classes, cfg.feature_dim);
  for (std::size_t i = 0; i < means.size(); ++i)
    means.data()[i] = cfg.feature_signal * rng.normal();

  g.features = DenseTensor(cfg.n, cfg.feature_dim);
  for (int u = 0; u < cfg.n; ++u)
    for (int j = 0; j < cfg.feature_dim; ++j)
      g.features.at(u, j) = means.at(g.labels[(std::size_t)u], j) + rng.normal();

  for (int u = 0; u < cfg.n; ++u)
    for (int v = u + 1; v < cfg.n; ++v) {
      const double p = (g.labels[(std::size_t)u] == g.labels[(std::size_t)v])
                           ? cfg.intra_prob
                           : cfg.inter_prob;
      if (rng.bernoulli(p)) g.edges.push_back({u, v});
    }
  return g;
}

GraphOps build_graph_ops(const Graph& g) {
  GraphOps ops{normalize_adjacency(g, AdjScheme::SymSelfloop),
               SparseMatrix(g.n, {}),
               normalize_adjacency(g, AdjScheme::Raw),
               GatStructure{}};

  std::vector<double> deg(static_cast<std::size_t>(g.n), 0.0);
  for (const auto& [u, v] : g.edges) {
    deg[(std::size_t)u] += 1.0;
    deg[(std::size_t)v] += 1.0;
  }
  std::vector<CooEntry> mean_entries;
  mean_entries.reserve(g.edges.size() * 2);
  for (const auto& [u, v] : g.edges) {
    mean_entries.push_back({u, v, 1.0 / deg[(std::size_t)u]});
    mean_entries.push_back({v, u, 1.0 / deg[(std::size_t)v]});
  }
  ops.a_mean = SparseMatrix(g.n, mean_entries);

  std::vector<std::vector<int>> nbr(static_cast<std::size_t>(g.n));
  for (int u = 0; u < g.n; ++u) nbr[(std::size_t)u].push_back(u);
  for (const auto& [u, v] : g.edges) {
    nbr[(std::size_t)u].push_back(v);
    nbr[(std::size_t)v].push_back(u);
  }
  ops.gat.n = g.n;
  ops.gat.ptr.resize(static_cast<std::size_t>(g.n) + 1, 0);
  for (int u = 0; u < g.n; ++u) {
    auto& list = nbr[(std::size_t)u];
    std::sort(list.begin(), list.end());
    ops.gat.ptr[(std::size_t)u + 1] = ops.gat.ptr[(std::size_t)u] + static_cast<int>(list.size());
    ops.gat.idx.insert(ops.gat.idx.end(), list.begin(), list.end());
  }
  return ops;
}

}  // namespace f2
