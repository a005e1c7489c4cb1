#include "fairgnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fairgnn/error.hpp"
#include "fairgnn/rng.hpp"

namespace fairgnn {

namespace {

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

std::optional<double> parse_double(const std::string& cell) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = cell.data() + cell.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  if (b < e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(const std::string& cell) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    // Accept integral floats such as "1.0".
    if (auto d = parse_double(cell); d && std::floor(*d) == *d) return static_cast<long long>(*d);
    return std::nullopt;
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Balanced fill: item i goes to the bucket furthest behind its target share.
std::vector<int> balanced_assignment(std::size_t n, std::span<const double> fractions) {
  std::vector<int> out(n);
  std::vector<double> counts(fractions.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    double best_deficit = -1e300;
    for (std::size_t s = 0; s < fractions.size(); ++s) {
      const double deficit = static_cast<double>(i + 1) * fractions[s] - counts[s];
      if (deficit > best_deficit + 1e-12) {
        best_deficit = deficit;
        best = static_cast<int>(s);
      }
    }
    out[i] = best;
    counts[static_cast<std::size_t>(best)] += 1.0;
  }
  return out;
}

Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& keep) {
  std::vector<long long> remap(g.n_nodes, -1);
  for (std::size_t i = 0; i < keep.size(); ++i) remap[keep[i]] = static_cast<long long>(i);
  Graph out;
  out.n_nodes = keep.size();
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const std::size_t v = keep[i];
    for (std::size_t k = g.adjacency.row_begin(v); k < g.adjacency.row_end(v); ++k) {
      const long long u = remap[g.adjacency.indices()[k]];
      if (u >= 0 && static_cast<std::size_t>(u) > i) edges.emplace_back(i, static_cast<std::size_t>(u));
    }
  }
  out.adjacency = symmetric_adjacency(out.n_nodes, edges);
  out.features = Tensor(keep.size(), g.features.cols());
  for (std::size_t i = 0; i < keep.size(); ++i)
    std::copy(g.features.row(keep[i]).begin(), g.features.row(keep[i]).end(),
              out.features.row(i).begin());
  out.feature_names = g.feature_names;
  out.continuous = g.continuous;
  auto pick = [&](const std::vector<int>& src) {
    std::vector<int> dst;
    if (src.empty()) return dst;
    for (std::size_t v : keep) dst.push_back(src[v]);
    return dst;
  };
  out.labels = pick(g.labels);
  out.fairness = pick(g.fairness);
  out.privacy = pick(g.privacy);
  out.n_attributes = g.n_attributes;
  for (std::size_t v : keep)
    if (v < g.node_ids.size()) out.node_ids.push_back(g.node_ids[v]);
  out.raw.columns = g.raw.columns;
  for (const auto& col : g.raw.cells) {
    std::vector<std::string> c;
    c.reserve(keep.size());
    for (std::size_t v : keep) c.push_back(col[v]);
    out.raw.cells.push_back(std::move(c));
  }
  return out;
}

}  // namespace

const std::vector<std::string>* AttributeTable::find(const std::string& column) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == column) return &cells[i];
  return nullptr;
}

int Graph::n_classes() const {
  int m = -1;
  for (int y : labels) m = std::max(m, y);
  return m + 1;
}

const std::vector<int>& Graph::attribute(AttributeRole role) const {
  switch (role) {
    case AttributeRole::label: return labels;
    case AttributeRole::fairness: return fairness;
    case AttributeRole::privacy: return privacy;
  }
  return labels;
}

int Graph::n_groups(AttributeRole role) const {
  int m = -1;
  for (int a : attribute(role)) m = std::max(m, a);
  return m + 1;
}

std::vector<std::size_t> Graph::labeled_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels[v] != kUnlabeled) out.push_back(v);
  return out;
}

void Graph::validate() const {
  if (adjacency.rows() != n_nodes || adjacency.cols() != n_nodes)
    throw Error("graph: adjacency shape does not match node count");
  if (features.rows() != n_nodes) throw Error("graph: feature rows != node count");
  if (labels.size() != n_nodes || fairness.size() != n_nodes || privacy.size() != n_nodes)
    throw Error("graph: attribute vectors must have one entry per node");
  const SparseMatrix& a = adjacency;
  for (std::size_t v = 0; v < n_nodes; ++v) {
    for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k) {
      const std::size_t u = a.indices()[k];
      if (u == v) throw Error("graph: self-loop stored at node " + std::to_string(v));
      const auto b = a.indices().begin() + static_cast<std::ptrdiff_t>(a.row_begin(u));
      const auto e = a.indices().begin() + static_cast<std::ptrdiff_t>(a.row_end(u));
      if (!std::binary_search(b, e, v))
        throw Error("graph: adjacency not symmetric at (" + std::to_string(v) + "," +
                    std::to_string(u) + ")");
    }
  }
  for (std::size_t v = 0; v < n_nodes; ++v) {
    if (labels[v] != kUnlabeled && (fairness[v] < 0 || privacy[v] < 0))
      throw Error("graph: labeled node " + std::to_string(v) + " lacks a sensitive attribute");
  }
  if (edge_weights) {
    if (edge_weights->size() != a.nnz()) throw Error("graph: edge weights not aligned with adjacency");
    for (double w : *edge_weights)
      if (!(w > 0.0)) throw Error("graph: edge weights must be strictly positive");
  }
}

SparseMatrix symmetric_adjacency(std::size_t n,
                                 std::span<const std::pair<std::size_t, std::size_t>> edges) {
  std::vector<SparseMatrix::Triplet> t;
  t.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u == v) continue;
    t.push_back({u, v, 1.0});
    t.push_back({v, u, 1.0});
  }
  SparseMatrix m = SparseMatrix::from_triplets(n, n, std::move(t));
  // Collapse duplicate edges to unit weight.
  std::vector<double> ones(m.nnz(), 1.0);
  return m.with_values(std::move(ones));
}

DerivationRule DerivationRule::parse(const std::string& text) {
  DerivationRule r;
  auto arg = [&](const std::string& prefix) -> int {
    const std::string rest = text.substr(prefix.size());
    auto v = parse_int(rest);
    if (!v || *v < 1) throw Error("derivation rule '" + text + "': expected positive integer");
    return static_cast<int>(*v);
  };
  if (text.empty() || text == "identity") {
    r.kind = Kind::identity;
  } else if (text == "median") {
    r.kind = Kind::median_threshold;
  } else if (text.rfind("quantile:", 0) == 0) {
    r.kind = Kind::quantile_bins;
    r.k = arg("quantile:");
  } else if (text.rfind("top:", 0) == 0) {
    r.kind = Kind::category_select;
    r.k = arg("top:");
  } else {
    throw Error("unknown derivation rule '" + text +
                "' (expected identity, median, quantile:<k> or top:<k>)");
  }
  return r;
}

std::string DerivationRule::to_string() const {
  switch (kind) {
    case Kind::identity: return "identity";
    case Kind::median_threshold: return "median";
    case Kind::quantile_bins: return "quantile:" + std::to_string(k);
    case Kind::category_select: return "top:" + std::to_string(k);
  }
  return "identity";
}

Graph derive_attribute(const Graph& graph, const std::string& column, const DerivationRule& rule,
                       AttributeRole role) {
  const auto* cells = graph.raw.find(column);
  if (!cells) throw Error("derive_attribute: unknown column '" + column + "'");
  const std::size_t n = cells->size();
  std::vector<int> out(n, kUnlabeled);
  using Kind = DerivationRule::Kind;

  auto numeric = [&]() {
    std::vector<std::pair<double, std::size_t>> vals;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_missing((*cells)[i])) continue;
      auto v = parse_double((*cells)[i]);
      if (!v) {
        throw Error("derive_attribute: non-numeric cell '" + (*cells)[i] + "' in column '" +
                    column + "' row " + std::to_string(i));
      }
      vals.emplace_back(*v, i);
    }
    return vals;
  };

  switch (rule.kind) {
    case Kind::identity: {
      bool all_int = true;
      std::set<std::string> distinct;
      for (const auto& c : *cells) {
        if (is_missing(c)) continue;
        if (!parse_int(c)) all_int = false;
        distinct.insert(c);
      }
      if (all_int) {
        for (std::size_t i = 0; i < n; ++i) {
          if (is_missing((*cells)[i])) continue;
          const long long v = *parse_int((*cells)[i]);
          out[i] = v < 0 ? kUnlabeled : static_cast<int>(v);
        }
      } else {
        std::map<std::string, int> codes;
        for (const auto& s : distinct) codes.emplace(s, static_cast<int>(codes.size()));
        for (std::size_t i = 0; i < n; ++i)
          if (!is_missing((*cells)[i])) out[i] = codes.at((*cells)[i]);
      }
      break;
    }
    case Kind::median_threshold: {
      auto vals = numeric();
      if (vals.empty()) throw Error("derive_attribute: degenerate threshold (no values) in '" + column + "'");
      std::vector<double> v;
      for (auto& p : vals) v.push_back(p.first);
      std::sort(v.begin(), v.end());
      if (v.front() == v.back())
        throw Error("derive_attribute: degenerate threshold (constant column '" + column + "')");
      const std::size_t m = v.size();
      const double median = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
      for (auto& [x, i] : vals) out[i] = x > median ? 1 : 0;
      break;
    }
    case Kind::quantile_bins: {
      auto vals = numeric();
      std::sort(vals.begin(), vals.end());
      const std::size_t m = vals.size();
      for (std::size_t r = 0; r < m; ++r)
        out[vals[r].second] = static_cast<int>(r * static_cast<std::size_t>(rule.k) / m);
      break;
    }
    case Kind::category_select: {
      std::map<std::string, std::size_t> counts;
      for (const auto& c : *cells)
        if (!is_missing(c)) ++counts[c];
      std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      std::map<std::string, int> codes;
      for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(rule.k); ++i)
        codes.emplace(ranked[i].first, static_cast<int>(i));
      for (std::size_t i = 0; i < n; ++i) {
        auto it = codes.find((*cells)[i]);
        if (it != codes.end()) out[i] = it->second;
      }
      break;
    }
  }

  Graph g = graph;
  switch (role) {
    case AttributeRole::label: g.labels = std::move(out); break;
    case AttributeRole::fairness: g.fairness = std::move(out); break;
    case AttributeRole::privacy: g.privacy = std::move(out); break;
  }
  return g;
}

Graph load_tabular_graph(const std::filesystem::path& nodes_file,
                         const std::filesystem::path& edges_file, const TabularSchema& schema) {
  std::ifstream in(nodes_file);
  if (!in) throw LoadError("cannot open nodes file " + nodes_file.string());
  std::string header;
  if (!std::getline(in, header)) throw LoadError("nodes file " + nodes_file.string() + " is empty");
  strip_cr(header);
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  Graph g;
  g.raw.columns = split_csv_line(header, delim);
  const std::size_t ncol = g.raw.columns.size();
  g.raw.cells.assign(ncol, {});
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    ++row;
    auto cells = split_csv_line(line, delim);
    if (cells.size() != ncol) {
      throw LoadError(nodes_file.string() + " row " + std::to_string(row) + ": expected " +
                      std::to_string(ncol) + " cells, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < ncol; ++c) g.raw.cells[c].push_back(std::move(cells[c]));
  }
  const auto* ids = g.raw.find(schema.id_column);
  if (!ids) throw LoadError("nodes file lacks id column '" + schema.id_column + "'");
  g.n_nodes = ids->size();
  g.n_attributes = ncol - 1;
  g.node_ids = *ids;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids->size(); ++i) {
    if (!index.emplace((*ids)[i], i).second)
      throw LoadError("duplicate node id '" + (*ids)[i] + "'");
  }

  // Edges.
  std::ifstream ein(edges_file);
  if (!ein) throw LoadError("cannot open edges file " + edges_file.string());
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::size_t lineno = 0;
  while (std::getline(ein, line)) {
    ++lineno;
    strip_cr(line);
    if (lineno == 1 && schema.edges_header) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::string a, b;
    if (!(ss >> a)) continue;
    if (a.front() == '#') continue;
    if (!(ss >> b)) throw LoadError("edges line " + std::to_string(lineno) + ": expected an id pair");
    auto ia = index.find(a);
    if (ia == index.end()) throw LoadError("edges line " + std::to_string(lineno) + ": unknown node id '" + a + "'");
    auto ib = index.find(b);
    if (ib == index.end()) throw LoadError("edges line " + std::to_string(lineno) + ": unknown node id '" + b + "'");
    edges.emplace_back(ia->second, ib->second);
  }
  g.adjacency = symmetric_adjacency(g.n_nodes, edges);

  // Features.
  std::set<std::string> reserved{schema.id_column, schema.label.column, schema.fairness.column};
  if (schema.privacy) reserved.insert(schema.privacy->column);
  for (const auto& e : schema.exclude) reserved.insert(e);
  std::vector<std::string> feature_cols = schema.features;
  if (feature_cols.empty()) {
    for (const auto& c : g.raw.columns)
      if (!reserved.count(c)) feature_cols.push_back(c);
  }
  const std::set<std::string> categorical(schema.categorical.begin(), schema.categorical.end());
  std::vector<std::vector<double>> cols;
  for (const auto& name : feature_cols) {
    const auto* cells = g.raw.find(name);
    if (!cells) throw LoadError("schema names unknown feature column '" + name + "'");
    if (categorical.count(name)) {
      std::set<std::string> levels;
      bool any_missing = false;
      for (const auto& c : *cells) {
        if (is_missing(c)) any_missing = true;
        else levels.insert(c);
      }
      for (const auto& level : levels) {
        std::vector<double> col(g.n_nodes);
        for (std::size_t i = 0; i < g.n_nodes; ++i) col[i] = (*cells)[i] == level ? 1.0 : 0.0;
        cols.push_back(std::move(col));
        g.feature_names.push_back(name + "=" + level);
        g.continuous.push_back(false);
      }
      if (any_missing) {
        std::vector<double> col(g.n_nodes);
        for (std::size_t i = 0; i < g.n_nodes; ++i) col[i] = is_missing((*cells)[i]) ? 1.0 : 0.0;
        cols.push_back(std::move(col));
        g.feature_names.push_back(name + "=missing");
        g.continuous.push_back(false);
      }
    } else {
      std::vector<double> col(g.n_nodes);
      std::vector<bool> missing(g.n_nodes, false);
      double sum = 0.0;
      std::size_t present = 0;
      for (std::size_t i = 0; i < g.n_nodes; ++i) {
        const std::string& c = (*cells)[i];
        if (is_missing(c)) {
          missing[i] = true;
          continue;
        }
        auto v = parse_double(c);
        if (!v) {
          throw LoadError(nodes_file.string() + " row " + std::to_string(i + 1) + ", column '" +
                          name + "': non-numeric feature cell '" + c + "'");
        }
        col[i] = *v;
        sum += *v;
        ++present;
      }
      const double mean = present ? sum / static_cast<double>(present) : 0.0;
      for (std::size_t i = 0; i < g.n_nodes; ++i)
        if (missing[i]) col[i] = mean;
      cols.push_back(std::move(col));
      g.feature_names.push_back(name);
      g.continuous.push_back(true);
    }
  }
  g.features = Tensor(g.n_nodes, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t i = 0; i < g.n_nodes; ++i) g.features(i, c) = cols[c][i];
  std::vector<std::size_t> all(g.n_nodes);
  std::iota(all.begin(), all.end(), 0);
  g = standardize_features(g, all);

  g = derive_attribute(g, schema.label.column, schema.label.rule, AttributeRole::label);
  g = derive_attribute(g, schema.fairness.column, schema.fairness.rule, AttributeRole::fairness);
  if (schema.privacy) {
    g = derive_attribute(g, schema.privacy->column, schema.privacy->rule, AttributeRole::privacy);
  } else {
    g.privacy.assign(g.n_nodes, 0);
  }
  std::size_t dropped = 0;
  for (std::size_t v = 0; v < g.n_nodes; ++v) {
    if (g.labels[v] != kUnlabeled && (g.fairness[v] < 0 || g.privacy[v] < 0)) {
      g.labels[v] = kUnlabeled;
      ++dropped;
    }
  }
  if (dropped) {
    warn(std::to_string(dropped) + " labeled nodes lack a sensitive attribute; marked unlabeled");
  }
  g.validate();
  return g;
}

Graph standardize_features(const Graph& graph, std::span<const std::size_t> nodes) {
  Graph g = graph;
  if (nodes.empty()) return g;
  const double m = static_cast<double>(nodes.size());
  for (std::size_t c = 0; c < g.features.cols(); ++c) {
    if (c < g.continuous.size() && !g.continuous[c]) continue;
    double mean = 0.0;
    for (std::size_t v : nodes) mean += g.features(v, c);
    mean /= m;
    double var = 0.0;
    for (std::size_t v : nodes) {
      const double d = g.features(v, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / m);
    const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
    for (std::size_t v = 0; v < g.n_nodes; ++v) g.features(v, c) = (g.features(v, c) - mean) * inv;
  }
  return g;
}

Graph extract_region(const Graph& graph, const std::string& column, const std::string& prefix) {
  const auto* cells = graph.raw.find(column);
  if (!cells) throw Error("extract_region: unknown column '" + column + "'");
  std::vector<bool> in_region(graph.n_nodes, false);
  for (std::size_t v = 0; v < graph.n_nodes; ++v) in_region[v] = (*cells)[v].rfind(prefix, 0) == 0;

  // Largest connected component of the induced subgraph.
  std::vector<int> comp(graph.n_nodes, -1);
  int best = -1;
  std::size_t best_size = 0;
  int next = 0;
  for (std::size_t s = 0; s < graph.n_nodes; ++s) {
    if (!in_region[s] || comp[s] >= 0) continue;
    std::size_t size = 0;
    std::queue<std::size_t> q;
    q.push(s);
    comp[s] = next;
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop();
      ++size;
      for (std::size_t k = graph.adjacency.row_begin(v); k < graph.adjacency.row_end(v); ++k) {
        const std::size_t u = graph.adjacency.indices()[k];
        if (in_region[u] && comp[u] < 0) {
          comp[u] = next;
          q.push(u);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = next;
    }
    ++next;
  }
  std::vector<std::size_t> keep;
  for (std::size_t v = 0; v < graph.n_nodes; ++v)
    if (comp[v] == best && best >= 0) keep.push_back(v);
  return induced_subgraph(graph, keep);
}

NodeSplit make_splits(const Graph& graph, SplitFractions fractions, std::uint64_t seed) {
  const double total = fractions.train + fractions.val + fractions.test;
  if (std::abs(total - 1.0) > 1e-9 || fractions.train < 0 || fractions.val < 0 || fractions.test < 0)
    throw Error("make_splits: fractions must be non-negative and sum to 1");
  std::vector<std::size_t> labeled = graph.labeled_nodes();
  if (labeled.size() < 4) throw Error("make_splits: need at least 4 labeled nodes");

  Rng rng = Rng::stream(seed, "split");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t v : labeled) by_class[graph.labels[v]].push_back(v);
  bool stratify = true;
  for (const auto& [c, members] : by_class) {
    if (members.size() < 4) {
      warn("make_splits: class " + std::to_string(c) + " has " + std::to_string(members.size()) +
           " members; falling back to an unstratified shuffle");
      stratify = false;
    }
  }
  std::vector<std::size_t> order;
  if (stratify) {
    for (auto& [c, members] : by_class) {
      rng.shuffle(members);
      order.insert(order.end(), members.begin(), members.end());
    }
  } else {
    order = labeled;
    rng.shuffle(order);
  }
  // Interleaved assignment keeps every class's share within one node per split.
  const double f[3] = {fractions.train, fractions.val, fractions.test};
  const auto slots = balanced_assignment(order.size(), f);
  NodeSplit split;
  split.seed = seed;
  split.stratified = stratify;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (slots[i] == 0 ? split.train : slots[i] == 1 ? split.val : split.test).push_back(order[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void SyntheticSpec::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(std::string("synthetic spec: ") + name + " must be in [0,1]");
  };
  prob(intra_group_edge_prob, "intra_group_edge_prob");
  prob(inter_group_edge_prob, "inter_group_edge_prob");
  prob(label_group_correlation, "label_group_correlation");
  if (n_groups < 2) throw Error("synthetic spec: n_groups must be >= 2");
  if (n_privacy_groups < 1) throw Error("synthetic spec: n_privacy_groups must be >= 1");
  if (feature_noise_sd < 0.0) throw Error("synthetic spec: feature_noise_sd must be >= 0");
  const std::size_t needed = static_cast<std::size_t>(n_groups) +
                             (privacy_feature_scale != 0.0 ? static_cast<std::size_t>(n_privacy_groups) : 0);
  if (feature_dim < needed) {
    throw Error("synthetic spec: feature_dim must be >= " + std::to_string(needed));
  }
}

Graph generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng groups_rng = Rng::stream(seed, "synthetic.groups");
  Rng edges_rng = Rng::stream(seed, "synthetic.edges");
  Rng feat_rng = Rng::stream(seed, "synthetic.features");
  const std::size_t n = spec.n_nodes;
  const int k = spec.n_groups;
  Graph g;
  g.n_nodes = n;
  g.fairness.resize(n);
  g.labels.resize(n);
  g.privacy.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    g.fairness[v] = static_cast<int>(groups_rng.below(static_cast<std::uint64_t>(k)));
    if (groups_rng.bernoulli(spec.label_group_correlation)) {
      g.labels[v] = g.fairness[v];
    } else {
      const int other = static_cast<int>(groups_rng.below(static_cast<std::uint64_t>(k - 1)));
      g.labels[v] = other >= g.fairness[v] ? other + 1 : other;
    }
    g.privacy[v] = static_cast<int>(groups_rng.below(static_cast<std::uint64_t>(spec.n_privacy_groups)));
  }
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = g.fairness[u] == g.fairness[v] ? spec.intra_group_edge_prob
                                                       : spec.inter_group_edge_prob;
      if (p > 0.0 && edges_rng.uniform() < p) edges.emplace_back(u, v);
    }
  }
  g.adjacency = symmetric_adjacency(n, edges);
  g.features = Tensor(n, spec.feature_dim);
  for (std::size_t v = 0; v < n; ++v) {
    g.features(v, static_cast<std::size_t>(g.labels[v])) += spec.feature_scale;
    if (spec.privacy_feature_scale != 0.0)
      g.features(v, static_cast<std::size_t>(k + g.privacy[v])) += spec.privacy_feature_scale;
    for (std::size_t c = 0; c < spec.feature_dim; ++c)
      g.features(v, c) += spec.feature_noise_sd * feat_rng.normal();
  }
  for (std::size_t c = 0; c < spec.feature_dim; ++c) g.feature_names.push_back("x" + std::to_string(c));
  g.continuous.assign(spec.feature_dim, true);
  g.n_attributes = spec.feature_dim;
  for (std::size_t v = 0; v < n; ++v) g.node_ids.push_back(std::to_string(v));
  return g;
}

DatasetStats summarize(const Graph& graph) {
  DatasetStats s;
  s.n_nodes = graph.n_nodes;
  s.n_edges = graph.adjacency.nnz() / 2;
  s.n_attributes = graph.n_attributes;
  if (graph.n_nodes > 0) {
    std::size_t labeled = 0;
    for (int y : graph.labels)
      if (y != kUnlabeled) ++labeled;
    s.pct_labeled = 100.0 * static_cast<double>(labeled) / static_cast<double>(graph.n_nodes);
  }
  return s;
}

}  // namespace fairgnn
