#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "again/diffnet/tensor.hpp"
#include "again/errors.hpp"
#include "again/random.hpp"

namespace again {

inline constexpr int kUnlabeled = -1;

/// Undirected attributed graph with partial labels. Immutable once built;
/// every transformation returns a new graph.
template <class T>
class BasicGraph {
 public:
  BasicGraph() = default;

  /// Validates and takes ownership. Neighbor lists are sorted and must be
  /// symmetric and duplicate-free.
  BasicGraph(std::vector<std::string> ids, std::vector<std::vector<Index>> adjacency, Matrix<T> features,
             std::vector<int> labels, int class_count)
      : ids_(std::move(ids)),
        adjacency_(std::move(adjacency)),
        features_(std::move(features)),
        labels_(std::move(labels)),
        class_count_(class_count) {
    validate();
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i)
      if (!index_.emplace(ids_[i], static_cast<Index>(i)).second) throw validation_error("duplicate node id '" + ids_[i] + "'");
  }

  Index node_count() const { return static_cast<Index>(adjacency_.size()); }
  Index feature_dim() const { return features_.cols(); }
  int class_count() const { return class_count_; }

  /// Undirected edges, each counted once.
  Index edge_count() const {
    Index twice = 0;
    for (const auto& n : adjacency_) twice += static_cast<Index>(n.size());
    return twice / 2;
  }

  std::span<const Index> neighbors(Index v) const { return adjacency_[static_cast<std::size_t>(v)]; }
  Index degree(Index v) const { return static_cast<Index>(adjacency_[static_cast<std::size_t>(v)].size()); }
  const std::vector<std::vector<Index>>& adjacency() const { return adjacency_; }

  const Matrix<T>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(Index v) const { return labels_[static_cast<std::size_t>(v)]; }
  bool has_label(Index v) const { return label(v) != kUnlabeled; }

  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(Index v) const { return ids_[static_cast<std::size_t>(v)]; }
  std::optional<Index> index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool has_edge(Index u, Index v) const {
    const auto& n = adjacency_[static_cast<std::size_t>(u)];
    return std::binary_search(n.begin(), n.end(), v);
  }

  /// Same structure and labels, new features.
  BasicGraph with_features(Matrix<T> features) const {
    if (features.rows() != features_.rows() || features.cols() != features_.cols())
      throw dimension_error("replacement features " + shape_str(features) + " do not match " + shape_str(features_));
    BasicGraph g = *this;
    g.features_ = std::move(features);
    return g;
  }

  template <class U>
  BasicGraph<U> cast() const {
    return BasicGraph<U>(ids_, adjacency_, features_.template cast<U>(), labels_, class_count_);
  }

 private:
  void validate() const {
    const auto n = static_cast<Index>(adjacency_.size());
    if (n <= 0) throw validation_error("graph has no nodes");
    if (static_cast<Index>(ids_.size()) != n) throw validation_error("id table size does not match node count");
    if (features_.rows() != n) throw dimension_error("feature rows " + std::to_string(features_.rows()) + " != nodes " + std::to_string(n));
    if (features_.cols() <= 0) throw dimension_error("feature dimension must be positive");
    if (static_cast<Index>(labels_.size()) != n) throw validation_error("label table size does not match node count");
    if (class_count_ <= 0) throw validation_error("class count must be positive");
    for (Index v = 0; v < n; ++v) {
      const auto& nb = adjacency_[static_cast<std::size_t>(v)];
      for (std::size_t i = 0; i < nb.size(); ++i) {
        const Index u = nb[i];
        if (u < 0 || u >= n) throw range_error("neighbor index " + std::to_string(u) + " out of range");
        if (i > 0 && nb[i - 1] >= u) throw validation_error("neighbor list of node " + std::to_string(v) + " not sorted/unique");
        const auto& back = adjacency_[static_cast<std::size_t>(u)];
        if (!std::binary_search(back.begin(), back.end(), v))
          throw validation_error("asymmetric edge " + std::to_string(v) + "->" + std::to_string(u));
      }
      const int y = labels_[static_cast<std::size_t>(v)];
      if (y != kUnlabeled && (y < 0 || y >= class_count_))
        throw range_error("label " + std::to_string(y) + " of node " + ids_[static_cast<std::size_t>(v)] + " outside [0," +
                          std::to_string(class_count_) + ")");
    }
  }

  std::vector<std::string> ids_;
  std::vector<std::vector<Index>> adjacency_;
  Matrix<T> features_;
  std::vector<int> labels_;
  int class_count_ = 0;
  std::unordered_map<std::string, Index> index_;
};

using AttributedGraph = BasicGraph<float>;

/// Builds a graph from index pairs; symmetrizes, deduplicates and drops self-loops.
template <class T>
BasicGraph<T> graph_from_edges(Index n, const std::vector<std::pair<Index, Index>>& edges, Matrix<T> features,
                               std::vector<int> labels, int class_count, std::vector<std::string> ids = {}) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) throw range_error("edge endpoint out of range");
    if (u == v) continue;
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  if (ids.empty()) {
    ids.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  }
  if (labels.empty()) labels.assign(static_cast<std::size_t>(n), kUnlabeled);
  return BasicGraph<T>(std::move(ids), std::move(adj), std::move(features), std::move(labels), class_count);
}

template <class T>
double average_degree(const BasicGraph<T>& g) {
  return 2.0 * static_cast<double>(g.edge_count()) / static_cast<double>(g.node_count());
}

// ---------------------------------------------------------------------------
// Text format

namespace io_detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return in;
}

template <class T>
T parse_number(std::string_view tok, const std::string& file, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw parse_error(file, line, "bad number '" + std::string(tok) + "'");
  return value;
}

template <class T>
std::string format_number(T v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace io_detail

/// Reads the three-file text format. Node order follows the features file.
/// `class_count` defaults to one past the largest label present.
inline AttributedGraph load_graph(const std::string& edges_path, const std::string& features_path,
                                  const std::string& labels_path, std::optional<int> class_count = std::nullopt) {
  using namespace io_detail;
  std::vector<std::string> ids;
  std::unordered_map<std::string, Index> index;
  std::vector<std::vector<float>> rows;
  {
    auto in = open_in(features_path);
    std::string line;
    std::size_t lineno = 0;
    Index dim = -1;
    while (std::getline(in, line)) {
      ++lineno;
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() < 2) throw parse_error(features_path, lineno, "expected '<id> <f_1> ... <f_D>'");
      const auto d = static_cast<Index>(tok.size() - 1);
      if (dim < 0) dim = d;
      if (d != dim)
        throw dimension_error(features_path + ":" + std::to_string(lineno) + ": node has " + std::to_string(d) +
                              " features, expected " + std::to_string(dim));
      std::string id(tok[0]);
      if (!index.emplace(id, static_cast<Index>(ids.size())).second)
        throw parse_error(features_path, lineno, "duplicate node id '" + id + "'");
      ids.push_back(std::move(id));
      std::vector<float> row(static_cast<std::size_t>(d));
      for (Index j = 0; j < d; ++j) row[static_cast<std::size_t>(j)] = parse_number<float>(tok[static_cast<std::size_t>(j + 1)], features_path, lineno);
      rows.push_back(std::move(row));
    }
    if (ids.empty()) throw parse_error(features_path, lineno, "no nodes");
  }
  const auto n = static_cast<Index>(ids.size());
  const auto dim = static_cast<Index>(rows.front().size());
  Matrix<float> x(n, dim);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  rows.clear();

  auto lookup = [&](std::string_view id, const std::string& file, std::size_t line) {
    auto it = index.find(std::string(id));
    if (it == index.end()) throw parse_error(file, line, "unknown node id '" + std::string(id) + "'");
    return it->second;
  };

  std::vector<std::pair<Index, Index>> edges;
  {
    auto in = open_in(edges_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != 2) throw parse_error(edges_path, lineno, "expected '<id_u> <id_v>'");
      edges.emplace_back(lookup(tok[0], edges_path, lineno), lookup(tok[1], edges_path, lineno));
    }
  }

  std::vector<int> labels(static_cast<std::size_t>(n), kUnlabeled);
  int max_label = -1;
  {
    auto in = open_in(labels_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != 2) throw parse_error(labels_path, lineno, "expected '<id> <class_index>'");
      const Index v = lookup(tok[0], labels_path, lineno);
      const int y = parse_number<int>(tok[1], labels_path, lineno);
      if (y < 0) throw range_error(labels_path + ":" + std::to_string(lineno) + ": negative class index");
      if (class_count && y >= *class_count)
        throw range_error(labels_path + ":" + std::to_string(lineno) + ": class index " + std::to_string(y) +
                          " >= class count " + std::to_string(*class_count));
      labels[static_cast<std::size_t>(v)] = y;
      max_label = std::max(max_label, y);
    }
  }
  const int c = class_count.value_or(std::max(max_label + 1, 1));
  return graph_from_edges<float>(n, edges, std::move(x), std::move(labels), c, std::move(ids));
}

/// Writes the same text format load_graph reads; each undirected edge once.
inline void save_graph(const AttributedGraph& g, const std::string& edges_path, const std::string& features_path,
                       const std::string& labels_path) {
  using io_detail::format_number;
  auto open_out = [](const std::string& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw io_error("cannot write " + p);
    return out;
  };
  {
    auto out = open_out(edges_path);
    for (Index v = 0; v < g.node_count(); ++v)
      for (Index u : g.neighbors(v))
        if (v < u) out << g.id(v) << ' ' << g.id(u) << '\n';
  }
  {
    auto out = open_out(features_path);
    for (Index v = 0; v < g.node_count(); ++v) {
      out << g.id(v);
      for (Index j = 0; j < g.feature_dim(); ++j) out << ' ' << format_number(g.features()(v, j));
      out << '\n';
    }
  }
  {
    auto out = open_out(labels_path);
    for (Index v = 0; v < g.node_count(); ++v)
      if (g.has_label(v)) out << g.id(v) << ' ' << g.label(v) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splits

struct NodeSplit {
  std::vector<Index> labeled;
  std::vector<Index> observed_unlabeled;
  std::vector<Index> unseen_test;

  /// V_L ∪ V_U^o, sorted.
  std::vector<Index> observed() const {
    std::vector<Index> out = labeled;
    out.insert(out.end(), observed_unlabeled.begin(), observed_unlabeled.end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

template <class T>
void validate_split(const NodeSplit& s, const BasicGraph<T>& g) {
  std::vector<char> role(static_cast<std::size_t>(g.node_count()), 0);
  auto mark = [&](const std::vector<Index>& nodes, const char* name) {
    for (Index v : nodes) {
      if (v < 0 || v >= g.node_count()) throw range_error(std::string(name) + " node index " + std::to_string(v) + " out of range");
      auto& r = role[static_cast<std::size_t>(v)];
      if (r != 0) throw validation_error("node '" + g.id(v) + "' assigned to more than one role");
      r = 1;
    }
  };
  mark(s.labeled, "labeled");
  mark(s.observed_unlabeled, "observed");
  mark(s.unseen_test, "test");
  for (Index v : s.labeled)
    if (!g.has_label(v)) throw validation_error("labeled node '" + g.id(v) + "' has no label");
  if (s.unseen_test.empty()) throw validation_error("split has no test nodes");
}

/// n labeled nodes per class, then `test_count` labeled nodes uniformly from
/// the rest; everything else is observed-unlabeled.
template <class T>
NodeSplit make_split(const BasicGraph<T>& g, int labeled_per_class, Index test_count, std::uint64_t seed) {
  if (labeled_per_class <= 0 || test_count <= 0) throw config_error("labeled_per_class and test_count must be positive");
  const int c = g.class_count();
  if (static_cast<Index>(labeled_per_class) * c + test_count > g.node_count())
    throw capacity_error("n*C + test_count exceeds node count");
  auto rng = make_rng(seed, Stream::split);
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(c));
  for (Index v = 0; v < g.node_count(); ++v)
    if (g.has_label(v)) by_class[static_cast<std::size_t>(g.label(v))].push_back(v);

  std::vector<char> taken(static_cast<std::size_t>(g.node_count()), 0);
  NodeSplit s;
  for (int k = 0; k < c; ++k) {
    auto& pool = by_class[static_cast<std::size_t>(k)];
    if (static_cast<int>(pool.size()) < labeled_per_class)
      throw capacity_error("class " + std::to_string(k) + " has " + std::to_string(pool.size()) + " labeled nodes, need " +
                           std::to_string(labeled_per_class));
    std::shuffle(pool.begin(), pool.end(), rng);
    for (int i = 0; i < labeled_per_class; ++i) {
      s.labeled.push_back(pool[static_cast<std::size_t>(i)]);
      taken[static_cast<std::size_t>(pool[static_cast<std::size_t>(i)])] = 1;
    }
  }
  std::vector<Index> rest;
  for (Index v = 0; v < g.node_count(); ++v)
    if (!taken[static_cast<std::size_t>(v)] && g.has_label(v)) rest.push_back(v);
  if (static_cast<Index>(rest.size()) < test_count) throw capacity_error("not enough labeled nodes left for the test set");
  std::shuffle(rest.begin(), rest.end(), rng);
  for (Index i = 0; i < test_count; ++i) {
    s.unseen_test.push_back(rest[static_cast<std::size_t>(i)]);
    taken[static_cast<std::size_t>(rest[static_cast<std::size_t>(i)])] = 1;
  }
  for (Index v = 0; v < g.node_count(); ++v)
    if (!taken[static_cast<std::size_t>(v)]) s.observed_unlabeled.push_back(v);
  std::sort(s.labeled.begin(), s.labeled.end());
  std::sort(s.unseen_test.begin(), s.unseen_test.end());
  return s;
}

/// Reads `#labeled` / `#observed` / `#test` sections of node ids.
template <class T>
NodeSplit load_fixed_split(const std::string& path, const BasicGraph<T>& g) {
  auto in = io_detail::open_in(path);
  NodeSplit s;
  std::vector<Index>* section = nullptr;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto tok = io_detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "#labeled") section = &s.labeled;
    else if (tok[0] == "#observed") section = &s.observed_unlabeled;
    else if (tok[0] == "#test") section = &s.unseen_test;
    else {
      if (tok.size() != 1) throw parse_error(path, lineno, "expected one node id per line");
      if (section == nullptr) throw parse_error(path, lineno, "node id before any section header");
      auto v = g.index_of(std::string(tok[0]));
      if (!v) throw range_error(path + ":" + std::to_string(lineno) + ": unknown node id '" + std::string(tok[0]) + "'");
      section->push_back(*v);
    }
  }
  validate_split(s, g);
  return s;
}

template <class T>
void save_split(const NodeSplit& s, const BasicGraph<T>& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  auto section = [&](const char* name, const std::vector<Index>& nodes) {
    out << name << '\n';
    for (Index v : nodes) out << g.id(v) << '\n';
  };
  section("#labeled", s.labeled);
  section("#observed", s.observed_unlabeled);
  section("#test", s.unseen_test);
}

// ---------------------------------------------------------------------------
// Feature noise

struct NoiseSpec {
  double noise_ratio = 0.0;    // λ
  double node_fraction = 0.0;  // η
  std::uint64_t seed = 0;

  void validate() const {
    if (!(noise_ratio >= 0.0)) throw config_error("noise ratio must be >= 0");
    if (!(node_fraction >= 0.0 && node_fraction <= 1.0)) throw config_error("node fraction must be in [0,1]");
  }
};

/// Mean over nodes of each row's maximum feature value.
template <class T>
double reference_amplitude(const BasicGraph<T>& g) {
  const auto& x = g.features();
  double sum = 0.0;
  for (Index v = 0; v < x.rows(); ++v) sum += static_cast<double>(x.row(v).maxCoeff());
  return sum / static_cast<double>(x.rows());
}

/// Adds λ·r·ε (ε ~ N(0,1), per dimension) to ⌊η·|eligible|⌋ nodes chosen
/// without replacement. Selection and draws depend only on the seed, so a
/// λ sweep under one seed corrupts the same nodes with the same ε.
template <class T>
BasicGraph<T> inject_feature_noise(const BasicGraph<T>& g, const NoiseSpec& spec, double amplitude,
                                   std::span<const Index> eligible) {
  spec.validate();
  const auto count = static_cast<std::size_t>(std::floor(spec.node_fraction * static_cast<double>(eligible.size())));
  if (count == 0 || spec.noise_ratio == 0.0) return g;
  auto rng = make_rng(spec.seed, Stream::noise);
  std::vector<Index> pool(eligible.begin(), eligible.end());
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<T> x = g.features();
  const double scale = spec.noise_ratio * amplitude;
  for (std::size_t i = 0; i < count; ++i)
    for (Index j = 0; j < x.cols(); ++j) x(pool[i], j) += static_cast<T>(scale * normal(rng));
  return g.with_features(std::move(x));
}

template <class T>
BasicGraph<T> inject_feature_noise(const BasicGraph<T>& g, const NoiseSpec& spec, double amplitude) {
  std::vector<Index> all(static_cast<std::size_t>(g.node_count()));
  std::iota(all.begin(), all.end(), Index{0});
  return inject_feature_noise(g, spec, amplitude, all);
}

/// Computes r on `g` itself; pass a precomputed amplitude when sweeping.
template <class T>
BasicGraph<T> inject_feature_noise(const BasicGraph<T>& g, const NoiseSpec& spec) {
  return inject_feature_noise(g, spec, reference_amplitude(g));
}

}  // namespace again
