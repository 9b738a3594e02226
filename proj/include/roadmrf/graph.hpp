#ifndef ROADMRF_GRAPH_HPP
#define ROADMRF_GRAPH_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "roadmrf/common.hpp"

namespace roadmrf {

/// Orders road identifiers: all-digit tokens compare by numeric value,
/// everything else lexicographically. Total and strict ("01" != "1").
struct NaturalIdLess {
  static bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
      if (c < '0' || c > '9') return false;
    return true;
  }

  bool operator()(std::string_view a, std::string_view b) const {
    const bool da = all_digits(a), db = all_digits(b);
    if (da && db) {
      std::string_view sa = a.substr(std::min(a.find_first_not_of('0'), a.size()));
      std::string_view sb = b.substr(std::min(b.find_first_not_of('0'), b.size()));
      if (sa.size() != sb.size()) return sa.size() < sb.size();
      if (sa != sb) return sa < sb;
      return a < b;
    }
    if (da != db) return da;
    return a < b;
  }
};

/// Undirected simple graph over road segments. Immutable once built; all
/// structural queries are cheap and safe to share across threads.
class RoadGraph {
 public:
  RoadGraph() = default;

  int vertex_count() const { return static_cast<int>(labels_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  /// Canonical edge list: pairs (i, j) with i < j, sorted ascending.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

  std::span<const int> neighbors(int v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }

  int degree(int v) const { return offsets_[v + 1] - offsets_[v]; }

  const std::string& label(int v) const { return labels_[v]; }
  const std::vector<std::string>& labels() const { return labels_; }

  std::optional<int> index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int require_index(std::string_view id) const {
    auto idx = index_of(id);
    if (!idx) throw StructuralError("unknown road id '" + std::string(id) + "'");
    return *idx;
  }

  /// Hash of sorted vertex ids plus sorted canonical edges; embedded in
  /// model files to tie a model to the network it was trained on.
  const std::string& fingerprint() const { return fingerprint_; }

  friend RoadGraph build_graph(std::span<const std::pair<std::string, std::string>> pairs,
                               std::span<const std::string> declared_vertices);

 private:
  std::vector<std::string> labels_;
  std::map<std::string, int, NaturalIdLess> index_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<int> offsets_;
  std::vector<int> adjacency_;
  std::string fingerprint_;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= 0xff;  // separator so concatenated tokens cannot collide
  h *= 0x100000001b3ULL;
  return h;
}

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = digits[v & 0xf];
  return out;
}

}  // namespace detail

/// Builds the undirected graph from (id, id) pairs. Orientation and repeats
/// collapse to one edge; indices are assigned by ascending id. Vertices with
/// no incident edge exist only if listed in `declared_vertices`.
inline RoadGraph build_graph(std::span<const std::pair<std::string, std::string>> pairs,
                             std::span<const std::string> declared_vertices = {}) {
  RoadGraph g;
  for (const auto& [a, b] : pairs) {
    if (a == b)
      throw StructuralError("self-pair (" + a + ", " + a + ") is not a valid road connection");
    g.index_.emplace(a, 0);
    g.index_.emplace(b, 0);
  }
  for (const auto& v : declared_vertices) g.index_.emplace(v, 0);

  g.labels_.reserve(g.index_.size());
  for (auto& [id, idx] : g.index_) {
    idx = static_cast<int>(g.labels_.size());
    g.labels_.push_back(id);
  }

  g.edges_.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    int i = g.index_.find(a)->second;
    int j = g.index_.find(b)->second;
    if (i > j) std::swap(i, j);
    g.edges_.emplace_back(i, j);
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());

  const int n = g.vertex_count();
  g.offsets_.assign(n + 1, 0);
  for (const auto& [i, j] : g.edges_) {
    ++g.offsets_[i + 1];
    ++g.offsets_[j + 1];
  }
  for (int v = 0; v < n; ++v) g.offsets_[v + 1] += g.offsets_[v];
  g.adjacency_.resize(2 * g.edges_.size());
  std::vector<int> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
  for (const auto& [i, j] : g.edges_) {
    g.adjacency_[cursor[i]++] = j;
    g.adjacency_[cursor[j]++] = i;
  }
  for (int v = 0; v < n; ++v)
    std::sort(g.adjacency_.begin() + g.offsets_[v], g.adjacency_.begin() + g.offsets_[v + 1]);

  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = detail::fnv1a(h, "vertices");
  for (const auto& id : g.labels_) h = detail::fnv1a(h, id);
  h = detail::fnv1a(h, "edges");
  for (const auto& [i, j] : g.edges_) {
    h = detail::fnv1a(h, g.labels_[i]);
    h = detail::fnv1a(h, g.labels_[j]);
  }
  g.fingerprint_ = detail::to_hex(h);
  return g;
}

/// Sparse symmetric pattern of the precision matrix: per-row diagonal values
/// and the edge set carrying the -1 off-diagonal entries. Never densified.
struct PrecisionPattern {
  int dim = 0;
  double epsilon = 0.0;
  std::vector<double> diag;                    // epsilon + full-graph degree
  std::vector<std::pair<int, int>> offdiag;    // local indices, i < j, value -1
};

/// Full-graph precision pattern: diag(i) = epsilon + |neighbors(i)|, one -1
/// entry per edge side. Strictly diagonally dominant, hence SPD.
inline PrecisionPattern precision_pattern(const RoadGraph& g, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  PrecisionPattern p;
  p.dim = g.vertex_count();
  p.epsilon = epsilon;
  p.diag.resize(p.dim);
  for (int v = 0; v < p.dim; ++v) p.diag[v] = epsilon + g.degree(v);
  p.offdiag = g.edges();
  return p;
}

/// Pattern of the posterior matrix over an unobserved set: diagonals keep the
/// FULL-graph degree, off-diagonals exist only for edges internal to the set.
/// `unobserved` must be sorted ascending; local index k maps to unobserved[k].
inline PrecisionPattern subgraph_pattern(const RoadGraph& g, std::span<const int> unobserved,
                                         double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  const int n = g.vertex_count();
  std::vector<int> local(n, -1);
  for (std::size_t k = 0; k < unobserved.size(); ++k) {
    const int v = unobserved[k];
    if (v < 0 || v >= n) throw StructuralError("unobserved set contains unknown vertex index");
    if (k > 0 && unobserved[k - 1] >= v)
      throw StructuralError("unobserved set must be sorted and duplicate-free");
    local[v] = static_cast<int>(k);
  }
  PrecisionPattern p;
  p.dim = static_cast<int>(unobserved.size());
  p.epsilon = epsilon;
  p.diag.resize(p.dim);
  for (int k = 0; k < p.dim; ++k) p.diag[k] = epsilon + g.degree(unobserved[k]);
  for (const auto& [i, j] : g.edges()) {
    if (local[i] >= 0 && local[j] >= 0) p.offdiag.emplace_back(local[i], local[j]);
  }
  return p;
}

/// y = M x for the pattern's matrix M.
inline std::vector<double> pattern_apply(const PrecisionPattern& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.dim) throw ValidationError("pattern_apply: size mismatch");
  std::vector<double> y(p.dim);
  for (int i = 0; i < p.dim; ++i) y[i] = p.diag[i] * x[i];
  for (const auto& [i, j] : p.offdiag) {
    y[i] -= x[j];
    y[j] -= x[i];
  }
  return y;
}

/// xᵀ M x for the pattern's matrix M.
inline double pattern_quad(const PrecisionPattern& p, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.dim) throw ValidationError("pattern_quad: size mismatch");
  double q = 0.0;
  for (int i = 0; i < p.dim; ++i) q += p.diag[i] * x[i] * x[i];
  for (const auto& [i, j] : p.offdiag) q -= 2.0 * x[i] * x[j];
  return q;
}

}  // namespace roadmrf

#endif  // ROADMRF_GRAPH_HPP
