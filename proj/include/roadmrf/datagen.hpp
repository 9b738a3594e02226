#ifndef ROADMRF_DATAGEN_HPP
#define ROADMRF_DATAGEN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "roadmrf/common.hpp"
#include "roadmrf/gmrf.hpp"
#include "roadmrf/graph.hpp"
#include "roadmrf/io.hpp"
#include "roadmrf/linalg.hpp"
#include "roadmrf/rng.hpp"
#include "roadmrf/threads.hpp"

namespace roadmrf {

/// Synthetic network recipe. Everything is a pure function of (spec, seed),
/// so reruns are bit-identical.
struct NetworkSpec {
  enum class Kind { grid, random_planar, file };
  Kind kind = Kind::grid;
  int width = 1, height = 1;   // grid
  int n = 1;                   // random_planar vertex count
  double density = 0.5;        // fraction of grid faces receiving a diagonal
  std::string path;            // file
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string grid_id(int index) { return std::to_string(index); }

inline RoadGraph build_grid(int width, int height) {
  if (width < 1 || height < 1) throw ValidationError("grid dimensions must be >= 1");
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(static_cast<std::size_t>(2) * width * height);
  auto id = [&](int r, int c) { return grid_id(r * width + c); };
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (c + 1 < width) pairs.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < height) pairs.emplace_back(id(r, c), id(r + 1, c));
    }
  }
  std::vector<std::string> declared;
  if (width * height == 1) declared.push_back(grid_id(0));
  return build_graph(pairs, declared);
}

// Planar-by-construction: a grid backbone over the first n vertices of a
// near-square grid, plus one diagonal in round(density * faces) faces chosen
// by a seeded shuffle. Connected for every density in (0, 1].
inline RoadGraph build_random_planar(int n, double density, std::uint64_t seed) {
  if (n < 1) throw ValidationError("random_planar: n must be >= 1");
  if (!(density > 0.0) || density > 1.0)
    throw ValidationError("random_planar: density must be in (0, 1]");
  const int width = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int height = (n + width - 1) / width;
  auto exists = [&](int r, int c) { return r * width + c < n; };
  auto id = [&](int r, int c) { return grid_id(r * width + c); };

  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::pair<int, int>> faces;  // top-left corner of complete unit squares
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (!exists(r, c)) continue;
      if (c + 1 < width && exists(r, c + 1)) pairs.emplace_back(id(r, c), id(r, c + 1));
      if (r + 1 < height && exists(r + 1, c)) pairs.emplace_back(id(r, c), id(r + 1, c));
      if (c + 1 < width && r + 1 < height && exists(r + 1, c + 1))
        faces.emplace_back(r, c);
    }
  }

  const int extra = static_cast<int>(std::llround(density * static_cast<double>(faces.size())));
  Rng rng(mix_seed({seed, 0x706c616e61726ULL}));
  // Partial Fisher-Yates: the first `extra` entries become the chosen faces.
  for (int k = 0; k < extra; ++k) {
    const int pick = rng.uniform_int(k, static_cast<int>(faces.size()) - 1);
    std::swap(faces[k], faces[pick]);
    const auto [r, c] = faces[k];
    if (rng.bernoulli(0.5))
      pairs.emplace_back(id(r, c), id(r + 1, c + 1));
    else
      pairs.emplace_back(id(r, c + 1), id(r + 1, c));
  }
  std::vector<std::string> declared;
  if (n == 1) declared.push_back(grid_id(0));
  return build_graph(pairs, declared);
}

}  // namespace detail

inline RoadGraph generate_network(const NetworkSpec& spec) {
  switch (spec.kind) {
    case NetworkSpec::Kind::grid:
      return detail::build_grid(spec.width, spec.height);
    case NetworkSpec::Kind::random_planar:
      return detail::build_random_planar(spec.n, spec.density, spec.seed);
    case NetworkSpec::Kind::file:
      return read_network_json(spec.path);
  }
  throw ValidationError("unknown network kind");
}

/// Synthetic traffic recipe: either exact draws from a field model or a
/// smooth multi-center hotspot surface with per-snapshot amplitude jitter.
struct TrafficSpec {
  enum class Mode { gmrf, hotspot };
  Mode mode = Mode::gmrf;

  // gmrf mode: precision eta*C(epsilon), mean (1/eta)C⁻¹beta.
  std::vector<double> beta;
  double eta = 1.0;
  double epsilon = 1e-4;

  // hotspot mode
  std::vector<std::string> centers;
  double peak = 1.0;
  double decay = 1.0;

  int snapshots = 1;
  bool clamp_negative = false;  // clamping biases the moments; keep off for
                                // learning oracles, on for realistic data
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<int> bfs_hops(const RoadGraph& g, int source) {
  std::vector<int> dist(g.vertex_count(), -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int u : g.neighbors(v)) {
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

}  // namespace detail

/// Draws the requested snapshots. Each snapshot's stream is derived from
/// (seed, index), so results are identical no matter how many workers run.
inline std::vector<Snapshot> sample_snapshots(const RoadGraph& g, const TrafficSpec& spec,
                                              int threads = 1) {
  if (spec.snapshots < 1) throw ValidationError("snapshot count must be >= 1");
  const int n = g.vertex_count();
  std::vector<Snapshot> out(spec.snapshots);

  if (spec.mode == TrafficSpec::Mode::gmrf) {
    if (!(spec.eta > 0.0) || !(spec.epsilon > 0.0))
      throw ValidationError("gmrf sampling requires eta > 0 and epsilon > 0");
    if (static_cast<int>(spec.beta.size()) != n)
      throw ValidationError("gmrf sampling: beta length does not match vertex count");
    const PrecisionPattern pattern = precision_pattern(g, spec.epsilon);
    const SpdFactor factor(pattern);
    std::vector<double> mean = factor.solve(spec.beta);
    for (double& v : mean) v /= spec.eta;
    const double scale = 1.0 / std::sqrt(spec.eta);
    parallel_for(spec.snapshots, threads, [&](int k) {
      Rng rng(mix_seed({spec.seed, 0x676d7266ULL, static_cast<std::uint64_t>(k)}));
      std::vector<double> w(n);
      for (double& v : w) v = rng.normal();
      Snapshot x = factor.gaussian_pullback(w);
      for (int i = 0; i < n; ++i) {
        x[i] = mean[i] + scale * x[i];
        if (spec.clamp_negative) x[i] = std::max(x[i], 0.0);
      }
      out[k] = std::move(x);
    });
    return out;
  }

  // hotspot mode
  if (spec.centers.empty()) throw ValidationError("hotspot mode needs at least one center");
  if (!(spec.peak > 0.0)) throw ValidationError("hotspot peak must be > 0");
  if (!(spec.decay > 0.0)) throw ValidationError("hotspot decay must be > 0");
  std::vector<std::vector<int>> hops;
  for (const auto& c : spec.centers) hops.push_back(detail::bfs_hops(g, g.require_index(c)));
  parallel_for(spec.snapshots, threads, [&](int k) {
    Rng rng(mix_seed({spec.seed, 0x686f74ULL, static_cast<std::uint64_t>(k)}));
    std::vector<double> amplitude(spec.centers.size());
    for (double& a : amplitude) a = spec.peak * (0.75 + 0.5 * rng.uniform());
    Snapshot x(n, 0.0);
    for (std::size_t c = 0; c < hops.size(); ++c) {
      for (int i = 0; i < n; ++i) {
        if (hops[c][i] < 0) continue;  // unreachable from this center
        x[i] += amplitude[c] * std::exp(-spec.decay * hops[c][i]);
      }
    }
    out[k] = std::move(x);
  });
  return out;
}

/// Hides each vertex independently with probability p. Deterministic in
/// (snapshot, p, seed).
inline PartialSnapshot mask_snapshot(const Snapshot& s, double p, std::uint64_t seed) {
  if (!(p >= 0.0) || p > 1.0) throw ValidationError("masking probability must be in [0, 1]");
  Rng rng(mix_seed({seed, 0x6d61736bULL}));
  std::vector<std::uint8_t> mask(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) mask[i] = rng.bernoulli(p) ? 0 : 1;
  return PartialSnapshot(s, std::move(mask));
}

}  // namespace roadmrf

#endif  // ROADMRF_DATAGEN_HPP
