#ifndef ROADMRF_GMRF_HPP
#define ROADMRF_GMRF_HPP

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roadmrf/common.hpp"
#include "roadmrf/graph.hpp"

namespace roadmrf {

/// One complete density snapshot, indexed like the graph.
using Snapshot = std::vector<double>;

/// Hyperparameters of the field prior plus training provenance.
struct Model {
  std::vector<double> beta;       // per-vertex level parameter
  double eta = 1.0;               // coupling strength, > 0
  double epsilon = 1e-4;          // diagonal regularizer, > 0
  double lambda_used = 0.0;       // ridge weight recorded from training
  std::string graph_fingerprint;  // ties the model to its network
};

inline void validate_model(const Model& m, const RoadGraph& g) {
  if (!(m.eta > 0.0)) throw ValidationError("model: eta must be > 0");
  if (!(m.epsilon > 0.0)) throw ValidationError("model: epsilon must be > 0");
  if (m.lambda_used < 0.0) throw ValidationError("model: lambda must be >= 0");
  if (static_cast<int>(m.beta.size()) != g.vertex_count())
    throw ValidationError("model: beta length does not match vertex count");
  if (m.graph_fingerprint != g.fingerprint())
    throw ValidationError("model was trained on a different network (fingerprint mismatch)");
}

/// Partially observed snapshot: observed values on V_o, the rest unobserved.
class PartialSnapshot {
 public:
  /// `values` holds y° at observed positions (ignored elsewhere).
  PartialSnapshot(std::vector<double> values, std::vector<std::uint8_t> observed)
      : values_(std::move(values)), observed_(std::move(observed)) {
    if (values_.size() != observed_.size())
      throw ValidationError("partial snapshot: value/mask length mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!observed_[i]) {
        values_[i] = 0.0;
        unobserved_.push_back(static_cast<int>(i));
      } else if (!std::isfinite(values_[i]) || values_[i] < 0.0) {
        throw ValidationError("observed density must be finite and >= 0");
      }
    }
  }

  static PartialSnapshot fully_observed(std::vector<double> values) {
    std::vector<std::uint8_t> mask(values.size(), 1);
    return PartialSnapshot(std::move(values), std::move(mask));
  }

  int size() const { return static_cast<int>(values_.size()); }
  bool is_observed(int v) const { return observed_[v] != 0; }
  double value(int v) const { return values_[v]; }
  std::span<const double> values() const { return values_; }

  /// Sorted indices of V_u.
  const std::vector<int>& unobserved() const { return unobserved_; }
  int observed_count() const { return size() - static_cast<int>(unobserved_.size()); }

 private:
  std::vector<double> values_;
  std::vector<std::uint8_t> observed_;
  std::vector<int> unobserved_;
};

/// The posterior over V_u in natural form: exponent bᵀx − (η/2)·xᵀAx.
struct PosteriorProblem {
  PrecisionPattern pattern;    // the matrix A over V_u
  std::vector<double> bias;    // the vector b
  double eta = 1.0;
  std::vector<int> vertices;   // local position -> graph vertex (sorted)

  bool empty() const { return pattern.dim == 0; }
};

/// Conditions the field on the observed values: A keeps the full-graph
/// degrees on the diagonal and couples only unobserved pairs; the bias folds
/// each unobserved vertex's observed neighbors in as b_i = β_i + η·Σ y°_j.
inline PosteriorProblem assemble_posterior(const RoadGraph& g, const Model& m,
                                           const PartialSnapshot& s) {
  validate_model(m, g);
  if (s.size() != g.vertex_count())
    throw ValidationError("partial snapshot length does not match vertex count");

  PosteriorProblem p;
  p.eta = m.eta;
  p.vertices = s.unobserved();
  p.pattern = subgraph_pattern(g, p.vertices, m.epsilon);
  p.bias.resize(p.vertices.size());
  for (std::size_t k = 0; k < p.vertices.size(); ++k) {
    const int v = p.vertices[k];
    double observed_sum = 0.0;
    for (int u : g.neighbors(v))
      if (s.is_observed(u)) observed_sum += s.value(u);
    p.bias[k] = m.beta[v] + m.eta * observed_sum;
  }
  return p;
}

/// Exponent of the prior density (up to the x-independent log-normalizer):
/// Σ β_i x_i − (ηε/2) Σ x_i² − (η/2) Σ_edges (x_i − x_j)².
inline double prior_log_density_unnormalized(const RoadGraph& g, const Model& m,
                                             std::span<const double> x) {
  if (static_cast<int>(x.size()) != g.vertex_count())
    throw ValidationError("prior density: vector length mismatch");
  double linear = 0.0, squares = 0.0, coupling = 0.0;
  for (int i = 0; i < g.vertex_count(); ++i) {
    linear += m.beta[i] * x[i];
    squares += x[i] * x[i];
  }
  for (const auto& [i, j] : g.edges()) {
    const double d = x[i] - x[j];
    coupling += d * d;
  }
  return linear - 0.5 * m.eta * m.epsilon * squares - 0.5 * m.eta * coupling;
}

/// Exponent of the posterior over V_u (up to a constant): bᵀx − (η/2)·xᵀAx.
/// Maximized exactly at x = (1/η) A⁻¹ b.
inline double posterior_log_density_unnormalized(const PosteriorProblem& p,
                                                 std::span<const double> x_u) {
  if (static_cast<int>(x_u.size()) != p.pattern.dim)
    throw ValidationError("posterior density: vector length mismatch");
  double linear = 0.0;
  for (int i = 0; i < p.pattern.dim; ++i) linear += p.bias[i] * x_u[i];
  return linear - 0.5 * p.eta * pattern_quad(p.pattern, x_u);
}

}  // namespace roadmrf

#endif  // ROADMRF_GMRF_HPP
