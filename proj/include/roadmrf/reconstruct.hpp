#ifndef ROADMRF_RECONSTRUCT_HPP
#define ROADMRF_RECONSTRUCT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "roadmrf/common.hpp"
#include "roadmrf/gmrf.hpp"
#include "roadmrf/linalg.hpp"

namespace roadmrf {

enum class Scheme { jacobi, gauss_seidel };

struct SolverConfig {
  double tolerance = 1e-8;            // max per-coordinate update change
  std::optional<int> max_iterations;  // unset -> 10 * problem size
  Scheme scheme = Scheme::gauss_seidel;

  void validate() const {
    if (!(tolerance > 0.0)) throw ValidationError("solver tolerance must be > 0");
    if (max_iterations && *max_iterations < 1)
      throw ValidationError("solver max_iterations must be >= 1");
  }
};

/// Solution of one posterior problem, indexed like the problem's V_u.
struct MeanFieldSolution {
  std::vector<double> raw;      // x', the unclamped linear-system solution
  std::vector<double> clamped;  // x* = max(x', 0)
  int iterations = 0;
  double final_residual = 0.0;  // last sweep's max update change
  bool converged = true;
  std::vector<int> isolated;    // local positions with no graph neighbors
};

using SweepObserver = std::function<void(int sweep, std::span<const double> x)>;

/// Coordinate fixed-point iteration for the posterior mean: each sweep sets
/// x_i <- (b_i/η + Σ_{unobserved neighbors} x_j) / A_ii. Convergence is
/// guaranteed by strict diagonal dominance of A; Jacobi updates from the
/// previous sweep, Gauss-Seidel in place.
inline MeanFieldSolution mean_field_solve(const PosteriorProblem& p, const SolverConfig& cfg = {},
                                          std::span<const double> initial = {},
                                          const SweepObserver& observer = {}) {
  cfg.validate();
  const int n = p.pattern.dim;
  MeanFieldSolution out;
  if (n == 0) return out;

  // CSR adjacency among unobserved positions.
  std::vector<int> offsets(n + 1, 0);
  for (const auto& [i, j] : p.pattern.offdiag) {
    ++offsets[i + 1];
    ++offsets[j + 1];
  }
  for (int i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  std::vector<int> nbrs(2 * p.pattern.offdiag.size());
  {
    std::vector<int> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& [i, j] : p.pattern.offdiag) {
      nbrs[cursor[i]++] = j;
      nbrs[cursor[j]++] = i;
    }
  }

  std::vector<double> c(n);  // b_i / eta
  for (int i = 0; i < n; ++i) c[i] = p.bias[i] / p.eta;
  for (int i = 0; i < n; ++i)
    if (p.pattern.diag[i] < p.pattern.epsilon + 0.5) out.isolated.push_back(i);

  std::vector<double> x(n, 0.0);
  if (!initial.empty()) {
    if (static_cast<int>(initial.size()) != n)
      throw ValidationError("initial point length mismatch");
    x.assign(initial.begin(), initial.end());
  }

  const int max_iters = cfg.max_iterations ? *cfg.max_iterations : 10 * n;
  std::vector<double> next(cfg.scheme == Scheme::jacobi ? n : 0);
  double change = 0.0;
  int sweep = 0;
  for (; sweep < max_iters; ++sweep) {
    change = 0.0;
    if (cfg.scheme == Scheme::jacobi) {
      for (int i = 0; i < n; ++i) {
        double acc = c[i];
        for (int k = offsets[i]; k < offsets[i + 1]; ++k) acc += x[nbrs[k]];
        next[i] = acc / p.pattern.diag[i];
        change = std::max(change, std::abs(next[i] - x[i]));
      }
      x.swap(next);
    } else {
      for (int i = 0; i < n; ++i) {
        double acc = c[i];
        for (int k = offsets[i]; k < offsets[i + 1]; ++k) acc += x[nbrs[k]];
        acc /= p.pattern.diag[i];
        change = std::max(change, std::abs(acc - x[i]));
        x[i] = acc;
      }
    }
    if (observer) observer(sweep + 1, x);
    if (change < cfg.tolerance) {
      ++sweep;
      break;
    }
  }

  out.iterations = sweep;
  out.final_residual = change;
  out.converged = change < cfg.tolerance;
  out.raw = std::move(x);
  out.clamped.resize(n);
  for (int i = 0; i < n; ++i) out.clamped[i] = std::max(out.raw[i], 0.0);
  return out;
}

/// Exact posterior mean x' = (1/η) A⁻¹ b via a sparse factorization.
/// The oracle counterpart of mean_field_solve.
inline std::vector<double> direct_solve(const PosteriorProblem& p) {
  if (p.empty()) return {};
  SpdFactor factor(p.pattern);
  std::vector<double> x = factor.solve(p.bias);
  for (double& v : x) v /= p.eta;
  return x;
}

/// Optional warm start: each unobserved vertex begins at the average of its
/// observed neighbors (zero if it has none).
inline std::vector<double> observed_average_start(const RoadGraph& g, const PartialSnapshot& s) {
  std::vector<double> init;
  init.reserve(s.unobserved().size());
  for (int v : s.unobserved()) {
    double sum = 0.0;
    int count = 0;
    for (int u : g.neighbors(v)) {
      if (s.is_observed(u)) {
        sum += s.value(u);
        ++count;
      }
    }
    init.push_back(count > 0 ? sum / count : 0.0);
  }
  return init;
}

/// Full-snapshot reconstruction: observed vertices keep y°, unobserved ones
/// get the clamped posterior mean.
struct ReconstructionResult {
  std::vector<double> estimates;       // x* merged with observations
  std::vector<double> raw_estimates;   // unclamped x' merged with observations
  std::vector<int> unobserved;         // graph vertices that were inferred
  int iterations = 0;
  double final_residual = 0.0;
  bool converged = true;
  std::vector<int> isolated_unobserved;  // graph vertices with no neighbors
};

inline ReconstructionResult reconstruct_snapshot(const RoadGraph& g, const Model& m,
                                                 const PartialSnapshot& s,
                                                 const SolverConfig& cfg = {}) {
  PosteriorProblem p = assemble_posterior(g, m, s);
  MeanFieldSolution sol = mean_field_solve(p, cfg);

  ReconstructionResult out;
  out.estimates.assign(s.values().begin(), s.values().end());
  out.raw_estimates = out.estimates;
  out.unobserved = p.vertices;
  out.iterations = sol.iterations;
  out.final_residual = sol.final_residual;
  out.converged = sol.converged;
  for (std::size_t k = 0; k < p.vertices.size(); ++k) {
    out.estimates[p.vertices[k]] = sol.clamped[k];
    out.raw_estimates[p.vertices[k]] = sol.raw[k];
  }
  for (int local : sol.isolated) out.isolated_unobserved.push_back(p.vertices[local]);
  return out;
}

}  // namespace roadmrf

#endif  // ROADMRF_RECONSTRUCT_HPP
