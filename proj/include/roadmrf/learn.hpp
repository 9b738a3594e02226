#ifndef ROADMRF_LEARN_HPP
#define ROADMRF_LEARN_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "roadmrf/common.hpp"
#include "roadmrf/gmrf.hpp"
#include "roadmrf/linalg.hpp"

namespace roadmrf {

/// Sample moments of a set of complete snapshots; everything the likelihood
/// needs from the data.
struct SufficientStats {
  std::vector<double> mean;           // <x_i>
  std::vector<double> second_moment;  // <x_i^2>
  std::vector<double> edge_moment;    // <x_i x_j>, aligned with graph.edges()
  long count = 0;                     // K
};

inline SufficientStats compute_stats(std::span<const Snapshot> snapshots, const RoadGraph& g) {
  if (snapshots.empty()) throw ValidationError("need at least one snapshot");
  const int n = g.vertex_count();
  SufficientStats s;
  s.count = static_cast<long>(snapshots.size());
  s.mean.assign(n, 0.0);
  s.second_moment.assign(n, 0.0);
  s.edge_moment.assign(g.edge_count(), 0.0);
  for (const Snapshot& x : snapshots) {
    if (static_cast<int>(x.size()) != n)
      throw ValidationError("snapshot length does not match vertex count");
    for (int i = 0; i < n; ++i) {
      s.mean[i] += x[i];
      s.second_moment[i] += x[i] * x[i];
    }
    for (int e = 0; e < g.edge_count(); ++e)
      s.edge_moment[e] += x[g.edges()[e].first] * x[g.edges()[e].second];
  }
  const double inv = 1.0 / static_cast<double>(s.count);
  for (double& v : s.mean) v *= inv;
  for (double& v : s.second_moment) v *= inv;
  for (double& v : s.edge_moment) v *= inv;
  return s;
}

/// Running sums over snapshots, kept so cross-validation can form each
/// leave-one-out fold's stats in O(N+E) by subtraction.
struct StatsSums {
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::vector<double> edge_sum;
  long count = 0;

  static StatsSums accumulate(std::span<const Snapshot> snapshots, const RoadGraph& g) {
    StatsSums t;
    const int n = g.vertex_count();
    t.sum.assign(n, 0.0);
    t.sum_sq.assign(n, 0.0);
    t.edge_sum.assign(g.edge_count(), 0.0);
    t.count = static_cast<long>(snapshots.size());
    for (const Snapshot& x : snapshots) {
      if (static_cast<int>(x.size()) != n)
        throw ValidationError("snapshot length does not match vertex count");
      for (int i = 0; i < n; ++i) {
        t.sum[i] += x[i];
        t.sum_sq[i] += x[i] * x[i];
      }
      for (int e = 0; e < g.edge_count(); ++e)
        t.edge_sum[e] += x[g.edges()[e].first] * x[g.edges()[e].second];
    }
    return t;
  }

  SufficientStats leave_out(const Snapshot& x, const RoadGraph& g) const {
    if (count < 2) throw ValidationError("leave-one-out requires at least two snapshots");
    SufficientStats s;
    s.count = count - 1;
    const double inv = 1.0 / static_cast<double>(s.count);
    const int n = static_cast<int>(sum.size());
    s.mean.resize(n);
    s.second_moment.resize(n);
    s.edge_moment.resize(edge_sum.size());
    for (int i = 0; i < n; ++i) {
      s.mean[i] = (sum[i] - x[i]) * inv;
      s.second_moment[i] = (sum_sq[i] - x[i] * x[i]) * inv;
    }
    for (int e = 0; e < g.edge_count(); ++e)
      s.edge_moment[e] = (edge_sum[e] - x[g.edges()[e].first] * x[g.edges()[e].second]) * inv;
    return s;
  }
};

struct LearnConfig {
  double lambda = 0.0;
  double step_size = 0.25;
  int max_steps = 2000;
  double grad_tolerance = 1e-6;
  // Profile warm start: maximize over beta in closed form per eta and
  // root-find the one-dimensional profile gradient before the ascent loop.
  // Off -> pure gradient ascent from the closed-form start.
  bool profile_warm_start = true;

  void validate() const {
    if (lambda < 0.0) throw ValidationError("lambda must be >= 0");
    if (!(step_size > 0.0)) throw ValidationError("step_size must be > 0");
    if (max_steps < 1) throw ValidationError("max_steps must be >= 1");
    if (!(grad_tolerance > 0.0)) throw ValidationError("grad_tolerance must be > 0");
  }
};

struct Gradient {
  std::vector<double> beta;
  double eta = 0.0;

  double inf_norm() const {
    double m = std::abs(eta);
    for (double v : beta) m = std::max(m, std::abs(v));
    return m;
  }
};

namespace detail {

// Data-dependent constants of the regularized log-likelihood.
struct LikelihoodTerms {
  int n = 0;
  std::vector<double> mean;
  double weighted_sq = 0.0;  // Σ_i (ε+|∂i|) <x_i²>
  double edge_sum = 0.0;     // Σ_edges <x_i x_j>
  double quad_mean = 0.0;    // <x>ᵀ C <x>
  std::vector<double> c_mean;  // C <x>

  LikelihoodTerms(const SufficientStats& stats, const RoadGraph& g,
                  const PrecisionPattern& pattern) {
    n = g.vertex_count();
    if (static_cast<int>(stats.mean.size()) != n ||
        static_cast<int>(stats.second_moment.size()) != n ||
        static_cast<int>(stats.edge_moment.size()) != g.edge_count())
      throw ValidationError("stats do not match graph");
    mean = stats.mean;
    for (int i = 0; i < n; ++i) weighted_sq += pattern.diag[i] * stats.second_moment[i];
    for (double v : stats.edge_moment) edge_sum += v;
    c_mean = pattern_apply(pattern, mean);
    for (int i = 0; i < n; ++i) quad_mean += mean[i] * c_mean[i];
  }

  // <xᵀCx> under the empirical distribution.
  double data_quad() const { return weighted_sq - 2.0 * edge_sum; }
};

inline double core_objective(const LikelihoodTerms& t, std::span<const double> beta,
                             std::span<const double> c_inv_beta, double eta, double lambda) {
  double lin = 0.0, quad = 0.0, norm_sq = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    lin += beta[i] * t.mean[i];
    quad += beta[i] * c_inv_beta[i];
    norm_sq += beta[i] * beta[i];
  }
  return lin - 0.5 * eta * t.weighted_sq + eta * t.edge_sum + 0.5 * t.n * std::log(eta) -
         quad / (2.0 * eta) - 0.5 * lambda * (eta * eta + norm_sq);
}

inline Gradient core_gradient(const LikelihoodTerms& t, std::span<const double> beta,
                              std::span<const double> c_inv_beta, double eta, double lambda) {
  Gradient grad;
  grad.beta.resize(beta.size());
  double quad = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) {
    grad.beta[i] = t.mean[i] - c_inv_beta[i] / eta - lambda * beta[i];
    quad += beta[i] * c_inv_beta[i];
  }
  grad.eta = -0.5 * t.weighted_sq + t.edge_sum + 0.5 * t.n / eta + quad / (2.0 * eta * eta) -
             lambda * eta;
  return grad;
}

}  // namespace detail

/// Regularized log-likelihood of the data moments at (β, η), dropping the
/// (β, η)-independent constants.
inline double objective(const SufficientStats& stats, const RoadGraph& g,
                        std::span<const double> beta, double eta, double epsilon, double lambda) {
  if (!(eta > 0.0)) throw ValidationError("eta must be > 0");
  if (static_cast<int>(beta.size()) != g.vertex_count())
    throw ValidationError("beta length does not match vertex count");
  const PrecisionPattern pattern = precision_pattern(g, epsilon);
  const detail::LikelihoodTerms terms(stats, g, pattern);
  const SpdFactor factor(pattern);
  return detail::core_objective(terms, beta, factor.solve(beta), eta, lambda);
}

/// Ascent gradient of the objective. C⁻¹β is obtained from one SPD solve;
/// fit() reuses a single factorization of C for every evaluation.
inline Gradient gradient(const SufficientStats& stats, const RoadGraph& g,
                         std::span<const double> beta, double eta, double epsilon,
                         double lambda) {
  if (!(eta > 0.0)) throw ValidationError("eta must be > 0");
  if (static_cast<int>(beta.size()) != g.vertex_count())
    throw ValidationError("beta length does not match vertex count");
  const PrecisionPattern pattern = precision_pattern(g, epsilon);
  const detail::LikelihoodTerms terms(stats, g, pattern);
  const SpdFactor factor(pattern);
  return detail::core_gradient(terms, beta, factor.solve(beta), eta, lambda);
}

struct FitResult {
  Model model;
  int steps = 0;                // accepted gradient-ascent steps
  int profile_evaluations = 0;  // profile-gradient evaluations in the warm start
  double final_objective = 0.0;
  double grad_inf_norm = 0.0;
  std::vector<double> objective_trace;  // initial value plus each accepted step
};

/// Ascent failed to reach the gradient tolerance; carries the best point.
class FitConvergenceError : public Error {
 public:
  FitConvergenceError(std::string msg, FitResult best_so_far)
      : Error(std::move(msg)), best(std::move(best_so_far)) {}
  FitResult best;
};

/// Maximizes the ridge-regularized log-likelihood over (β, η). η is driven
/// in log-space so it stays positive. Starts from the λ=0 closed form
/// (β = ηC<x>, η = N / (<xᵀCx> − <x>ᵀC<x>)), optionally refined by exact
/// block-coordinate passes, then runs backtracking gradient ascent until the
/// joint gradient ∞-norm falls below the tolerance.
inline FitResult fit(const SufficientStats& stats, const RoadGraph& g, double epsilon,
                     const LearnConfig& cfg = {}) {
  cfg.validate();
  if (g.vertex_count() == 0) throw ValidationError("cannot fit a model on an empty graph");
  if (stats.count < 1) throw ValidationError("need at least one snapshot");
  constexpr double kEtaCap = 1e15;

  const int n = g.vertex_count();
  const PrecisionPattern pattern = precision_pattern(g, epsilon);
  const detail::LikelihoodTerms terms(stats, g, pattern);
  const SpdFactor factor(pattern);

  const double data_quad = terms.data_quad();
  const double centered = data_quad - terms.quad_mean;  // trace(C * sample covariance)
  const bool zero_variance = !(centered > 1e-12 * std::max(data_quad, 1.0));
  if (zero_variance && cfg.lambda == 0.0)
    throw DegenerateDataError(
        "snapshots have (numerically) zero variance under the coupling metric; "
        "eta has no finite maximizer at lambda = 0");

  // At lambda > 0 the penalty keeps eta finite even for zero-variance data.
  double eta = zero_variance ? std::sqrt(n / (2.0 * cfg.lambda)) : n / centered;
  if (!(eta > 0.0) || eta > kEtaCap)
    throw DegenerateDataError("initial eta diverged; data variance is degenerate");

  std::vector<double> beta(n);
  auto beta_argmax = [&](double at_eta) {
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = at_eta * terms.c_mean[i];
    if (cfg.lambda == 0.0) return rhs;
    const SpdFactor shifted(pattern, at_eta * cfg.lambda, 1.0);
    return shifted.solve(rhs);
  };
  beta = beta_argmax(eta);

  FitResult res;
  std::vector<double> u = factor.solve(beta);
  double obj = detail::core_objective(terms, beta, u, eta, cfg.lambda);
  res.objective_trace.push_back(obj);
  Gradient grad = detail::core_gradient(terms, beta, u, eta, cfg.lambda);

  if (cfg.profile_warm_start && grad.inf_norm() >= 0.5 * cfg.grad_tolerance) {
    // Profile the likelihood over eta: with beta maximized in closed form at
    // each eta, the joint objective is concave in eta alone and its profile
    // derivative equals the eta-gradient at (beta*(eta), eta). Bisection on
    // that derivative lands on the joint maximizer.
    auto profile_grad = [&](double at_eta) {
      beta = beta_argmax(at_eta);
      u = factor.solve(beta);
      ++res.profile_evaluations;
      return detail::core_gradient(terms, beta, u, at_eta, cfg.lambda).eta;
    };
    double lo = eta, hi = eta;
    double g0 = profile_grad(eta);
    if (g0 > 0.0) {
      while (g0 > 0.0 && hi < kEtaCap) {
        lo = hi;
        hi *= 2.0;
        g0 = profile_grad(hi);
      }
      if (hi >= kEtaCap) throw DegenerateDataError("eta diverged during fitting");
    } else if (g0 < 0.0) {
      while (g0 < 0.0 && lo > 1e-300) {
        hi = lo;
        lo *= 0.5;
        g0 = profile_grad(lo);
      }
    }
    for (int it = 0; it < 90; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (profile_grad(mid) > 0.0 ? lo : hi) = mid;
    }
    eta = 0.5 * (lo + hi);
    beta = beta_argmax(eta);
    u = factor.solve(beta);
    obj = detail::core_objective(terms, beta, u, eta, cfg.lambda);
    grad = detail::core_gradient(terms, beta, u, eta, cfg.lambda);
    res.objective_trace.push_back(obj);
  }

  bool converged = grad.inf_norm() < cfg.grad_tolerance;
  for (int step = 0; !converged && step < cfg.max_steps; ++step) {
    double scale = cfg.step_size;
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      std::vector<double> next_beta(n);
      for (int i = 0; i < n; ++i) next_beta[i] = beta[i] + scale * grad.beta[i];
      const double dt = std::clamp(scale * eta * grad.eta, -2.0, 2.0);
      const double next_eta = eta * std::exp(dt);
      if (next_eta > kEtaCap) throw DegenerateDataError("eta diverged during ascent");
      std::vector<double> next_u = factor.solve(next_beta);
      const double next_obj =
          detail::core_objective(terms, next_beta, next_u, next_eta, cfg.lambda);
      if (next_obj >= obj) {
        beta = std::move(next_beta);
        u = std::move(next_u);
        eta = next_eta;
        obj = next_obj;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // no ascent direction resolvable at double precision
    res.objective_trace.push_back(obj);
    res.steps = step + 1;
    grad = detail::core_gradient(terms, beta, u, eta, cfg.lambda);
    converged = grad.inf_norm() < cfg.grad_tolerance;
  }

  res.model.beta = beta;
  res.model.eta = eta;
  res.model.epsilon = epsilon;
  res.model.lambda_used = cfg.lambda;
  res.model.graph_fingerprint = g.fingerprint();
  res.final_objective = obj;
  res.grad_inf_norm = grad.inf_norm();
  if (!converged) {
    throw FitConvergenceError(
        "gradient ascent did not reach tolerance " + std::to_string(cfg.grad_tolerance) +
            " within " + std::to_string(cfg.max_steps) +
            " steps (gradient inf-norm " + std::to_string(res.grad_inf_norm) + ")",
        std::move(res));
  }
  return res;
}

inline FitResult fit(std::span<const Snapshot> snapshots, const RoadGraph& g, double epsilon,
                     const LearnConfig& cfg = {}) {
  return fit(compute_stats(snapshots, g), g, epsilon, cfg);
}

}  // namespace roadmrf

#endif  // ROADMRF_LEARN_HPP
