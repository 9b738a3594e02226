#ifndef ROADMRF_EVAL_HPP
#define ROADMRF_EVAL_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "roadmrf/common.hpp"
#include "roadmrf/datagen.hpp"
#include "roadmrf/gmrf.hpp"
#include "roadmrf/io.hpp"
#include "roadmrf/learn.hpp"
#include "roadmrf/reconstruct.hpp"
#include "roadmrf/threads.hpp"

namespace roadmrf {

/// Mean absolute error over the unobserved roads, normalized by their count.
inline double mae(const Snapshot& truth, std::span<const double> estimates,
                  std::span<const int> unobserved) {
  if (truth.size() != estimates.size()) throw ValidationError("mae: length mismatch");
  if (unobserved.empty())
    throw ValidationError("mae is undefined when no road is unobserved (N_l = 0)");
  double total = 0.0;
  for (int v : unobserved) total += std::abs(estimates[v] - truth[v]);
  return total / static_cast<double>(unobserved.size());
}

inline double mae(const Snapshot& truth, const ReconstructionResult& r) {
  return mae(truth, r.estimates, r.unobserved);
}

/// Predicts each unobserved road by its training mean (clamped at zero).
/// The calibration baseline the field model has to beat.
inline ReconstructionResult baseline_constant_mean(std::span<const Snapshot> train,
                                                   const PartialSnapshot& s) {
  if (train.empty()) throw ValidationError("baseline needs a nonempty training set");
  const int n = s.size();
  std::vector<double> mean(n, 0.0);
  for (const Snapshot& x : train) {
    if (static_cast<int>(x.size()) != n) throw ValidationError("baseline: length mismatch");
    for (int i = 0; i < n; ++i) mean[i] += x[i];
  }
  for (double& v : mean) v /= static_cast<double>(train.size());

  ReconstructionResult out;
  out.estimates.assign(s.values().begin(), s.values().end());
  out.raw_estimates = out.estimates;
  out.unobserved = s.unobserved();
  for (int v : out.unobserved) {
    out.raw_estimates[v] = mean[v];
    out.estimates[v] = std::max(mean[v], 0.0);
  }
  return out;
}

struct EvalPlan {
  std::vector<double> p_values;
  std::vector<double> lambda_values;
  int trials_per_snapshot = 500;
  std::uint64_t seed = 0;
  double epsilon = 1e-4;
  SolverConfig solver;
  LearnConfig learn;  // per-cell lambda comes from lambda_values
  int threads = 0;    // 0 -> machine parallelism; never affects results

  void validate() const {
    if (p_values.empty() || lambda_values.empty())
      throw ValidationError("evaluation plan needs at least one p and one lambda");
    for (double p : p_values)
      if (!(p >= 0.0) || p > 1.0) throw ValidationError("p values must lie in [0, 1]");
    for (double l : lambda_values)
      if (l < 0.0) throw ValidationError("lambda values must be >= 0");
    if (trials_per_snapshot < 1) throw ValidationError("trials_per_snapshot must be >= 1");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
    solver.validate();
    learn.validate();
  }
};

/// One (lambda, p) cell of the cross-validation grid.
struct EvalCell {
  double lambda = 0.0;
  double p = 0.0;
  double mae = 0.0;                      // mean of per_snapshot_mae
  std::vector<double> per_snapshot_mae;  // [MAE]_m, one per held-out snapshot
  double trial_mae_stddev = 0.0;
  long converged_trials = 0;
  long total_trials = 0;
  long redraws = 0;

  bool fully_converged() const { return converged_trials == total_trials; }
};

struct EvalReport {
  std::string graph_fingerprint;
  std::string data_fingerprint;  // hash of the snapshot matrix
  int snapshot_count = 0;
  EvalPlan plan;
  std::vector<EvalCell> cells;  // lambda-major, then p

  const EvalCell& cell(double lambda, double p) const {
    for (const auto& c : cells)
      if (c.lambda == lambda && c.p == p) return c;
    throw ValidationError("no such evaluation cell");
  }
};

/// Wall-clock diagnostics; intentionally kept out of EvalReport so the
/// report is bit-identical for a fixed plan.
struct EvalTiming {
  double fit_seconds = 0.0;
  double trial_seconds = 0.0;
  long fits = 0;
};

namespace detail {

inline std::string data_fingerprint(std::span<const Snapshot> snapshots) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Snapshot& s : snapshots)
    for (double v : s) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  return to_hex(h);
}

}  // namespace detail

/// Leave-one-out cross-validation: for every held-out snapshot, fit on the
/// rest (one model per lambda, cached across p values), then run repeated
/// masking trials and aggregate the per-snapshot MAEs. Deterministic for a
/// fixed plan, independent of thread count.
inline EvalReport loocv(std::span<const Snapshot> snapshots, const RoadGraph& g,
                        const EvalPlan& plan, EvalTiming* timing = nullptr) {
  plan.validate();
  const int k = static_cast<int>(snapshots.size());
  if (k < 2) throw ValidationError("leave-one-out cross-validation needs K >= 2 snapshots");
  const int n_lambda = static_cast<int>(plan.lambda_values.size());
  const int n_p = static_cast<int>(plan.p_values.size());
  const int n_cells = n_lambda * n_p;
  const int trials = plan.trials_per_snapshot;
  using clock = std::chrono::steady_clock;

  const StatsSums totals = StatsSums::accumulate(snapshots, g);

  // Fit one model per (lambda, fold); each fold forms its stats once.
  const auto fit_start = clock::now();
  std::vector<Model> models(static_cast<std::size_t>(n_lambda) * k);
  parallel_for(k, plan.threads, [&](int m) {
    const SufficientStats stats = totals.leave_out(snapshots[m], g);
    for (int la = 0; la < n_lambda; ++la) {
      LearnConfig cfg = plan.learn;
      cfg.lambda = plan.lambda_values[la];
      models[static_cast<std::size_t>(la) * k + m] = fit(stats, g, plan.epsilon, cfg).model;
    }
  });
  const auto fit_end = clock::now();

  // Per-(cell, fold) accumulators; each fold writes only its own column.
  std::vector<double> sum_mae(static_cast<std::size_t>(n_cells) * k, 0.0);
  std::vector<double> sum_mae_sq(static_cast<std::size_t>(n_cells) * k, 0.0);
  std::vector<long> converged(static_cast<std::size_t>(n_cells) * k, 0);
  std::vector<long> redraws(static_cast<std::size_t>(n_p) * k, 0);

  parallel_for(k, plan.threads, [&](int m) {
    const Snapshot& truth = snapshots[m];
    for (int l = 0; l < trials; ++l) {
      const std::uint64_t trial_seed =
          mix_seed({plan.seed, 0x747269616cULL, static_cast<std::uint64_t>(m),
                    static_cast<std::uint64_t>(l)});
      for (int pi = 0; pi < n_p; ++pi) {
        const double p = plan.p_values[pi];
        // Attempt 0 reuses trial_seed across p, so masks nest as p grows
        // (paired trials). Redraws only happen when no road was masked.
        std::uint64_t attempt_seed = trial_seed;
        PartialSnapshot partial = mask_snapshot(truth, p, attempt_seed);
        for (long attempt = 1; partial.unobserved().empty(); ++attempt) {
          if (attempt > 10000)
            throw ValidationError("p is too small to ever produce an unobserved road");
          attempt_seed = mix_seed({trial_seed, 0x726472ULL, static_cast<std::uint64_t>(attempt)});
          partial = mask_snapshot(truth, p, attempt_seed);
          ++redraws[static_cast<std::size_t>(pi) * k + m];
        }
        for (int la = 0; la < n_lambda; ++la) {
          const Model& model = models[static_cast<std::size_t>(la) * k + m];
          const ReconstructionResult r = reconstruct_snapshot(g, model, partial, plan.solver);
          const double err = mae(truth, r);
          const std::size_t cell = static_cast<std::size_t>(la) * n_p + pi;
          sum_mae[cell * k + m] += err;
          sum_mae_sq[cell * k + m] += err * err;
          if (r.converged) ++converged[cell * k + m];
        }
      }
    }
  });
  const auto trial_end = clock::now();

  EvalReport report;
  report.graph_fingerprint = g.fingerprint();
  report.data_fingerprint = detail::data_fingerprint(snapshots);
  report.snapshot_count = k;
  report.plan = plan;
  report.cells.reserve(n_cells);
  for (int la = 0; la < n_lambda; ++la) {
    for (int pi = 0; pi < n_p; ++pi) {
      const std::size_t cell = static_cast<std::size_t>(la) * n_p + pi;
      EvalCell c;
      c.lambda = plan.lambda_values[la];
      c.p = plan.p_values[pi];
      c.total_trials = static_cast<long>(k) * trials;
      double total = 0.0, total_sq = 0.0;
      for (int m = 0; m < k; ++m) {
        c.per_snapshot_mae.push_back(sum_mae[cell * k + m] / trials);
        total += sum_mae[cell * k + m];
        total_sq += sum_mae_sq[cell * k + m];
        c.converged_trials += converged[cell * k + m];
        c.redraws += redraws[static_cast<std::size_t>(pi) * k + m];
      }
      double acc = 0.0;
      for (double v : c.per_snapshot_mae) acc += v;
      c.mae = acc / static_cast<double>(k);
      const double mean_trial = total / static_cast<double>(c.total_trials);
      const double var = total_sq / static_cast<double>(c.total_trials) - mean_trial * mean_trial;
      c.trial_mae_stddev = std::sqrt(std::max(var, 0.0));
      report.cells.push_back(std::move(c));
    }
  }

  if (timing != nullptr) {
    timing->fit_seconds = std::chrono::duration<double>(fit_end - fit_start).count();
    timing->trial_seconds = std::chrono::duration<double>(trial_end - fit_end).count();
    timing->fits = static_cast<long>(n_lambda) * k;
  }
  return report;
}

// --- report rendering ---------------------------------------------------------

inline nlohmann::ordered_json eval_report_json(const EvalReport& r) {
  nlohmann::ordered_json doc;
  doc["graph_fingerprint"] = r.graph_fingerprint;
  doc["data_fingerprint"] = r.data_fingerprint;
  doc["snapshots"] = r.snapshot_count;
  doc["trials_per_snapshot"] = r.plan.trials_per_snapshot;
  doc["seed"] = r.plan.seed;
  doc["solver"] = {{"tolerance", r.plan.solver.tolerance},
                   {"scheme", r.plan.solver.scheme == Scheme::jacobi ? "jacobi" : "gauss_seidel"}};
  if (r.plan.solver.max_iterations)
    doc["solver"]["max_iterations"] = *r.plan.solver.max_iterations;
  doc["learn"] = {{"step_size", r.plan.learn.step_size},
                  {"max_steps", r.plan.learn.max_steps},
                  {"grad_tolerance", r.plan.learn.grad_tolerance},
                  {"profile_warm_start", r.plan.learn.profile_warm_start},
                  {"epsilon", r.plan.epsilon}};
  auto& cells = doc["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : r.cells) {
    nlohmann::ordered_json jc;
    jc["lambda"] = c.lambda;
    jc["p"] = c.p;
    jc["mae"] = c.mae;
    jc["per_snapshot_mae"] = c.per_snapshot_mae;
    jc["trial_mae_stddev"] = c.trial_mae_stddev;
    jc["converged_trials"] = c.converged_trials;
    jc["total_trials"] = c.total_trials;
    jc["fully_converged"] = c.fully_converged();
    jc["redraws"] = c.redraws;
    cells.push_back(std::move(jc));
  }
  return doc;
}

/// One row per (lambda, p) cell; convergence flagged when below 100%.
inline std::string eval_report_table(const EvalReport& r) {
  std::string out = "lambda        p        MAE            conv      trials\n";
  for (const auto& c : r.cells) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s  %-6s  %-13s  %6.2f%%%s  %ld\n",
                  fmt_double(c.lambda).c_str(), fmt_double(c.p).c_str(),
                  fmt_double6(c.mae).c_str(),
                  100.0 * static_cast<double>(c.converged_trials) /
                      static_cast<double>(c.total_trials),
                  c.fully_converged() ? " " : "!", c.total_trials);
    out += line;
  }
  return out;
}

/// The lambda-sweep series for plotting: one "lambda,p,mae" row per cell.
inline std::string eval_curve_csv(const EvalReport& r) {
  std::string out = "lambda,p,mae\n";
  for (const auto& c : r.cells)
    out += fmt_double(c.lambda) + ',' + fmt_double(c.p) + ',' + fmt_double(c.mae) + '\n';
  return out;
}

}  // namespace roadmrf

#endif  // ROADMRF_EVAL_HPP
