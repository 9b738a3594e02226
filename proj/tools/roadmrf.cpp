// Command-line front end for the road-traffic field reconstruction library.
// Subcommands cover the whole pipeline: synthetic network/traffic generation,
// hyperparameter learning, reconstruction, cross-validated evaluation, and
// color-map export. Every subcommand is deterministic given its flags.
//
// Exit codes: 0 success, 1 runtime/convergence failure, 2 usage/validation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roadmrf/roadmrf.hpp"

namespace {

using namespace roadmrf;

std::string meta_path(const std::string& out) { return out + ".meta.json"; }

void cmd_generate_network(const NetworkSpec& spec, const std::string& out) {
  const RoadGraph g = generate_network(spec);
  write_network_json(g, out);
  log_info("wrote network with " + std::to_string(g.vertex_count()) + " vertices, " +
           std::to_string(g.edge_count()) + " edges to " + out);
}

struct SnapshotArgs {
  std::string network;
  std::string mode = "gmrf";
  std::string model_path;
  double eta = 1.0;
  double epsilon = 1e-4;
  double beta_const = 0.0;
  std::vector<std::string> centers;
  double peak = 1.0;
  double decay = 1.0;
  int count = 1;
  bool clamp_negative = false;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

void cmd_generate_snapshots(const SnapshotArgs& a) {
  const RoadGraph g = read_network_json(a.network);
  TrafficSpec spec;
  spec.snapshots = a.count;
  spec.clamp_negative = a.clamp_negative;
  spec.seed = a.seed;
  nlohmann::ordered_json meta;
  meta["mode"] = a.mode;
  if (a.mode == "gmrf") {
    spec.mode = TrafficSpec::Mode::gmrf;
    if (!a.model_path.empty()) {
      const Model m = read_model_json(a.model_path);
      validate_model(m, g);
      spec.beta = m.beta;
      spec.eta = m.eta;
      spec.epsilon = m.epsilon;
      meta["model"] = a.model_path;
    } else {
      spec.beta.assign(g.vertex_count(), a.beta_const);
      spec.eta = a.eta;
      spec.epsilon = a.epsilon;
      meta["beta_const"] = a.beta_const;
    }
    meta["eta"] = spec.eta;
    meta["epsilon"] = spec.epsilon;
  } else if (a.mode == "hotspot") {
    spec.mode = TrafficSpec::Mode::hotspot;
    spec.centers = a.centers;
    spec.peak = a.peak;
    spec.decay = a.decay;
    meta["centers"] = a.centers;
    meta["peak"] = a.peak;
    meta["decay"] = a.decay;
  } else {
    throw ValidationError("unknown mode '" + a.mode + "'");
  }
  const std::vector<Snapshot> snapshots = sample_snapshots(g, spec, a.threads);
  write_snapshots_csv(g, snapshots, a.out);
  meta["snapshots"] = a.count;
  meta["seed"] = a.seed;
  meta["clamp_negative"] = a.clamp_negative;
  meta["network_fingerprint"] = g.fingerprint();
  write_file(meta_path(a.out), meta.dump(2) + "\n");
  log_info("wrote " + std::to_string(a.count) + " snapshots to " + a.out);
}

void cmd_mask(const std::string& network, const std::string& snapshots_path, int row, double p,
              std::uint64_t seed, const std::string& out) {
  const RoadGraph g = read_network_json(network);
  const std::vector<Snapshot> snapshots = read_snapshots_csv(g, snapshots_path);
  if (row < 0 || row >= static_cast<int>(snapshots.size()))
    throw ValidationError("row " + std::to_string(row) + " out of range (file has " +
                          std::to_string(snapshots.size()) + " snapshots)");
  const PartialSnapshot partial = mask_snapshot(snapshots[row], p, seed);
  write_partial_csv(g, partial, out);
  log_info("masked snapshot row " + std::to_string(row) + ": " +
           std::to_string(partial.unobserved().size()) + " of " +
           std::to_string(g.vertex_count()) + " roads unobserved");
}

struct LearnArgs {
  std::string network;
  std::string snapshots;
  double epsilon = 1e-4;
  LearnConfig cfg;
  std::string out;
  std::string report;
  bool verify = false;
};

int cmd_learn(const LearnArgs& a) {
  const RoadGraph g = read_network_json(a.network);
  const std::vector<Snapshot> snapshots = read_snapshots_csv(g, a.snapshots);
  const auto started = std::chrono::steady_clock::now();
  const SufficientStats stats = compute_stats(snapshots, g);
  const FitResult res = fit(stats, g, a.epsilon, a.cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_model_json(res.model, a.out);
  std::printf("final objective %s, gradient inf-norm %s (%d ascent steps, %d profile evaluations)\n",
              fmt_double6(res.final_objective).c_str(), fmt_double6(res.grad_inf_norm).c_str(),
              res.steps, res.profile_evaluations);

  if (!a.report.empty()) {
    nlohmann::ordered_json rep;
    rep["final_objective"] = res.final_objective;
    rep["grad_inf_norm"] = res.grad_inf_norm;
    rep["ascent_steps"] = res.steps;
    rep["profile_evaluations"] = res.profile_evaluations;
    rep["lambda"] = a.cfg.lambda;
    rep["epsilon"] = a.epsilon;
    rep["snapshots"] = snapshots.size();
    rep["wall_seconds"] = seconds;  // diagnostic; not a primary output
    write_file(a.report, rep.dump(2) + "\n");
  }

  if (a.verify) {
    const Gradient check = gradient(stats, g, res.model.beta, res.model.eta, a.epsilon, a.cfg.lambda);
    bool ok = check.inf_norm() < a.cfg.grad_tolerance;
    std::printf("verify: gradient inf-norm %s (tolerance %s) %s\n",
                fmt_double6(check.inf_norm()).c_str(), fmt_double6(a.cfg.grad_tolerance).c_str(),
                ok ? "OK" : "FAILED");
    if (a.cfg.lambda == 0.0) {
      // At lambda = 0 the beta stationarity has the closed form beta = eta*C*<x>.
      const PrecisionPattern pattern = precision_pattern(g, a.epsilon);
      const std::vector<double> target = pattern_apply(pattern, stats.mean);
      double err = 0.0, scale = 0.0;
      for (int i = 0; i < g.vertex_count(); ++i) {
        err = std::max(err, std::abs(res.model.beta[i] - res.model.eta * target[i]));
        scale = std::max(scale, std::abs(res.model.beta[i]));
      }
      const bool closed = err <= 1e-6 * std::max(1.0, scale);
      std::printf("verify: closed-form residual %s %s\n", fmt_double6(err).c_str(),
                  closed ? "OK" : "FAILED");
      ok = ok && closed;
    }
    if (!ok) return 1;
  }
  return 0;
}

struct ReconstructArgs {
  std::string network;
  std::string model;
  std::string partial;
  std::string out;
  SolverConfig solver;
  bool neighbor_average_start = false;
};

int cmd_reconstruct(const ReconstructArgs& a) {
  const RoadGraph g = read_network_json(a.network);
  const Model m = read_model_json(a.model);
  const PartialSnapshot s = read_partial_csv(g, a.partial);

  ReconstructionResult result;
  if (a.neighbor_average_start) {
    PosteriorProblem problem = assemble_posterior(g, m, s);
    const std::vector<double> init = observed_average_start(g, s);
    const MeanFieldSolution sol = mean_field_solve(problem, a.solver, init);
    result.estimates.assign(s.values().begin(), s.values().end());
    result.raw_estimates = result.estimates;
    result.unobserved = problem.vertices;
    result.iterations = sol.iterations;
    result.final_residual = sol.final_residual;
    result.converged = sol.converged;
    for (std::size_t i = 0; i < problem.vertices.size(); ++i) {
      result.estimates[problem.vertices[i]] = sol.clamped[i];
      result.raw_estimates[problem.vertices[i]] = sol.raw[i];
    }
  } else {
    result = reconstruct_snapshot(g, m, s, a.solver);
  }
  write_reconstruction_csv(g, result, s, a.out);
  if (!result.isolated_unobserved.empty())
    log_info(std::to_string(result.isolated_unobserved.size()) +
             " unobserved roads have no neighbors; their estimates are beta/(eta*epsilon)");
  if (!result.converged) {
    std::fprintf(stderr,
                 "solver did not converge within %d iterations (last update change %s)\n",
                 result.iterations, fmt_double6(result.final_residual).c_str());
    return 1;
  }
  log_info("converged after " + std::to_string(result.iterations) + " sweeps");
  return 0;
}

struct EvaluateArgs {
  std::string network;
  std::string snapshots;
  EvalPlan plan;
  std::string out_dir;
};

void cmd_evaluate(const EvaluateArgs& a) {
  const RoadGraph g = read_network_json(a.network);
  const std::vector<Snapshot> data = read_snapshots_csv(g, a.snapshots);
  EvalTiming timing;
  const EvalReport report = loocv(data, g, a.plan, &timing);

  std::filesystem::create_directories(a.out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(a.out_dir) / name).string();
  };
  write_file(path("report.json"), eval_report_json(report).dump(2) + "\n");
  write_file(path("table.txt"), eval_report_table(report));
  write_file(path("curve.csv"), eval_curve_csv(report));
  nlohmann::ordered_json t;  // wall-clock diagnostics; not a primary output
  t["fit_seconds"] = timing.fit_seconds;
  t["trial_seconds"] = timing.trial_seconds;
  t["fits"] = timing.fits;
  write_file(path("timing.json"), t.dump(2) + "\n");
  std::fputs(eval_report_table(report).c_str(), stdout);
}

void cmd_export_colors(const std::string& reconstruction, double bin_width,
                       const std::string& out) {
  const std::vector<ReconstructionRow> rows = read_reconstruction_csv(reconstruction);
  ColorBinning binning{bin_width};
  write_file(out, colors_csv(rows, binning));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Road-traffic density reconstruction with a Gaussian Markov random field"};
  app.require_subcommand(1);

  // generate-network
  NetworkSpec net_spec;
  std::string net_kind = "grid";
  std::string net_out;
  auto* gen_net = app.add_subcommand("generate-network", "Generate a synthetic road network");
  gen_net->add_option("--kind", net_kind, "grid or random-planar")
      ->check(CLI::IsMember({"grid", "random-planar"}));
  gen_net->add_option("--width", net_spec.width, "grid width");
  gen_net->add_option("--height", net_spec.height, "grid height");
  gen_net->add_option("--n", net_spec.n, "random-planar vertex count");
  gen_net->add_option("--density", net_spec.density, "random-planar diagonal density in (0,1]");
  gen_net->add_option("--seed", net_spec.seed, "generator seed");
  gen_net->add_option("--out", net_out, "output network JSON")->required();

  // generate-snapshots
  SnapshotArgs snap;
  auto* gen_snap =
      app.add_subcommand("generate-snapshots", "Sample synthetic historical snapshots");
  gen_snap->add_option("--network", snap.network, "network JSON")->required();
  gen_snap->add_option("--mode", snap.mode, "gmrf or hotspot")
      ->check(CLI::IsMember({"gmrf", "hotspot"}));
  gen_snap->add_option("--model", snap.model_path, "sample from this model JSON (gmrf mode)");
  gen_snap->add_option("--eta", snap.eta, "field coupling (gmrf mode without --model)");
  gen_snap->add_option("--epsilon", snap.epsilon, "diagonal regularizer (gmrf mode)")
      ->check(CLI::PositiveNumber);
  gen_snap->add_option("--beta-const", snap.beta_const,
                       "constant per-vertex level (gmrf mode without --model)");
  gen_snap->add_option("--center", snap.centers, "hotspot center road id (repeatable)");
  gen_snap->add_option("--peak", snap.peak, "hotspot peak level");
  gen_snap->add_option("--decay", snap.decay, "hotspot decay per hop");
  gen_snap->add_option("--k", snap.count, "number of snapshots")->check(CLI::PositiveNumber);
  gen_snap->add_flag("--clamp-negative", snap.clamp_negative,
                     "clamp sampled values at zero (biases moments; flagged in metadata)");
  gen_snap->add_option("--seed", snap.seed, "sampling seed");
  gen_snap->add_option("--threads", snap.threads, "worker cap (0 = machine parallelism)");
  gen_snap->add_option("--out", snap.out, "output snapshot CSV")->required();

  // mask
  std::string mask_network, mask_snapshots, mask_out;
  int mask_row = 0;
  double mask_p = 0.5;
  std::uint64_t mask_seed = 0;
  auto* mask_cmd =
      app.add_subcommand("mask", "Mask one snapshot row into a partial observation CSV");
  mask_cmd->add_option("--network", mask_network, "network JSON")->required();
  mask_cmd->add_option("--snapshots", mask_snapshots, "snapshot CSV")->required();
  mask_cmd->add_option("--row", mask_row, "snapshot row to mask (0-based)");
  mask_cmd->add_option("--p", mask_p, "per-road unobserved probability")->required();
  mask_cmd->add_option("--seed", mask_seed, "masking seed");
  mask_cmd->add_option("--out", mask_out, "output partial CSV")->required();

  // learn
  LearnArgs learn_args;
  auto* learn_cmd = app.add_subcommand("learn", "Fit hyperparameters from complete snapshots");
  learn_cmd->add_option("--network", learn_args.network, "network JSON")->required();
  learn_cmd->add_option("--snapshots", learn_args.snapshots, "snapshot CSV")->required();
  learn_cmd->add_option("--epsilon", learn_args.epsilon, "diagonal regularizer")
      ->check(CLI::PositiveNumber);
  learn_cmd->add_option("--lambda", learn_args.cfg.lambda, "ridge weight")
      ->check(CLI::NonNegativeNumber);
  learn_cmd->add_option("--step-size", learn_args.cfg.step_size, "ascent step size")
      ->check(CLI::PositiveNumber);
  learn_cmd->add_option("--max-steps", learn_args.cfg.max_steps, "ascent step cap")
      ->check(CLI::PositiveNumber);
  learn_cmd->add_option("--grad-tol", learn_args.cfg.grad_tolerance,
                        "gradient inf-norm at convergence")
      ->check(CLI::PositiveNumber);
  learn_cmd->add_flag("!--no-warm-start", learn_args.cfg.profile_warm_start,
                      "disable the profile warm start (pure gradient ascent)");
  learn_cmd->add_option("--out", learn_args.out, "output model JSON")->required();
  learn_cmd->add_option("--report", learn_args.report, "training report JSON (diagnostic)");
  learn_cmd->add_flag("--verify", learn_args.verify,
                      "re-check stationarity after fitting (closed form at lambda=0)");

  // reconstruct
  ReconstructArgs rec;
  std::string rec_scheme = "gauss-seidel";
  int rec_max_iters = 0;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct unobserved roads of a snapshot");
  rec_cmd->add_option("--network", rec.network, "network JSON")->required();
  rec_cmd->add_option("--model", rec.model, "model JSON")->required();
  rec_cmd->add_option("--partial", rec.partial, "partial snapshot CSV")->required();
  rec_cmd->add_option("--out", rec.out, "output reconstruction CSV")->required();
  rec_cmd->add_option("--tol", rec.solver.tolerance, "max update change at convergence")
      ->check(CLI::PositiveNumber);
  rec_cmd->add_option("--max-iters", rec_max_iters, "sweep cap (default 10x problem size)")
      ->check(CLI::PositiveNumber);
  rec_cmd->add_option("--scheme", rec_scheme, "gauss-seidel or jacobi")
      ->check(CLI::IsMember({"gauss-seidel", "jacobi"}));
  rec_cmd->add_flag("--neighbor-average-start", rec.neighbor_average_start,
                    "warm-start from observed-neighbor averages");

  // evaluate
  EvaluateArgs ev;
  int ev_max_iters = 0;
  auto* ev_cmd = app.add_subcommand(
      "evaluate", "Leave-one-out cross-validation with repeated masking trials");
  ev_cmd->add_option("--network", ev.network, "network JSON")->required();
  ev_cmd->add_option("--snapshots", ev.snapshots, "snapshot CSV")->required();
  ev_cmd->add_option("--p", ev.plan.p_values, "masking probability (repeatable)");
  ev_cmd->add_option("--lambda", ev.plan.lambda_values, "ridge weight (repeatable)");
  std::vector<double> ev_sweep;
  ev_cmd->add_option("--lambda-sweep", ev_sweep,
                     "MIN MAX COUNT: log-spaced lambda grid, plus the lambda=0 point")
      ->expected(3);
  ev_cmd->add_option("--trials", ev.plan.trials_per_snapshot, "masking trials per snapshot")
      ->check(CLI::PositiveNumber);
  ev_cmd->add_option("--seed", ev.plan.seed, "trial seed");
  ev_cmd->add_option("--epsilon", ev.plan.epsilon, "diagonal regularizer")
      ->check(CLI::PositiveNumber);
  ev_cmd->add_option("--tol", ev.plan.solver.tolerance, "solver tolerance")
      ->check(CLI::PositiveNumber);
  ev_cmd->add_option("--max-iters", ev_max_iters, "solver sweep cap")->check(CLI::PositiveNumber);
  ev_cmd->add_option("--grad-tol", ev.plan.learn.grad_tolerance, "fit gradient tolerance")
      ->check(CLI::PositiveNumber);
  ev_cmd->add_option("--max-steps", ev.plan.learn.max_steps, "fit step cap")
      ->check(CLI::PositiveNumber);
  ev_cmd->add_option("--threads", ev.plan.threads, "worker cap (default: machine parallelism)");
  ev_cmd->add_option("--out-dir", ev.out_dir, "output directory")->required();

  // export-colors
  std::string col_in, col_out;
  double col_bin_width = 0.05;
  auto* col_cmd = app.add_subcommand("export-colors",
                                     "Bin reconstructed densities into map colors");
  col_cmd->add_option("--reconstruction", col_in, "reconstruction CSV")->required();
  col_cmd->add_option("--bin-width", col_bin_width, "density width of one color band")
      ->check(CLI::PositiveNumber);
  col_cmd->add_option("--out", col_out, "output color CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_net->parsed()) {
      net_spec.kind =
          net_kind == "grid" ? NetworkSpec::Kind::grid : NetworkSpec::Kind::random_planar;
      cmd_generate_network(net_spec, net_out);
      return 0;
    }
    if (gen_snap->parsed()) {
      cmd_generate_snapshots(snap);
      return 0;
    }
    if (mask_cmd->parsed()) {
      cmd_mask(mask_network, mask_snapshots, mask_row, mask_p, mask_seed, mask_out);
      return 0;
    }
    if (learn_cmd->parsed()) return cmd_learn(learn_args);
    if (rec_cmd->parsed()) {
      if (rec_max_iters > 0) rec.solver.max_iterations = rec_max_iters;
      rec.solver.scheme = rec_scheme == "jacobi" ? Scheme::jacobi : Scheme::gauss_seidel;
      return cmd_reconstruct(rec);
    }
    if (ev_cmd->parsed()) {
      if (!ev_sweep.empty()) {
        const double lo = ev_sweep[0], hi = ev_sweep[1];
        const int count = static_cast<int>(ev_sweep[2]);
        if (!(lo > 0.0) || hi < lo || count < 1)
          throw ValidationError("--lambda-sweep needs 0 < MIN <= MAX and COUNT >= 1");
        ev.plan.lambda_values.push_back(0.0);  // the unregularized reference point
        for (int i = 0; i < count; ++i) {
          const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
          ev.plan.lambda_values.push_back(lo * std::pow(hi / lo, t));
        }
        std::sort(ev.plan.lambda_values.begin(), ev.plan.lambda_values.end());
        ev.plan.lambda_values.erase(
            std::unique(ev.plan.lambda_values.begin(), ev.plan.lambda_values.end()),
            ev.plan.lambda_values.end());
      }
      if (ev.plan.p_values.empty()) ev.plan.p_values = {0.5, 0.7, 0.9};
      if (ev.plan.lambda_values.empty()) ev.plan.lambda_values = {0.0};
      if (ev_max_iters > 0) ev.plan.solver.max_iterations = ev_max_iters;
      cmd_evaluate(ev);
      return 0;
    }
    if (col_cmd->parsed()) {
      cmd_export_colors(col_in, col_bin_width, col_out);
      return 0;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const StructuralError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FitConvergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
