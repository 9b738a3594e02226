#include <catch2/catch.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "roadmrf/datagen.hpp"
#include "roadmrf/learn.hpp"
#include "roadmrf/rng.hpp"
#include "test_support.hpp"

using namespace roadmrf;

namespace {

SufficientStats random_stats(const RoadGraph& g, int k, Rng& rng) {
  std::vector<Snapshot> snapshots(k, Snapshot(g.vertex_count()));
  for (auto& s : snapshots)
    for (double& v : s) v = rng.uniform(-1.0, 2.0);
  return compute_stats(snapshots, g);
}

}  // namespace

TEST_CASE("sufficient statistics are exact sample averages") {
  testsupport::Pairs one_edge = {{"1", "2"}};
  const RoadGraph g = build_graph(one_edge);

  SECTION("single snapshot") {
    const std::vector<Snapshot> data = {{1.0, 2.0}};
    const SufficientStats s = compute_stats(data, g);
    CHECK(s.mean == std::vector<double>{1.0, 2.0});
    CHECK(s.second_moment == std::vector<double>{1.0, 4.0});
    CHECK(s.edge_moment == std::vector<double>{2.0});
    CHECK(s.count == 1);
  }

  SECTION("two snapshots") {
    const std::vector<Snapshot> data = {{0.0, 0.0}, {2.0, 2.0}};
    const SufficientStats s = compute_stats(data, g);
    CHECK(s.mean == std::vector<double>{1.0, 1.0});
    CHECK(s.second_moment == std::vector<double>{2.0, 2.0});
    CHECK(s.edge_moment == std::vector<double>{2.0});
  }

  SECTION("order invariance") {
    const std::vector<Snapshot> ab = {{0.5, 1.5}, {2.5, 0.25}, {1.0, 1.0}};
    std::vector<Snapshot> ba = {ab[2], ab[0], ab[1]};
    const SufficientStats sa = compute_stats(ab, g);
    const SufficientStats sb = compute_stats(ba, g);
    CHECK(sa.mean[0] == Approx(sb.mean[0]).epsilon(1e-15));
    CHECK(sa.second_moment[1] == Approx(sb.second_moment[1]).epsilon(1e-15));
    CHECK(sa.edge_moment[0] == Approx(sb.edge_moment[0]).epsilon(1e-15));
  }

  SECTION("second moment dominates squared mean") {
    Rng rng(3);
    const SufficientStats s = random_stats(g, 7, rng);
    for (int i = 0; i < 2; ++i) CHECK(s.second_moment[i] >= s.mean[i] * s.mean[i] - 1e-12);
  }

  SECTION("errors") {
    CHECK_THROWS_AS(compute_stats(std::vector<Snapshot>{}, g), ValidationError);
    const std::vector<Snapshot> bad = {{1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(compute_stats(bad, g), ValidationError);
  }
}

TEST_CASE("leave-one-out sums match recomputed fold statistics") {
  Rng rng(9);
  const RoadGraph g = testsupport::random_connected_graph(12, 10, rng);
  std::vector<Snapshot> data(6, Snapshot(12));
  for (auto& s : data)
    for (double& v : s) v = rng.uniform(0.0, 2.0);
  const StatsSums sums = StatsSums::accumulate(data, g);
  for (std::size_t hold = 0; hold < data.size(); ++hold) {
    std::vector<Snapshot> rest;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (i != hold) rest.push_back(data[i]);
    const SufficientStats direct = compute_stats(rest, g);
    const SufficientStats fast = sums.leave_out(data[hold], g);
    for (int v = 0; v < 12; ++v) {
      CHECK(fast.mean[v] == Approx(direct.mean[v]).margin(1e-12));
      CHECK(fast.second_moment[v] == Approx(direct.second_moment[v]).margin(1e-12));
    }
    for (int e = 0; e < g.edge_count(); ++e)
      CHECK(fast.edge_moment[e] == Approx(direct.edge_moment[e]).margin(1e-12));
  }
}

TEST_CASE("objective closed forms") {
  SECTION("single vertex curve") {
    const RoadGraph g = build_graph({}, std::vector<std::string>{"a"});
    const std::vector<Snapshot> data = {{2.0}};
    const SufficientStats s = compute_stats(data, g);
    // with epsilon=1: 2β − 2η + 0.5·ln η − β²/(2η)
    for (double beta : {-1.0, 0.0, 0.7, 2.0}) {
      for (double eta : {0.25, 1.0, 3.0}) {
        const double expected =
            2.0 * beta - 2.0 * eta + 0.5 * std::log(eta) - beta * beta / (2.0 * eta);
        CHECK(objective(s, g, std::vector<double>{beta}, eta, 1.0, 0.0) ==
              Approx(expected).margin(1e-12));
      }
    }
    // stationary in beta along beta = 2*eta
    for (double eta : {0.5, 1.0, 2.0}) {
      const Gradient grad = gradient(s, g, std::vector<double>{2.0 * eta}, eta, 1.0, 0.0);
      CHECK(grad.beta[0] == Approx(0.0).margin(1e-12));
    }
  }

  SECTION("beta terms vanish at beta = 0") {
    Rng rng(21);
    const RoadGraph g = testsupport::random_connected_graph(9, 8, rng);
    const SufficientStats s = random_stats(g, 5, rng);
    const double eps = 0.2, eta = 1.7;
    double weighted = 0.0, edges = 0.0;
    for (int i = 0; i < 9; ++i) weighted += (eps + g.degree(i)) * s.second_moment[i];
    for (double v : s.edge_moment) edges += v;
    const double expected =
        -0.5 * eta * weighted + eta * edges + 0.5 * 9 * std::log(eta) - 0.5 * 3.0 * eta * eta;
    CHECK(objective(s, g, std::vector<double>(9, 0.0), eta, eps, 3.0) ==
          Approx(expected).margin(1e-10));
  }

  SECTION("penalty monotonicity in lambda") {
    Rng rng(22);
    const RoadGraph g = testsupport::random_connected_graph(8, 6, rng);
    const SufficientStats s = random_stats(g, 4, rng);
    std::vector<double> beta(8);
    for (double& b : beta) b = rng.uniform(-1.0, 1.0);
    const double at0 = objective(s, g, beta, 1.3, 0.1, 0.0);
    const double at1 = objective(s, g, beta, 1.3, 0.1, 1.0);
    const double at10 = objective(s, g, beta, 1.3, 0.1, 10.0);
    CHECK(at0 > at1);
    CHECK(at1 > at10);
  }

  SECTION("eta must be positive") {
    const RoadGraph g = build_graph({}, std::vector<std::string>{"a"});
    const SufficientStats s = compute_stats(std::vector<Snapshot>{{1.0}}, g);
    CHECK_THROWS_AS(objective(s, g, std::vector<double>{0.0}, 0.0, 1.0, 0.0), ValidationError);
    CHECK_THROWS_AS(gradient(s, g, std::vector<double>{0.0}, -2.0, 1.0, 0.0), ValidationError);
  }
}

TEST_CASE("gradient at beta = 0 is the sample mean") {
  Rng rng(33);
  const RoadGraph g = testsupport::random_connected_graph(11, 9, rng);
  const SufficientStats s = random_stats(g, 6, rng);
  const Gradient grad = gradient(s, g, std::vector<double>(11, 0.0), 0.9, 1e-4, 0.7);
  for (int i = 0; i < 11; ++i) CHECK(grad.beta[i] == Approx(s.mean[i]).margin(1e-12));
}

TEST_CASE("gradient matches central finite differences of the objective") {
  Rng rng(44);
  int points = 0;
  while (points < 40) {
    const int n = rng.uniform_int(2, 30);
    const RoadGraph g = testsupport::random_connected_graph(n, rng.uniform_int(0, 2 * n), rng);
    const SufficientStats s = random_stats(g, 5, rng);
    const double eps = std::vector<double>{1e-4, 0.01, 1.0}[rng.uniform_int(0, 2)];
    const double lambda = std::vector<double>{0.0, 0.5, 2.0}[rng.uniform_int(0, 2)];
    std::vector<double> beta(n);
    for (double& b : beta) b = rng.uniform(-1.0, 1.0);
    const double eta = std::exp(rng.uniform(-1.0, 1.0));

    const Gradient grad = gradient(s, g, beta, eta, eps, lambda);
    auto fd = [&](auto&& set, auto&& get) {
      const double h = 1e-6 * (1.0 + std::abs(get()));
      const double saved = get();
      set(saved + h);
      const double up = objective(s, g, beta, eta, eps, lambda);
      set(saved - h);
      const double down = objective(s, g, beta, eta, eps, lambda);
      set(saved);
      return (up - down) / (2.0 * h);
    };

    // every coordinate of a few random points, plus eta
    for (int rep = 0; rep < 3; ++rep) {
      const int i = rng.uniform_int(0, n - 1);
      const double fd_beta = fd([&](double v) { beta[i] = v; }, [&] { return beta[i]; });
      CHECK(std::abs(fd_beta - grad.beta[i]) <= 1e-5 * std::max(1.0, std::abs(grad.beta[i])));
    }
    double eta_mut = eta;
    const double fd_eta = [&] {
      const double h = 1e-6 * (1.0 + eta_mut);
      const double up = objective(s, g, beta, eta_mut + h, eps, lambda);
      const double down = objective(s, g, beta, eta_mut - h, eps, lambda);
      return (up - down) / (2.0 * h);
    }();
    CHECK(std::abs(fd_eta - grad.eta) <= 1e-5 * std::max(1.0, std::abs(grad.eta)));
    ++points;
  }
}

TEST_CASE("factorization route equals the dense inverse route") {
  Rng rng(55);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = rng.uniform_int(2, 30);
    const RoadGraph g = testsupport::random_connected_graph(n, rng.uniform_int(0, n), rng);
    const SufficientStats s = random_stats(g, 4, rng);
    const double eps = rng.uniform(1e-3, 1.0);
    const double eta = rng.uniform(0.3, 3.0);
    const double lambda = rng.uniform(0.0, 2.0);
    std::vector<double> beta(n);
    for (double& b : beta) b = rng.uniform(-1.0, 1.0);

    const Gradient grad = gradient(s, g, beta, eta, eps, lambda);

    const Eigen::MatrixXd cinv = testsupport::dense_precision(g, eps).inverse();
    const Eigen::Map<const Eigen::VectorXd> bv(beta.data(), n);
    const Eigen::VectorXd u = cinv * bv;
    for (int i = 0; i < n; ++i) {
      const double expected = s.mean[i] - u(i) / eta - lambda * beta[i];
      CHECK(grad.beta[i] == Approx(expected).margin(1e-10));
    }
    double weighted = 0.0, edges = 0.0;
    for (int i = 0; i < n; ++i) weighted += (eps + g.degree(i)) * s.second_moment[i];
    for (double v : s.edge_moment) edges += v;
    const double expected_eta =
        -0.5 * weighted + edges + 0.5 * n / eta + bv.dot(u) / (2.0 * eta * eta) - lambda * eta;
    CHECK(grad.eta == Approx(expected_eta).margin(1e-10));
  }
}

TEST_CASE("fit at lambda = 0 lands on the closed-form stationary point") {
  Rng rng(66);
  const RoadGraph g = testsupport::random_connected_graph(40, 50, rng);
  std::vector<Snapshot> data(30, Snapshot(40));
  for (auto& s : data)
    for (double& v : s) v = rng.uniform(0.0, 1.0);

  LearnConfig cfg;
  cfg.grad_tolerance = 1e-8;
  const FitResult res = fit(data, g, 1e-4, cfg);
  CHECK(res.grad_inf_norm < 1e-8);

  const SufficientStats stats = compute_stats(data, g);
  const PrecisionPattern pattern = precision_pattern(g, 1e-4);
  const std::vector<double> target = pattern_apply(pattern, stats.mean);
  for (int i = 0; i < 40; ++i)
    CHECK(res.model.beta[i] == Approx(res.model.eta * target[i]).margin(1e-8));
  CHECK(res.model.lambda_used == 0.0);
  CHECK(res.model.graph_fingerprint == g.fingerprint());
}

TEST_CASE("independently re-derived stationarity conditions hold at the fitted point") {
  // Recompute both gradient expressions from raw moments and a dense inverse;
  // they must vanish (to tolerance scaled by 1+lambda) at the fit's output.
  Rng rng(77);
  const RoadGraph g = testsupport::random_connected_graph(20, 25, rng);
  std::vector<Snapshot> data(15, Snapshot(20));
  for (auto& s : data)
    for (double& v : s) v = rng.uniform(0.0, 1.5);
  const SufficientStats stats = compute_stats(data, g);

  for (double lambda : {0.0, 1.0, 10.0}) {
    LearnConfig cfg;
    cfg.lambda = lambda;
    cfg.grad_tolerance = 1e-9;
    const FitResult res = fit(stats, g, 1e-3, cfg);
    const int n = 20;
    const double eta = res.model.eta;

    const Eigen::MatrixXd cinv = testsupport::dense_precision(g, 1e-3).inverse();
    const Eigen::Map<const Eigen::VectorXd> beta(res.model.beta.data(), n);
    const Eigen::VectorXd u = cinv * beta;
    double weighted = 0.0, edges = 0.0;
    for (int i = 0; i < n; ++i) weighted += (1e-3 + g.degree(i)) * stats.second_moment[i];
    for (double v : stats.edge_moment) edges += v;

    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(-stats.mean[i] + u(i) / eta + lambda * beta(i)));
    const double eta_expr = 0.5 * weighted - edges - beta.dot(u) / (2.0 * eta * eta) -
                            0.5 * n / eta + lambda * eta;
    worst = std::max(worst, std::abs(eta_expr));
    CHECK(worst < 1e-9 * (1.0 + lambda) * 10.0);
  }
}

TEST_CASE("pure gradient ascent agrees with the warm-started fit") {
  Rng rng(88);
  const RoadGraph g = testsupport::random_connected_graph(10, 8, rng);
  std::vector<Snapshot> data(12, Snapshot(10));
  for (auto& s : data)
    for (double& v : s) v = rng.uniform(0.0, 1.0);

  LearnConfig warm;
  warm.lambda = 0.7;
  warm.grad_tolerance = 1e-8;
  const FitResult a = fit(data, g, 0.5, warm);

  LearnConfig ascent = warm;
  ascent.profile_warm_start = false;
  ascent.max_steps = 200000;
  const FitResult b = fit(data, g, 0.5, ascent);

  CHECK(a.model.eta == Approx(b.model.eta).epsilon(1e-5));
  for (int i = 0; i < 10; ++i)
    CHECK(a.model.beta[i] == Approx(b.model.beta[i]).margin(1e-5));

  // the ascent trace never decreases
  REQUIRE(b.steps > 0);
  for (std::size_t i = 1; i < b.objective_trace.size(); ++i)
    CHECK(b.objective_trace[i] >= b.objective_trace[i - 1]);
}

TEST_CASE("fit reports degenerate data") {
  const RoadGraph g = build_graph({}, std::vector<std::string>{"a"});
  const std::vector<Snapshot> constant(4, Snapshot{2.0});
  CHECK_THROWS_AS(fit(constant, g, 1.0, LearnConfig{}), DegenerateDataError);
}

TEST_CASE("huge lambda crushes the hyperparameters toward zero") {
  Rng rng(99);
  const RoadGraph g = testsupport::random_connected_graph(8, 6, rng);
  std::vector<Snapshot> data(10, Snapshot(8));
  for (auto& s : data)
    for (double& v : s) v = rng.uniform(0.5, 1.5);

  LearnConfig cfg;
  cfg.lambda = 1e6;
  const FitResult res = fit(data, g, 0.1, cfg);
  CHECK(res.model.eta < 0.01);
  for (double b : res.model.beta) CHECK(std::abs(b) < 1e-3);
  for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
    CHECK(res.objective_trace[i] >= res.objective_trace[i - 1]);
}

TEST_CASE("ascent that cannot converge raises an error carrying the best point") {
  Rng rng(111);
  const RoadGraph g = testsupport::random_connected_graph(12, 10, rng);
  std::vector<Snapshot> data(8, Snapshot(12));
  for (auto& s : data)
    for (double& v : s) v = rng.uniform(0.0, 1.0);

  LearnConfig cfg;
  cfg.lambda = 0.5;
  cfg.profile_warm_start = false;
  cfg.max_steps = 2;
  cfg.grad_tolerance = 1e-12;
  try {
    fit(data, g, 1e-4, cfg);
    FAIL("expected FitConvergenceError");
  } catch (const FitConvergenceError& e) {
    CHECK(e.best.grad_inf_norm > 1e-12);
    CHECK(e.best.model.beta.size() == 12);
    CHECK(e.best.steps <= 2);
  }
}

TEST_CASE("parameters of a known field are recovered from samples") {
  const RoadGraph g = generate_network({NetworkSpec::Kind::grid, 10, 10, 0, 0.0, "", 0});
  const int n = g.vertex_count();
  REQUIRE(n == 100);

  std::vector<double> smooth(n);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c)
      smooth[g.require_index(std::to_string(r * 10 + c))] =
          0.3 + 1.7 * std::exp(-((r - 4.5) * (r - 4.5) + (c - 4.5) * (c - 4.5)) / 10.0);

  const double true_eta = 4.0;
  const double eps = 1e-4;
  TrafficSpec spec;
  spec.mode = TrafficSpec::Mode::gmrf;
  spec.eta = true_eta;
  spec.epsilon = eps;
  spec.beta = pattern_apply(precision_pattern(g, eps), smooth);
  for (double& b : spec.beta) b *= true_eta;
  spec.snapshots = 2500;
  spec.seed = 4711;
  const std::vector<Snapshot> data = sample_snapshots(g, spec);

  const FitResult res = fit(data, g, eps, LearnConfig{});
  CHECK(std::abs(res.model.eta - true_eta) / true_eta < 0.10);

  double err_sq = 0.0, norm_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    err_sq += (res.model.beta[i] - spec.beta[i]) * (res.model.beta[i] - spec.beta[i]);
    norm_sq += spec.beta[i] * spec.beta[i];
  }
  CHECK(std::sqrt(err_sq / norm_sq) < 0.20);
}
