#include <catch2/catch.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "roadmrf/datagen.hpp"
#include "roadmrf/rng.hpp"
#include "test_support.hpp"

using namespace roadmrf;

namespace {

NetworkSpec grid_spec(int w, int h) {
  NetworkSpec s;
  s.kind = NetworkSpec::Kind::grid;
  s.width = w;
  s.height = h;
  return s;
}

NetworkSpec planar_spec(int n, double density, std::uint64_t seed) {
  NetworkSpec s;
  s.kind = NetworkSpec::Kind::random_planar;
  s.n = n;
  s.density = density;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("grid networks have the expected shape") {
  const RoadGraph g22 = generate_network(grid_spec(2, 2));
  CHECK(g22.vertex_count() == 4);
  CHECK(g22.edge_count() == 4);

  const RoadGraph g31 = generate_network(grid_spec(3, 1));
  REQUIRE(g31.vertex_count() == 3);
  CHECK(g31.edge_count() == 2);
  CHECK(g31.degree(g31.require_index("0")) == 1);
  CHECK(g31.degree(g31.require_index("1")) == 2);
  CHECK(g31.degree(g31.require_index("2")) == 1);

  const RoadGraph g75 = generate_network(grid_spec(7, 5));
  CHECK(g75.vertex_count() == 35);
  CHECK(g75.edge_count() == 2 * 35 - 7 - 5);

  CHECK_THROWS_AS(generate_network(grid_spec(0, 3)), ValidationError);
}

TEST_CASE("random planar networks are connected with exact edge counts") {
  // n=30 fills a 6x5 grid: 49 grid edges, 20 faces, round(0.3*20)=6 diagonals.
  const RoadGraph g = generate_network(planar_spec(30, 0.3, 17));
  CHECK(g.vertex_count() == 30);
  CHECK(g.edge_count() == 49 + 6);
  const std::vector<int> comp = testsupport::component_labels(g);
  CHECK(*std::max_element(comp.begin(), comp.end()) == 0);

  // a ragged final row stays connected too
  const RoadGraph r = generate_network(planar_spec(23, 0.5, 3));
  CHECK(r.vertex_count() == 23);
  const std::vector<int> rcomp = testsupport::component_labels(r);
  CHECK(*std::max_element(rcomp.begin(), rcomp.end()) == 0);

  CHECK_THROWS_AS(generate_network(planar_spec(10, 0.0, 1)), ValidationError);
  CHECK_THROWS_AS(generate_network(planar_spec(10, 1.5, 1)), ValidationError);
}

TEST_CASE("generation is deterministic in the seed") {
  const RoadGraph a = generate_network(planar_spec(40, 0.6, 123));
  const RoadGraph b = generate_network(planar_spec(40, 0.6, 123));
  const RoadGraph c = generate_network(planar_spec(40, 0.6, 124));
  CHECK(a.edges() == b.edges());
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());

  TrafficSpec t;
  t.mode = TrafficSpec::Mode::gmrf;
  t.beta.assign(a.vertex_count(), 0.3);
  t.eta = 2.0;
  t.epsilon = 0.1;
  t.snapshots = 3;
  t.seed = 9;
  const auto s1 = sample_snapshots(a, t);
  const auto s2 = sample_snapshots(a, t);
  CHECK(s1 == s2);

  // worker count never changes the draws
  const auto s3 = sample_snapshots(a, t, 3);
  CHECK(s1 == s3);
}

TEST_CASE("single-vertex field sampling reproduces the gaussian moments") {
  const RoadGraph g = build_graph({}, std::vector<std::string>{"a"});
  TrafficSpec t;
  t.mode = TrafficSpec::Mode::gmrf;
  t.beta = {2.0};
  t.eta = 4.0;
  t.epsilon = 1.0;
  t.snapshots = 100000;
  t.seed = 31337;
  const std::vector<Snapshot> data = sample_snapshots(g, t);

  // mean beta/(eta*eps) = 0.5, variance 1/(eta*eps) = 0.25
  double mean = 0.0;
  for (const auto& s : data) mean += s[0];
  mean /= data.size();
  double var = 0.0;
  for (const auto& s : data) var += (s[0] - mean) * (s[0] - mean);
  var /= (data.size() - 1);

  const double se_mean = 0.5 / std::sqrt(100000.0);
  const double se_var = 0.25 * std::sqrt(2.0 / 100000.0);
  CHECK(std::abs(mean - 0.5) < 3.0 * se_mean);
  CHECK(std::abs(var - 0.25) < 3.0 * se_var);
}

TEST_CASE("zero-level field sampling has vanishing mean") {
  const RoadGraph g = testsupport::toy_graph();
  TrafficSpec t;
  t.mode = TrafficSpec::Mode::gmrf;
  t.beta.assign(6, 0.0);
  t.eta = 2.0;
  t.epsilon = 0.5;
  t.snapshots = 20000;
  t.seed = 5;
  const std::vector<Snapshot> data = sample_snapshots(g, t);

  const Eigen::MatrixXd cov = (t.eta * testsupport::dense_precision(g, t.epsilon)).inverse();
  for (int i = 0; i < 6; ++i) {
    double mean = 0.0;
    for (const auto& s : data) mean += s[i];
    mean /= data.size();
    CHECK(std::abs(mean) < 4.0 * std::sqrt(cov(i, i) / data.size()));
  }
}

TEST_CASE("empirical precision of samples matches eta * C") {
  const RoadGraph g = testsupport::toy_graph();
  const double eta = 2.0, eps = 0.3;
  TrafficSpec t;
  t.mode = TrafficSpec::Mode::gmrf;
  t.beta.assign(6, 0.4);
  t.eta = eta;
  t.epsilon = eps;
  t.snapshots = 100000;
  t.seed = 99;
  const std::vector<Snapshot> data = sample_snapshots(g, t);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
  for (const auto& s : data) mean += Eigen::Map<const Eigen::VectorXd>(s.data(), 6);
  mean /= data.size();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(6, 6);
  for (const auto& s : data) {
    const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(s.data(), 6) - mean;
    cov += d * d.transpose();
  }
  cov /= (data.size() - 1);

  const Eigen::MatrixXd precision = cov.inverse();
  const Eigen::MatrixXd expected = eta * testsupport::dense_precision(g, eps);
  const double scale = expected.diagonal().maxCoeff();
  CHECK((precision - expected).lpNorm<Eigen::Infinity>() < 0.05 * scale);
}

TEST_CASE("clamping flag keeps samples nonnegative and is off by default") {
  const RoadGraph g = testsupport::toy_graph();
  TrafficSpec t;
  t.mode = TrafficSpec::Mode::gmrf;
  t.beta.assign(6, -1.0);  // negative level -> plenty of negative draws
  t.eta = 1.0;
  t.epsilon = 0.5;
  t.snapshots = 50;
  t.seed = 8;
  const auto raw = sample_snapshots(g, t);
  bool any_negative = false;
  for (const auto& s : raw)
    for (double v : s) any_negative = any_negative || v < 0.0;
  CHECK(any_negative);

  t.clamp_negative = true;
  const auto clamped = sample_snapshots(g, t);
  for (const auto& s : clamped)
    for (double v : s) CHECK(v >= 0.0);
}

TEST_CASE("hotspot surfaces concentrate as decay grows") {
  const RoadGraph g = generate_network(grid_spec(5, 5));
  TrafficSpec t;
  t.mode = TrafficSpec::Mode::hotspot;
  t.centers = {"12"};  // grid center
  t.peak = 2.0;
  t.decay = 50.0;  // effectively infinite: e^-50 per hop
  t.snapshots = 2;
  t.seed = 6;
  const auto data = sample_snapshots(g, t);
  const int center = g.require_index("12");
  for (const auto& s : data) {
    CHECK(s[center] >= 1.5);  // peak * [0.75, 1.25)
    for (int v = 0; v < g.vertex_count(); ++v)
      if (v != center) CHECK(s[v] < 1e-10);
  }

  t.centers = {"nope"};
  CHECK_THROWS_AS(sample_snapshots(g, t), StructuralError);
}

TEST_CASE("masking edge cases and concentration") {
  const Snapshot s(10000, 0.5);

  const PartialSnapshot all = mask_snapshot(s, 0.0, 1);
  CHECK(all.unobserved().empty());

  const PartialSnapshot none = mask_snapshot(s, 1.0, 1);
  CHECK(none.unobserved().size() == 10000);
  CHECK(none.observed_count() == 0);

  // binomial concentration: |V_u|/N within 0.7 +- 0.02 (beyond 3 sigma)
  const PartialSnapshot most = mask_snapshot(s, 0.7, 42);
  const double fraction = most.unobserved().size() / 10000.0;
  CHECK(fraction > 0.68);
  CHECK(fraction < 0.72);

  const PartialSnapshot again = mask_snapshot(s, 0.7, 42);
  CHECK(again.unobserved() == most.unobserved());

  CHECK_THROWS_AS(mask_snapshot(s, -0.1, 1), ValidationError);
  CHECK_THROWS_AS(mask_snapshot(s, 1.1, 1), ValidationError);
}
