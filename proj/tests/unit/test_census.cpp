#include <doctest.h>

#include <random>

#include "fkpoisson/census.hpp"
#include "oracles.hpp"

using namespace fkp;

TEST_CASE("labelling agrees with breadth-first search") {
  const LatticeBox box = LatticeBox::with_sides({6, 6});
  std::mt19937_64 gen(21);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::uint8_t> bits(box.num_bonds());
    for (auto& b : bits) b = gen() % 2;
    const BondConfig w(box, bits);
    const ClusterSet cs = label_clusters(w);
    const auto comp = oracle::bfs_components(w);
    for (std::size_t a = 0; a < box.num_sites(); ++a) {
      for (std::size_t b = 0; b < box.num_sites(); ++b) {
        CHECK((cs.cluster_of[a] == cs.cluster_of[b]) == (comp[a] == comp[b]));
      }
    }
    CHECK(cs.clusters.size() == static_cast<std::size_t>(oracle::count_components(comp)));
  }
}

TEST_CASE("extreme configurations") {
  const LatticeBox box = LatticeBox::with_sides({4, 3});
  CHECK(label_clusters(BondConfig(box, false)).clusters.size() == 12);
  const ClusterSet all = label_clusters(BondConfig(box, true));
  REQUIRE(all.clusters.size() == 1);
  CHECK(all.clusters[0].touches_boundary);
}

TEST_CASE("mass centre floors the mean") {
  CHECK(mass_center(std::vector<Site>{{3, 7}}) == Site{3, 7});
  CHECK(mass_center(std::vector<Site>{{0, 0}, {1, 0}}) == Site{0, 0});
  CHECK(mass_center(std::vector<Site>{{0, 0}, {0, 1}, {0, 2}}) == Site{0, 1});
  CHECK(mass_center(std::vector<Site>{{-1, 0}, {0, 0}}) == Site{-1, 0});
  CHECK_THROWS_AS(mass_center(std::vector<Site>{}), std::invalid_argument);
}

TEST_CASE("point process") {
  const LatticeBox strip = LatticeBox::with_sides({1, 6});
  // bonds 0-1, 1-2 open; 3-4, 4-5 open: clusters {0,1,2} and {3,4,5}
  const BondConfig w(strip, std::vector<std::uint8_t>{1, 1, 0, 1, 1});
  const ClusterSet cs = label_clusters(w);
  const PointField plain = point_process(cs, 3, PointVariant::kPlain, Finiteness::kAllFinite);
  CHECK(plain.count() == 2);
  CHECK(plain.at(Site{0, 1}));
  CHECK(plain.at(Site{0, 4}));
  CHECK(point_process(cs, 7, PointVariant::kPlain, Finiteness::kAllFinite).count() == 0);
  CHECK(point_process(cs, 3, PointVariant::kPlain, Finiteness::kAvoidsBoundary).count() == 0);
  // 4|C| < n^2 fails for |C| = 3 at n = 3
  const PointField trunc = point_process(cs, 3, PointVariant::kTruncated, Finiteness::kAllFinite);
  for (std::size_t s = 0; s < strip.num_sites(); ++s) CHECK(trunc.x[s] <= plain.x[s]);
  CHECK(trunc.count() == 0);
}

TEST_CASE("accumulator estimates, merge and rebuild") {
  const LatticeBox box = LatticeBox::with_sides({1, 3});
  PointFieldAccumulator acc(box, 1, PointVariant::kPlain, Finiteness::kAllFinite);
  PointFieldAccumulator a(box, 1, PointVariant::kPlain, Finiteness::kAllFinite);
  PointFieldAccumulator b(box, 1, PointVariant::kPlain, Finiteness::kAllFinite);
  for (int i = 0; i < 10; ++i) {
    const BondConfig w(box, std::vector<std::uint8_t>{static_cast<std::uint8_t>(i % 2), 1});
    const PointField f = point_process(label_clusters(w), 1, PointVariant::kPlain, Finiteness::kAllFinite);
    acc.add(f);
    (i < 4 ? a : b).add(f);
  }
  const PxLambdaEstimate e = acc.estimate(Site{0, 0});
  CHECK(e.px == doctest::Approx(0.5));
  CHECK(acc.estimate(Site{0, 1}).px == 1.0);  // floor of 1.5
  a.merge(b);
  CHECK(a.estimate(Site{0, 0}).px == e.px);
  CHECK(a.count_histogram() == acc.count_histogram());

  std::vector<std::uint64_t> hits;
  for (std::size_t s = 0; s < box.num_sites(); ++s) hits.push_back(acc.site_count(s));
  const auto rebuilt = PointFieldAccumulator::from_counts(box, 1, PointVariant::kPlain, Finiteness::kAllFinite,
                                                          acc.samples(), acc.collisions(), hits,
                                                          acc.count_histogram());
  CHECK(rebuilt.estimate(Site{0, 1}).lambda_direct == e.lambda_direct);
  hits.pop_back();
  CHECK_THROWS(PointFieldAccumulator::from_counts(box, 1, PointVariant::kPlain, Finiteness::kAllFinite,
                                                  acc.samples(), 0, hits, acc.count_histogram()));

  PointFieldAccumulator zero(box, 2, PointVariant::kPlain, Finiteness::kAllFinite);
  for (int i = 0; i < 3; ++i) {
    zero.add(point_process(label_clusters(BondConfig(box)), 2, PointVariant::kPlain, Finiteness::kAllFinite));
  }
  CHECK(zero.estimate(Site{0, 0}).px == 0.0);
  CHECK(zero.estimate(Site{0, 0}).lambda_direct == 0.0);
}

TEST_CASE("theta estimate extremes") {
  const LatticeBox box = LatticeBox::with_sides({5, 5});
  std::vector<ClusterSet> open{label_clusters(BondConfig(box, true))};
  std::vector<ClusterSet> closed{label_clusters(BondConfig(box, false))};
  CHECK(theta_estimate(open, box.center()) == 1.0);
  CHECK(theta_estimate(closed, box.center()) == 0.0);
}

TEST_CASE("decay estimate at p = 1 is unavailable") {
  const FKParams params{1.0, 1.0, BoundaryCondition::free_bc()};
  const std::vector<DecayScheduleEntry> schedule{{2, 8}};
  const DecayEstimate est = decay_rate(params, 2, schedule, {1, 1, 20}, 3);
  REQUIRE(est.rows.size() == 1);
  CHECK(est.rows[0].prob_origin == 0.0);
  CHECK_FALSE(est.rows[0].a_origin.has_value());
}
