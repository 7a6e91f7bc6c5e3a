#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fkpoisson/census.hpp"
#include "fkpoisson/exact.hpp"
#include "oracles.hpp"

using namespace fkp;

TEST_CASE("single bond law") {
  const ExactDistribution d = enumerate(LatticeBox::with_sides({1, 2}), {0.5, 2.0, BoundaryCondition::free_bc()});
  REQUIRE(d.prob.size() == 2);
  CHECK(d.prob[1] == doctest::Approx(1.0 / 3.0));
  CHECK(d.prob[0] == doctest::Approx(2.0 / 3.0));
  CHECK(event_probability(d, [](const BondConfig& w) { return w.open(0); }) == doctest::Approx(1.0 / 3.0));
  CHECK(event_probability(d, [](const BondConfig&) { return true; }) == doctest::Approx(1.0));
  CHECK(event_probability(d, [](const BondConfig&) { return false; }) == 0.0);
}

TEST_CASE("enumeration matches the reference weights") {
  const LatticeBox sq = LatticeBox::with_sides({2, 2});
  for (bool wired : {false, true}) {
    const ExactDistribution d =
        enumerate(sq, {0.5, 2.0, wired ? BoundaryCondition::wired() : BoundaryCondition::free_bc()});
    const auto ref = oracle::fk_law(sq, 0.5, 2.0, wired);
    CHECK(std::accumulate(d.prob.begin(), d.prob.end(), 0.0) == doctest::Approx(1.0));
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(d.prob[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
  const auto free_d = enumerate(sq, {0.5, 2.0, BoundaryCondition::free_bc()});
  const auto wired_d = enumerate(sq, {0.5, 2.0, BoundaryCondition::wired()});
  CHECK(free_d.prob != wired_d.prob);
}

TEST_CASE("q = 1 is a product measure") {
  const LatticeBox box = LatticeBox::with_sides({2, 3});
  const ExactDistribution d = enumerate(box, {0.3, 1.0, BoundaryCondition::wired()});
  for (std::uint64_t m = 0; m < d.prob.size(); ++m) {
    const int k = std::popcount(m);
    CHECK(d.prob[m] == doctest::Approx(std::pow(0.3, k) * std::pow(0.7, int(box.num_bonds()) - k)));
  }
}

TEST_CASE("enumeration cap") {
  CHECK_THROWS_AS(enumerate(LatticeBox::with_sides({4, 5}), {0.5, 2.0, BoundaryCondition::free_bc()}),
                  ResourceLimitError);
}

TEST_CASE("point process law on the 1x4 strip") {
  const LatticeBox strip = LatticeBox::with_sides({1, 4});
  const ExactDistribution d = enumerate(strip, {0.5, 1.0, BoundaryCondition::free_bc()});
  const PatternLaw law = exact_point_process_law(d, 2, PointVariant::kPlain, Finiteness::kAllFinite);
  // hand tabulation over the 8 bond configurations (bit i = bond between sites i and i+1)
  std::map<std::uint64_t, double> expected;
  for (std::uint64_t m = 0; m < 8; ++m) {
    std::uint64_t pattern = 0;
    int start = 0;
    for (int s = 1; s <= 4; ++s) {
      if (s == 4 || !((m >> (s - 1)) & 1)) {
        const int size = s - start;
        if (size >= 2) pattern |= std::uint64_t{1} << ((2 * start + size - 1) / 2);
        start = s;
      }
    }
    expected[pattern] += 1.0 / 8.0;
  }
  CHECK(oracle::l1(law.prob, expected) < 1e-12);
  CHECK(law.total() == doctest::Approx(1.0));

  const PatternLaw none = exact_point_process_law(d, 5, PointVariant::kPlain, Finiteness::kAllFinite);
  REQUIRE(none.prob.size() == 1);
  CHECK(none.prob.begin()->first == 0);
}

TEST_CASE("deterministic full cluster") {
  const LatticeBox strip = LatticeBox::with_sides({1, 3});
  const ExactDistribution d = enumerate(strip, {1.0, 1.0, BoundaryCondition::free_bc()});
  const PatternLaw law = exact_point_process_law(d, 1, PointVariant::kPlain, Finiteness::kAllFinite);
  REQUIRE(law.prob.size() == 1);
  CHECK(law.prob.begin()->first == 0b010);
}

TEST_CASE("total variation forms") {
  PatternLaw a{2, {{0, 0.5}, {3, 0.5}}};
  CHECK(exact_tv(a, a) == 0.0);
  PatternLaw p1{2, {{1, 1.0}}}, p2{2, {{2, 1.0}}};
  CHECK(exact_tv(p1, p2) == doctest::Approx(2.0));

  const ExactDistribution d = enumerate(LatticeBox::with_sides({1, 4}), {0.5, 1.0, BoundaryCondition::free_bc()});
  const PatternLaw law = exact_point_process_law(d, 2, PointVariant::kPlain, Finiteness::kAllFinite);
  std::vector<double> m;
  for (std::size_t s = 0; s < 4; ++s) m.push_back(law.marginal(s));
  const PatternLaw prod = product_law(m);
  const double tv = exact_tv(law, prod);
  CHECK(tv > 0.0);
  CHECK(tv < 2.0);
  CHECK(std::abs(tv - exact_tv_sup(law, prod)) < 1e-12);
  CHECK(std::abs(tv - oracle::l1(law.prob, prod.prob)) < 1e-12);
}

TEST_CASE("two-cluster table") {
  const ExactDistribution d = enumerate(LatticeBox::with_sides({1, 6}), {0.5, 1.0, BoundaryCondition::free_bc()});
  const TwoClusterRow same = two_cluster_check(d, 2, Site{0, 2}, Site{0, 2}, Finiteness::kAllFinite);
  CHECK(same.lhs == 0.0);
  const TwoClusterRow big = two_cluster_check(d, 7, Site{0, 1}, Site{0, 4}, Finiteness::kAllFinite);
  CHECK(big.lhs == 0.0);
  CHECK(big.holds);

  // x = 1, y = 4: both clusters of size >= 2 and disjoint, by counting bond masks
  const TwoClusterRow row = two_cluster_check(d, 2, Site{0, 1}, Site{0, 4}, Finiteness::kAllFinite);
  int lhs = 0, rhs = 0;
  for (int m = 0; m < 32; ++m) {
    auto comp = oracle::bfs_components(BondConfig::from_mask(LatticeBox::with_sides({1, 6}), m));
    auto size = [&](int s) { return std::count(comp.begin(), comp.end(), comp[s]); };
    lhs += size(1) >= 2 && size(4) >= 2 && comp[1] != comp[4];
    rhs += size(3) >= 4;
  }
  CHECK(row.lhs == doctest::Approx(lhs / 32.0));
  CHECK(row.rhs == doctest::Approx(rhs / 32.0));
  CHECK(two_cluster_table(d, 2, Finiteness::kAllFinite).size() == 15);
}

TEST_CASE("mixing coefficients") {
  const ExactDistribution ind = enumerate(LatticeBox::with_sides({1, 6}), {0.7, 1.0, BoundaryCondition::free_bc()});
  const std::vector<std::size_t> a{0}, b{4}, none{};
  CHECK(exact_ratio_mixing(ind, a, b) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(exact_weak_mixing(ind, a, none) == doctest::Approx(0.0));

  const LatticeBox strip = LatticeBox::with_sides({1, 8});
  const FKParams theta{0.7, 2.0, BoundaryCondition::partition({{Site{0, 0}, Site{0, 4}}, {Site{0, 3}, Site{0, 7}}})};
  CHECK_THROWS(resolve(theta.boundary, strip));  // strip sites 1, 2, 5, 6 are unlisted
  const FKParams theta_p{0.7, 2.0,
                         BoundaryCondition::partial_partition(strip, {{Site{0, 0}, Site{0, 4}}, {Site{0, 3}, Site{0, 7}}})};
  const ExactDistribution d = enumerate(strip, theta_p);
  const std::vector<std::size_t> e0{0}, f1{1}, f5{5};
  const double near = exact_ratio_mixing(d, e0, f1);
  const double far = exact_ratio_mixing(d, e0, f5);
  CHECK(near > far);
  CHECK(far > 0.0);
}

TEST_CASE("mixing coefficients against a search over all event pairs") {
  const LatticeBox box = LatticeBox::with_sides({2, 3});
  const ExactDistribution d = enumerate(box, {0.6, 2.0, BoundaryCondition::wired()});
  const std::vector<std::size_t> a{0, 1}, b{5, 6};
  // joint law of the two atoms
  double joint[4][4] = {};
  for (std::uint64_t i = 0; i < d.prob.size(); ++i) {
    const BondConfig w = d.config(i);
    joint[w.open(a[0]) + 2 * w.open(a[1])][w.open(b[0]) + 2 * w.open(b[1])] += d.prob[i];
  }
  double ratio = 0.0, weak = 0.0;
  for (unsigned e = 1; e < 16; ++e) {
    for (unsigned f = 1; f < 16; ++f) {
      double pe = 0, pf = 0, pef = 0;
      for (int x = 0; x < 4; ++x) {
        for (int y = 0; y < 4; ++y) {
          const double j = joint[x][y];
          if (e >> x & 1) pe += j;
          if (f >> y & 1) pf += j;
          if ((e >> x & 1) && (f >> y & 1)) pef += j;
        }
      }
      if (pe <= 0 || pf <= 0) continue;
      ratio = std::max(ratio, std::abs(pef / (pe * pf) - 1.0));
      weak = std::max(weak, std::abs(pef / pf - pe));
    }
  }
  CHECK(ratio > 0.0);
  CHECK(exact_ratio_mixing(d, a, b) == doctest::Approx(ratio).epsilon(1e-10));
  CHECK(exact_weak_mixing(d, a, b) == doctest::Approx(weak).epsilon(1e-10));
}
