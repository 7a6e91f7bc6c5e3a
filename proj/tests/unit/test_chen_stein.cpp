#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fkpoisson/chen_stein.hpp"
#include "fkpoisson/exact.hpp"
#include "oracles.hpp"

using namespace fkp;

TEST_CASE("dependence neighbourhoods") {
  const LatticeBox big = LatticeBox::with_sides({20, 20});
  CHECK(neighborhood(Site{10, 10}, 1, big).size() == 1);
  CHECK(neighborhood_half_width(2) == 2);
  const auto b = neighborhood(Site{10, 10}, 2, big);
  CHECK(b.size() == 25);
  for (const Site& y : b) CHECK(linf_distance(y, Site{10, 10}) <= 2);
  CHECK(neighborhood(Site{0, 0}, 2, big).size() == 9);
  CHECK(neighborhood_offsets(2, 2).size() == 24);
  CHECK(offset_positions(LatticeBox::with_sides({1, 8}), Site{0, 3}) == 5);
  CHECK(offset_positions(LatticeBox::with_sides({1, 8}), Site{1, 0}) == 0);
}

TEST_CASE("b1 and b2 against direct sums") {
  const LatticeBox single = LatticeBox::with_sides({1, 1});
  const std::vector<double> p1{0.3};
  CHECK(compute_b1(p1, single, 2) == doctest::Approx(0.09));

  const LatticeBox strip = LatticeBox::with_sides({1, 7});
  const ExactDistribution d = enumerate(strip, {0.6, 2.0, BoundaryCondition::free_bc()});
  const int hw = 2;
  const ExactChenStein e = exact_chen_stein(d, 2, Finiteness::kAllFinite, hw);
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t x = 0; x < 7; ++x) {
    for (std::size_t y = 0; y < 7; ++y) {
      if (std::abs(int(x) - int(y)) > hw) continue;
      b1 += e.px[x] * e.px[y];
      if (x == y) continue;
      double pxy = 0.0;
      for (const auto& [mask, pr] : e.law.prob) {
        if ((mask >> x & 1) && (mask >> y & 1)) pxy += pr;
      }
      b2 += pxy;
    }
  }
  CHECK(e.b1 == doctest::Approx(b1).epsilon(1e-12));
  CHECK(e.b2 == doctest::Approx(b2).epsilon(1e-12));
  CHECK(e.sum_px_sq == doctest::Approx(std::inner_product(e.px.begin(), e.px.end(), e.px.begin(), 0.0)));
}

TEST_CASE("b3 with a neighbourhood covering the box") {
  const LatticeBox strip = LatticeBox::with_sides({1, 5});
  const ExactDistribution d = enumerate(strip, {0.5, 2.0, BoundaryCondition::free_bc()});
  // nothing is left outside the neighbourhood to condition on
  const ExactChenStein e = exact_chen_stein(d, 2, Finiteness::kAllFinite, 10);
  CHECK(e.b3 == 0.0);
  CHECK(e.b1 > 0.0);
}

TEST_CASE("b3 vanishes across a forced cut at q = 1") {
  // middle bond closed: sites 0..2 and 3..5 are independent, and for
  // half-width 2 every site's conditioning region lies in the other half
  const LatticeBox strip = LatticeBox::with_sides({1, 6});
  const ExactDistribution d = enumerate(strip, {0.5, 1.0, BoundaryCondition::free_bc()});
  PatternLaw cut{6, {}};
  for (std::uint64_t m = 0; m < d.prob.size(); ++m) {
    if (m & 0b00100) continue;
    const PointField f = point_process(label_clusters(d.config(m)), 2, PointVariant::kPlain, Finiteness::kAllFinite);
    cut.prob[pattern_mask(f)] += 2.0 * d.prob[m];
  }
  CHECK(cut.total() == doctest::Approx(1.0));
  CHECK(exact_b3(cut, strip, 2) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bound arithmetic") {
  CHECK(tv_bound(0.0, 0.0, 0.0, 0.0) == 0.0);
  CHECK(tv_bound(0.0, 0.0, 0.0, 0.01) == doctest::Approx(0.04));
  const Interval iv = tv_bound(0.1, 0.2, Interval{0.0, 0.5}, 0.0);
  CHECK(iv.lower == doctest::Approx(1.2));
  CHECK(iv.upper == doctest::Approx(2.2));
}

TEST_CASE("exact instance of the total variation bound") {
  for (double p : {0.3, 0.5, 0.7}) {
    for (double q : {1.0, 2.0}) {
      const ExactDistribution d = enumerate(LatticeBox::with_sides({1, 4}), {p, q, BoundaryCondition::free_bc()});
      const ExactChenStein e = exact_chen_stein(d, 2, Finiteness::kAllFinite, neighborhood_half_width(2));
      CHECK(e.tv <= e.bound);
    }
  }
}

TEST_CASE("sampled pair statistics partition") {
  const LatticeBox box = LatticeBox::with_sides({6, 6});
  std::vector<ClusterSet> samples;
  for (std::uint64_t s = 0; s < 200; ++s) samples.push_back(label_clusters(sample({0.45, 1.0, BoundaryCondition::free_bc()}, box, 1, s)));
  std::vector<Site> offsets;
  for (const Site& z : neighborhood_offsets(2, 2)) offsets.push_back(z);
  const PairStats ps = estimate_pxy(samples, 2, 1.0, Finiteness::kAvoidsBoundary, offsets);
  for (const OffsetPairStats& o : ps.offsets) {
    CHECK(o.close + o.distant == doctest::Approx(o.truncated));
    CHECK(o.truncated <= o.pxy + 1e-12);
  }
  std::vector<ClusterSet> empty_box;
  for (int i = 0; i < 5; ++i) empty_box.push_back(label_clusters(BondConfig(LatticeBox::with_sides({2, 2}), true)));
  const PairStats none = estimate_pxy(empty_box, 3, 1.0, Finiteness::kAllFinite, neighborhood_offsets(2, 4));
  CHECK(none.b2 == 0.0);
}

TEST_CASE("b1 b2 reject missing offsets") {
  const LatticeBox strip = LatticeBox::with_sides({1, 5});
  PairAccumulator acc(strip, 2, 5.0, Finiteness::kAllFinite, {Site{0, 1}});
  acc.add(label_clusters(BondConfig(strip, true)));
  acc.add(label_clusters(BondConfig(strip, false)));
  const std::vector<double> px(5, 0.1);
  CHECK_THROWS_AS(compute_b1_b2(px, acc.stats(), strip, 2), std::invalid_argument);
}

TEST_CASE("stratified b3 brackets the exact value") {
  const LatticeBox strip = LatticeBox::with_sides({1, 5});
  const FKParams params{0.5, 1.0, BoundaryCondition::free_bc()};
  const ExactDistribution d = enumerate(strip, params);
  const ExactChenStein e = exact_chen_stein(d, 2, Finiteness::kAllFinite, 0);
  StratifiedB3Accumulator acc(strip, 0);
  for (std::uint64_t s = 0; s < 40000; ++s) {
    const BondConfig w = sample(params, strip, 1, s);
    acc.add(point_process(label_clusters(w), 2, PointVariant::kPlain, Finiteness::kAllFinite));
  }
  const B3Estimate est = acc.estimate(50);
  CHECK(est.method == B3Method::kStratified);
  CHECK(est.lower <= e.b3);
  CHECK(e.b3 <= est.upper);
}

TEST_CASE("Poisson comparison") {
  const auto pmf = poisson_pmf(2.5);
  CHECK(std::accumulate(pmf.begin(), pmf.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-11));
  CHECK(pmf[3] == doctest::Approx(std::exp(-2.5) * std::pow(2.5, 3) / 6.0));

  const PoissonComparison zero = poisson_count_test({{0, 100}}, 50, 1);
  CHECK(zero.tv == 0.0);
  CHECK(zero.degenerate);

  const PoissonComparison ones = poisson_count_test({{1, 100}}, 50, 1);
  double expect = 0.0;
  double fact = 1.0;
  for (int k = 0; k < 40; ++k) {
    if (k > 0) fact *= k;
    expect += std::abs((k == 1 ? 1.0 : 0.0) - std::exp(-1.0) / fact);
  }
  CHECK(ones.lambda_hat == 1.0);
  CHECK(ones.tv == doctest::Approx(expect).epsilon(1e-10));
  CHECK(ones.ci_lower <= ones.tv);
  CHECK(ones.tv <= ones.ci_upper);
}
