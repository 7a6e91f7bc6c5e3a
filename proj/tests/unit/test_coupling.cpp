#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fkpoisson/coupling.hpp"
#include "fkpoisson/exact.hpp"

using namespace fkp;

namespace {

std::vector<std::size_t> boundary_idx(const LatticeBox& box) {
  auto b = box.boundary_indices();
  return {b.begin(), b.end()};
}

}  // namespace

TEST_CASE("colouring") {
  const LatticeBox box = LatticeBox::with_sides({4, 4});
  const BondConfig open(box, true), closed(box, false);
  const Coloring all_white = color_sites(open, open);
  for (std::size_t s = 0; s < box.num_sites(); ++s) CHECK(all_white.is_white(s));
  const Coloring all_black = color_sites(open, closed);
  for (std::size_t s = 0; s < box.num_sites(); ++s) CHECK(all_black.is_black(s));

  std::mt19937_64 gen(12);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::uint8_t> a(box.num_bonds()), b(box.num_bonds());
    for (auto& x : a) x = gen() % 4 != 0;
    for (auto& x : b) x = gen() % 4 != 0;
    CHECK(color_sites(BondConfig(box, a), BondConfig(box, b)).white ==
          color_sites(BondConfig(box, b), BondConfig(box, a)).white);
  }
}

TEST_CASE("black clusters") {
  const LatticeBox box = LatticeBox::with_sides({5, 5});
  const auto v = boundary_idx(box);
  Coloring c{box, std::vector<std::uint8_t>(box.num_sites(), 1)};
  CHECK(black_cluster(c, v) == v);
  c.white.assign(box.num_sites(), 0);
  CHECK(black_cluster(c, v).size() == box.num_sites());

  // white ring around a black centre
  for (std::size_t s = 0; s < box.num_sites(); ++s) {
    const Site x = box.site(s);
    c.white[s] = linf_distance(x, Site{2, 2}) == 1;
  }
  const auto b = black_cluster(c, v);
  CHECK(b == v);
  const auto gamma = gamma_indices(box, std::vector<Site>{{2, 2}});
  const CouplingOutcome out = analyze_coloring(c, b, gamma);
  CHECK(out.k_event);
  CHECK(out.region.interior.size() == 9);
  CHECK(out.region.boundary.size() == 8);
  CHECK(check_claims(out, gamma).passes());
}

TEST_CASE("interior boundary from the box boundary") {
  const LatticeBox box = LatticeBox::with_sides({5, 5});
  Coloring c{box, std::vector<std::uint8_t>(box.num_sites(), 1)};
  const auto v = boundary_idx(box);
  const auto gamma = gamma_indices(box, std::vector<Site>{{2, 2}});
  const auto d = interior_boundary(c, v, gamma);
  // brute force: interior sites (not in B) with a star neighbour in B
  std::vector<std::size_t> expect;
  for (std::size_t s = 0; s < box.num_sites(); ++s) {
    if (box.is_boundary(s)) continue;
    bool touches = false;
    for (const Site& y : star_neighbors(box.site(s))) touches = touches || (box.contains(y) && box.is_boundary(*box.index_of(y)));
    if (touches) expect.push_back(s);
  }
  CHECK(d == expect);

  std::vector<std::size_t> all(box.num_sites());
  std::iota(all.begin(), all.end(), std::size_t{0});
  CHECK(interior_region(c, all, gamma).boundary.empty());
}

TEST_CASE("K on extreme pairs") {
  const LatticeBox box = LatticeBox::with_sides({7, 7});
  const std::vector<Site> centre{{3, 3}};
  CHECK(k_event(BondConfig(box, true), BondConfig(box, true), centre));
  CHECK_FALSE(k_event(BondConfig(box, true), BondConfig(box, false), centre));
}

TEST_CASE("claims hold on sampled outcomes with K") {
  const LatticeBox box = LatticeBox::with_sides({9, 9});
  const FKParams wired{0.95, 2.0, BoundaryCondition::wired()};
  const FKParams free{0.95, 2.0, BoundaryCondition::free_bc()};
  const std::vector<Site> gamma_sites{{4, 4}};
  const auto gamma = gamma_indices(box, gamma_sites);
  int with_k = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const CouplingOutcome out = analyze_pair(sample(wired, box, 30, 2 * s), sample(free, box, 30, 2 * s + 1), gamma_sites);
    if (!out.k_event) continue;
    ++with_k;
    const ClaimCheck cc = check_claims(out, gamma);
    CHECK(cc.passes());
  }
  CHECK(with_k > 0);
}

TEST_CASE("influence vanishes at q = 1") {
  const LatticeBox box = LatticeBox::with_sides({7, 7});
  const std::vector<int> sides{5, 3};
  const auto schedule = centered_gammas(box, sides);
  const std::size_t bond = *box.bond_between(*box.index_of(Site{3, 3}), *box.index_of(Site{3, 4}));
  const InfluenceDecay inf = influence_decay(0.6, 1.0, box, BoundaryCondition::wired(), BoundaryCondition::free_bc(),
                                             schedule, bond, {5, 1, 4000}, 3);
  for (const InfluenceRow& r : inf.rows) {
    CHECK(r.diff <= 4.0 * r.diff_se + 1e-12);
    CHECK(r.inequality_holds);
  }
}

TEST_CASE("mixing scan against the oracle") {
  const LatticeBox strip = LatticeBox::with_sides({1, 6});
  const FKParams params{0.7, 2.0, BoundaryCondition::partial_partition(strip, {{Site{0, 0}, Site{0, 5}}})};
  const std::vector<int> seps{1, 3};
  const auto pairs = axis_region_pairs(strip, Site{0, 0}, seps);
  const MixingScan scan = mixing_scan(params, strip, pairs, {50, 2, 40000}, 5);
  for (const MixingRow& r : scan.rows) {
    REQUIRE(r.exact_ratio.has_value());
    CHECK(std::abs(r.ratio - *r.exact_ratio) <= 4.0 * r.ratio_se + 1e-9);
  }
  const FKParams indep{0.7, 1.0, BoundaryCondition::free_bc()};
  const MixingScan flat = mixing_scan(indep, strip, pairs, {1, 1, 20000}, 6);
  for (const MixingRow& r : flat.rows) CHECK(std::abs(*r.exact_ratio) < 1e-12);
}

TEST_CASE("exponential fit") {
  std::vector<double> d{1, 2, 3, 4}, v;
  for (double x : d) v.push_back(3.0 * std::exp(-0.7 * x));
  const ExponentialFit f = fit_exponential(d, v);
  REQUIRE(f.rate.has_value());
  CHECK(*f.rate == doctest::Approx(0.7));
  CHECK(f.r_squared == doctest::Approx(1.0));
  const ExponentialFit fixed = fit_exponential(d, v, std::log(3.0));
  CHECK(*fixed.rate == doctest::Approx(0.7));
  std::vector<double> zeros(4, 0.0);
  CHECK_FALSE(fit_exponential(d, zeros).rate.has_value());
}
