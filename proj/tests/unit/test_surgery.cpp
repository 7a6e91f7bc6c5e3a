#include <doctest.h>

#include <random>

#include "fkpoisson/exact.hpp"
#include "fkpoisson/surgery.hpp"
#include "oracles.hpp"

using namespace fkp;

namespace {

std::vector<std::size_t> indices(const LatticeBox& box, const std::vector<Site>& sites) {
  std::vector<std::size_t> out;
  for (const Site& s : sites) out.push_back(*box.index_of(s));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("first pair") {
  const std::vector<Site> a{{0, 0}}, b{{3, 1}};
  const SitePair p = first_pair(a, b);
  CHECK(p.first == Site{0, 0});
  CHECK(p.second == Site{3, 1});

  const std::vector<Site> c{{0, 0}, {0, 1}, {0, 2}}, c2{{2, 1}, {4, 4}, {5, 0}};
  CHECK(first_pair(c, c2) == SitePair{Site{0, 1}, Site{2, 1}});
  CHECK_THROWS_AS(first_pair(c, c), std::invalid_argument);

  std::mt19937 gen(4);
  std::uniform_int_distribution<int> coord(0, 7);
  for (int rep = 0; rep < 200; ++rep) {
    std::set<Site> used;
    std::vector<Site> x, y;
    while (x.size() < 4) {
      Site s{coord(gen), coord(gen)};
      if (used.insert(s).second) x.push_back(s);
    }
    while (y.size() < 4) {
      Site s{coord(gen), coord(gen)};
      if (used.insert(s).second) y.push_back(s);
    }
    SitePair best{x[0], y[0]};
    for (const Site& u : x) {
      for (const Site& v : y) {
        if (pair_order({u, v}, best) < 0) best = {u, v};
      }
    }
    CHECK(first_pair(x, y) == best);
  }
}

TEST_CASE("axis path") {
  const auto p = axis_path(Site{0, 0}, Site{2, 1});
  CHECK(p == std::vector<Site>{{0, 0}, {0, 1}, {1, 1}, {2, 1}});
  CHECK(axis_path(Site{0, 0}, Site{3, 0}).size() == 4);
  std::mt19937 gen(8);
  std::uniform_int_distribution<int> coord(-5, 5);
  for (int rep = 0; rep < 1000; ++rep) {
    const Site u{coord(gen), coord(gen), coord(gen)}, v{coord(gen), coord(gen), coord(gen)};
    const auto path = axis_path(u, v);
    CHECK(path.size() == static_cast<std::size_t>(l1_distance(u, v)) + 1);
    CHECK(path.front() == u);
    CHECK(path.back() == v);
    for (std::size_t i = 1; i < path.size(); ++i) CHECK(l1_distance(path[i - 1], path[i]) == 1);
  }
}

TEST_CASE("surgery on adjacent singletons") {
  const LatticeBox box = LatticeBox::with_sides({3, 3});
  const BondConfig omega(box);
  const auto a = indices(box, {{1, 0}});
  const auto b = indices(box, {{1, 1}});
  const SurgeryResult r = transform(omega, a, b);
  CHECK(r.opened.size() == 1);
  CHECK(r.closed.empty());
  CHECK(r.merged.size() == 2);
  const WeightRatio w = weight_ratio_check(r, {0.5, 2.0, BoundaryCondition::free_bc()});
  CHECK(w.holds);
  CHECK(w.ratio >= finite_energy_floor({0.5, 2.0, BoundaryCondition::free_bc()}) - 1e-12);
}

TEST_CASE("surgery through one interior site") {
  const LatticeBox box = LatticeBox::with_sides({5, 5});
  BondConfig omega(box);
  auto open_between = [&](Site s, Site t) { omega.set(*box.bond_between(*box.index_of(s), *box.index_of(t)), true); };
  open_between({0, 1}, {1, 1});
  open_between({1, 1}, {2, 1});  // C: vertical segment at column 1
  open_between({0, 3}, {1, 3});
  open_between({1, 3}, {2, 3});  // C': vertical segment at column 3
  open_between({1, 2}, {2, 2});  // a third cluster through the interior site (0,2)
  open_between({0, 2}, {1, 2});
  const ClusterSet cs = label_clusters(omega);
  const auto c = cs.clusters[cs.cluster_of[*box.index_of(Site{0, 1})]].sites;
  const auto c2 = cs.clusters[cs.cluster_of[*box.index_of(Site{0, 3})]].sites;
  const SurgeryResult r = transform(omega, c, c2);
  CHECK(r.path_length() == 2);
  CHECK(r.path[1] == Site{0, 2});
  // the interior site (0,2) keeps only its two path bonds
  const std::size_t mid = *box.index_of(Site{0, 2});
  for (const Incidence& inc : box.incident(mid)) {
    const Site other = box.site(inc.neighbor);
    const bool on_path = other == Site{0, 1} || other == Site{0, 3};
    CHECK(r.output.open(inc.bond) == on_path);
  }
  const ClusterSet after = label_clusters(r.output);
  CHECK(after.clusters[after.cluster_of[r.merged.front()]].sites == r.merged);
  CHECK(r.changed() <= 2 * 2 * r.path_length());
  const SizeWindow sw = size_window(r, 2, 5.0);
  CHECK(sw.additive);
}

TEST_CASE("transform rejects non-clusters") {
  const LatticeBox box = LatticeBox::with_sides({3, 3});
  const BondConfig omega(box, true);
  const auto all = label_clusters(omega).clusters[0].sites;
  CHECK_THROWS_AS(transform(omega, all, all), std::invalid_argument);
  const auto part = std::vector<std::size_t>{0};
  CHECK_THROWS_AS(transform(omega, part, std::vector<std::size_t>{8}), std::invalid_argument);
}

TEST_CASE("random surgeries keep every invariant") {
  const SurgeryScan s = surgery_scan({0.5, 2.0, BoundaryCondition::free_bc()}, LatticeBox::with_sides({8, 8}), 2,
                                     5.0, 300, 17);
  CHECK(s.instances == 300);
  CHECK(s.all_hold());
}

TEST_CASE("antecedents") {
  CHECK(antecedent_bound(2, 1.0, 2) == doctest::Approx(144.0 * std::pow(2.0 * std::log(2.0), 2) *
                                                      std::pow(2.0, 4.0 * std::log(2.0))));
  const LatticeBox box = LatticeBox::with_sides({3, 4});
  CHECK(count_antecedents(BondConfig(box), 2, 3.0, Finiteness::kAllFinite).count == 0);

  // known preimage: two dominoes one step apart on a 3x4 box
  BondConfig omega(box);
  omega.set(*box.bond_between(*box.index_of(Site{0, 0}), *box.index_of(Site{1, 0})), true);
  omega.set(*box.bond_between(*box.index_of(Site{0, 2}), *box.index_of(Site{1, 2})), true);
  const ClusterSet cs = label_clusters(omega);
  const auto c = cs.clusters[cs.cluster_of[*box.index_of(Site{0, 0})]].sites;
  const auto c2 = cs.clusters[cs.cluster_of[*box.index_of(Site{0, 2})]].sites;
  const SurgeryResult r = transform(omega, c, c2);
  const AntecedentCount ac = count_antecedents(r.output, 2, 3.0, Finiteness::kAllFinite);
  CHECK(ac.count >= 1);
  CHECK(std::find(ac.antecedents.begin(), ac.antecedents.end(), omega) != ac.antecedents.end());
  CHECK(static_cast<double>(ac.count) <= antecedent_bound(2, 3.0, 2));
  CHECK_THROWS_AS(count_antecedents(r.output, 2, 3.0, Finiteness::kAllFinite, 4), ResourceLimitError);
}
