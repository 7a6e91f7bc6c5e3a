#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fkpoisson/lattice.hpp"

using namespace fkp;

TEST_CASE("bond counts") {
  CHECK(LatticeBox::with_sides({1, 2}).num_bonds() == 1);
  CHECK(LatticeBox::with_sides({2, 2}).num_bonds() == 4);
  const LatticeBox b3 = LatticeBox::with_sides({3, 3});
  CHECK(b3.num_bonds() == 12);
  std::size_t brute = 0;
  for (std::size_t a = 0; a < b3.num_sites(); ++a) {
    for (std::size_t b = a + 1; b < b3.num_sites(); ++b) brute += l1_distance(b3.site(a), b3.site(b)) == 1;
  }
  CHECK(brute == 12);
  CHECK(LatticeBox::with_sides({4, 5, 3}).num_bonds() == 3 * 5 * 3 + 4 * 4 * 3 + 4 * 5 * 2);
}

TEST_CASE("bond endpoints are nearest neighbours in lexicographic order") {
  const LatticeBox box = LatticeBox::with_sides({3, 4});
  for (const Bond& b : box.bonds()) {
    CHECK(l1_distance(box.site(b.lo), box.site(b.hi)) == 1);
    CHECK(box.site(b.lo) < box.site(b.hi));
    CHECK(box.bond_between(b.lo, b.hi).has_value());
  }
}

TEST_CASE("boundary sites") {
  CHECK(boundary(LatticeBox::with_sides({1, 1})).size() == 1);
  const auto b3 = boundary(LatticeBox::with_sides({3, 3}));
  CHECK(b3.size() == 8);
  CHECK(std::find(b3.begin(), b3.end(), Site{1, 1}) == b3.end());
  const LatticeBox box4 = LatticeBox::with_sides({4, 4});
  std::size_t brute = 0;
  for (std::size_t s = 0; s < box4.num_sites(); ++s) {
    bool out = false;
    for (const Site& y : nearest_neighbors(box4.site(s))) out = out || !box4.contains(y);
    brute += out;
  }
  CHECK(brute == 12);
  CHECK(boundary(box4).size() == 12);
}

TEST_CASE("star neighbourhoods") {
  CHECK(star_neighbors(Site{0, 0}).size() == 8);
  CHECK(star_neighbors(Site{0, 0, 0}).size() == 26);
  auto a = star_neighbors(Site{0, 0});
  auto b = star_neighbors(Site{5, 5});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] + Site{5, 5} == b[i]);
}

TEST_CASE("set distance") {
  const std::vector<Site> o{{0, 0}};
  CHECK(set_distance(o, o) == 0);
  const std::vector<Site> t{{2, 1}};
  CHECK(set_distance(o, t) == 3);
  std::mt19937 gen(7);
  std::uniform_int_distribution<int> c(-6, 6);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Site> g, d;
    for (int i = 0; i < 5; ++i) {
      g.push_back(Site{c(gen), c(gen)});
      d.push_back(Site{c(gen), c(gen)});
    }
    int best = 1 << 30;
    for (const Site& x : g) {
      for (const Site& y : d) best = std::min(best, std::abs(x[0] - y[0]) + std::abs(x[1] - y[1]));
    }
    CHECK(set_distance(g, d) == best);
  }
  CHECK_THROWS_AS(set_distance(std::vector<Site>{}, o), std::invalid_argument);
}

TEST_CASE("pair order") {
  const SitePair shorter{Site{0, 0}, Site{1, 0}};
  const SitePair longer{Site{0, 0}, Site{2, 0}};
  CHECK(pair_order(shorter, longer) == std::strong_ordering::less);
  CHECK(pair_order(shorter, shorter) == std::strong_ordering::equal);

  std::mt19937 gen(3);
  std::uniform_int_distribution<int> c(-4, 4);
  std::vector<SitePair> pairs;
  for (int i = 0; i < 100; ++i) pairs.push_back({Site{c(gen), c(gen)}, Site{c(gen), c(gen)}});
  std::sort(pairs.begin(), pairs.end(), [](const SitePair& a, const SitePair& b) { return pair_order(a, b) < 0; });
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    CHECK(l1_distance(pairs[i - 1].first, pairs[i - 1].second) <= l1_distance(pairs[i].first, pairs[i].second));
  }
}

TEST_CASE("site indexing round trip") {
  const LatticeBox box(Site{-2, 3}, {4, 3});
  for (std::size_t s = 0; s < box.num_sites(); ++s) CHECK(box.index_of(box.site(s)) == s);
  CHECK_FALSE(box.contains(Site{2, 3}));
  CHECK(box.contains(Site{1, 5}));
}
