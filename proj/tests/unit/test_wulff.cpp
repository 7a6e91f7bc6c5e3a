#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "fkpoisson/wulff.hpp"

using namespace fkp;

TEST_CASE("raster volumes") {
  const std::vector<double> lo{0.0, 0.0}, hi{2.0, 1.0};
  CHECK(box_shape(2, 0.125, lo, hi).volume() == doctest::Approx(2.0));
  const ShapeMask disk = ball_shape(2, 0.01, 1.0);
  CHECK(disk.volume() == doctest::Approx(std::numbers::pi).epsilon(0.01));
  CHECK(symmetric_difference_volume(disk, disk) == 0.0);
}

TEST_CASE("renormalisation") {
  const std::vector<double> lo{-0.5, -0.5}, hi{0.5, 0.5};
  const ShapeMask unit = box_shape(2, 0.01, lo, hi);
  CHECK(renormalize(unit, 1.0).volume() == doctest::Approx(1.0).epsilon(0.03));
  const std::vector<double> lo8{-1.0, -2.0}, hi8{1.0, 2.0};
  const ShapeMask eight = box_shape(2, 0.01, lo8, hi8);
  CHECK(renormalize(eight, 1.0).volume() == doctest::Approx(1.0).epsilon(0.03));
  CHECK(renormalize(eight, 0.25).volume() * 0.25 == doctest::Approx(1.0).epsilon(0.03));
  CHECK_THROWS_AS(renormalize(eight, 0.0), std::invalid_argument);
}

TEST_CASE("fattening") {
  const std::vector<Site> one{{3, 4}};
  CHECK(fatten(one, 0, 0.25).volume() == doctest::Approx(1.0));
  CHECK(fatten(one, 2, 0.25).volume() == doctest::Approx(25.0));
  const std::vector<Site> two{{0, 0}, {0, 1}};
  const double v = fatten(two, 1, 0.25).volume();
  CHECK(v < 18.0);
  CHECK(v == doctest::Approx(12.0));
  CHECK(default_fattening(1) == 0);
  CHECK(default_fattening(10) == 6);
}

TEST_CASE("empty diagnostic") {
  const LatticeBox box = LatticeBox::with_sides({4, 4});
  PointField none{box, 2, PointVariant::kPlain, Finiteness::kAvoidsBoundary, std::vector<std::uint8_t>(16, 0), 0};
  const ShapeMask w = ball_shape(2, 0.125, 1.0);
  const ShapeDiagnostic d = symmetric_difference_stat(none, {}, w, 2, 0, 0.01);
  CHECK(d.volume == 0.0);
  CHECK_FALSE(d.indicator);
}

TEST_CASE("clusters built from the shape raster cancel") {
  // with cluster_scale = h, the unit cell of site y maps exactly onto raster cell y
  const double h = 0.0625;
  const LatticeBox box(Site{-40, -40}, {81, 81});
  const ShapeMask w = ball_shape(2, h, 1.0);
  std::vector<Site> cluster;
  for (const Cell& c : w.cells()) cluster.push_back(Site{c[0], c[1]});
  PointField centres{box, 1, PointVariant::kPlain, Finiteness::kAvoidsBoundary,
                     std::vector<std::uint8_t>(box.num_sites(), 0), 0};
  centres.x[*box.index_of(Site{0, 0})] = 1;
  const std::vector<std::vector<Site>> clusters{cluster};
  const ShapeDiagnostic d = symmetric_difference_stat(centres, clusters, w, 16, 0, 1e-6, h);
  CHECK(d.volume == 0.0);
  CHECK_FALSE(d.indicator);
}

TEST_CASE("disjoint supports add") {
  const double h = 0.125;
  const LatticeBox box = LatticeBox::with_sides({40, 40});
  const ShapeMask w = ball_shape(2, h, 0.5);
  PointField centres{box, 1, PointVariant::kPlain, Finiteness::kAvoidsBoundary,
                     std::vector<std::uint8_t>(box.num_sites(), 0), 0};
  centres.x[*box.index_of(Site{2, 2})] = 1;
  const std::vector<std::vector<Site>> clusters{{Site{30, 30}}};
  const ShapeDiagnostic d = symmetric_difference_stat(centres, clusters, w, 1, 0, 0.1, 1.0);
  CHECK(d.volume == doctest::Approx(w.volume() + 1.0));
}

TEST_CASE("empirical shape of identical translates") {
  const LatticeBox box = LatticeBox::with_sides({12, 12});
  BondConfig omega(box);
  auto open = [&](Site a, Site b) { omega.set(*box.bond_between(*box.index_of(a), *box.index_of(b)), true); };
  open({2, 2}, {2, 3});
  open({2, 3}, {2, 4});
  open({7, 6}, {7, 7});
  open({7, 7}, {7, 8});
  const std::vector<ClusterSet> samples{label_clusters(omega)};
  const ShapeMask m = empirical_shape(samples, 3, Finiteness::kAvoidsBoundary, 0.125);
  CHECK(m.volume() > 0.0);
  CHECK(m.extent()[0] < m.extent()[1]);  // segment along the second axis
  CHECK_THROWS_AS(empirical_shape(samples, 4, Finiteness::kAvoidsBoundary, 0.125), std::invalid_argument);
}

TEST_CASE("shape file round trip") {
  const ShapeMask disk = ball_shape(2, 0.1, 0.7);
  std::stringstream ss;
  write_shape(ss, disk);
  CHECK(read_shape(ss) == disk);
  std::stringstream bad("SHAPEMASK 2\n");
  CHECK_THROWS(read_shape(bad));
}
