#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fkp {

inline constexpr int kMaxDim = 4;

/// A site of Z^d, 2 <= d <= kMaxDim. Comparison is lexicographic on the
/// coordinates (sites of different dimension compare by dimension last).
class Site {
 public:
  Site() = default;
  Site(std::initializer_list<int> coords);
  explicit Site(std::span<const int> coords);
  static Site zeros(int dim);

  int dim() const { return dim_; }
  int operator[](int axis) const { return c_[axis]; }
  int& operator[](int axis) { return c_[axis]; }

  Site operator+(const Site& o) const;
  Site operator-(const Site& o) const;

  friend auto operator<=>(const Site&, const Site&) = default;
  friend bool operator==(const Site&, const Site&) = default;

  std::string str() const;

 private:
  std::array<int, kMaxDim> c_{};
  int dim_ = 0;
};

struct SiteHash {
  std::size_t operator()(const Site& s) const noexcept;
};

int l1_distance(const Site& a, const Site& b);
int linf_distance(const Site& a, const Site& b);

/// Nearest-neighbour bond stored by linear site indices of its box; lo < hi.
struct Bond {
  std::size_t lo = 0;
  std::size_t hi = 0;
  int axis = 0;
  friend bool operator==(const Bond&, const Bond&) = default;
};

struct Incidence {
  std::size_t bond;
  std::size_t neighbor;
};

/// A rectangular box of Z^d with precomputed topology.
///
/// Sites are linearized row-major (the last axis varies fastest). Bonds are
/// ordered site-major: for each site in linear order, for each axis a in
/// increasing order, the bond to the +e_a neighbour if it lies in the box.
/// That order is the bit order of serialized configurations.
///
/// Copies share the immutable topology, so boxes are cheap to pass by value.
class LatticeBox {
 public:
  LatticeBox() = default;
  LatticeBox(Site lower, std::vector<int> sides);
  /// Box with lower corner at the origin.
  static LatticeBox with_sides(std::vector<int> sides);

  int dim() const;
  const Site& lower() const;
  const std::vector<int>& sides() const;
  std::size_t num_sites() const;
  std::size_t num_bonds() const;
  bool empty() const { return num_sites() == 0; }

  Site site(std::size_t index) const;
  std::optional<std::size_t> index_of(const Site& s) const;
  bool contains(const Site& s) const;

  std::span<const Bond> bonds() const;
  std::pair<Site, Site> bond_sites(std::size_t bond) const;
  std::optional<std::size_t> bond_between(std::size_t a, std::size_t b) const;
  std::span<const Incidence> incident(std::size_t site) const;

  bool is_boundary(std::size_t site) const;
  std::span<const std::size_t> boundary_indices() const;

  /// Site nearest the geometric centre (lower + (side-1)/2 per axis).
  Site center() const;

  friend bool operator==(const LatticeBox& a, const LatticeBox& b);

 private:
  struct Topology;
  std::shared_ptr<const Topology> topo_;
};

std::vector<Bond> bonds_of(const LatticeBox& box);

/// Sites with a nearest neighbour outside the box, in lexicographic order.
std::vector<Site> boundary(const LatticeBox& box);

/// All y with max_i |x_i - y_i| == 1 (3^d - 1 sites).
std::vector<Site> star_neighbors(const Site& x);

/// The 2d nearest neighbours of x.
std::vector<Site> nearest_neighbors(const Site& x);

/// min |x - y|_1 over x in a, y in b. Throws std::invalid_argument when
/// either set is empty.
int set_distance(std::span<const Site> a, std::span<const Site> b);

using SitePair = std::pair<Site, Site>;

/// Deterministic total order on pairs of sites: L1 length first, then
/// lexicographic on (u_1..u_d, v_1..v_d).
std::strong_ordering pair_order(const SitePair& a, const SitePair& b);

/// Canonical form of an unordered pair: lexicographically smaller site first.
SitePair canonical_pair(const Site& u, const Site& v);

}  // namespace fkp
