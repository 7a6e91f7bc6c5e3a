#include "fkpoisson/lattice.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fkp {

Site::Site(std::initializer_list<int> coords)
    : Site(std::span<const int>(coords.begin(), coords.size())) {}

Site::Site(std::span<const int> coords) {
  if (coords.size() < 1 || coords.size() > static_cast<std::size_t>(kMaxDim)) {
    throw std::invalid_argument("site dimension must be in [1, " +
                                std::to_string(kMaxDim) + "]");
  }
  dim_ = static_cast<int>(coords.size());
  std::copy(coords.begin(), coords.end(), c_.begin());
}

Site Site::zeros(int dim) {
  std::array<int, kMaxDim> z{};
  return Site(std::span<const int>(z.data(), static_cast<std::size_t>(dim)));
}

Site Site::operator+(const Site& o) const {
  Site r = *this;
  for (int i = 0; i < dim_; ++i) r.c_[i] += o.c_[i];
  return r;
}

Site Site::operator-(const Site& o) const {
  Site r = *this;
  for (int i = 0; i < dim_; ++i) r.c_[i] -= o.c_[i];
  return r;
}

std::string Site::str() const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim_; ++i) os << (i ? "," : "") << c_[i];
  os << ')';
  return os.str();
}

std::size_t SiteHash::operator()(const Site& s) const noexcept {
  std::size_t h = static_cast<std::size_t>(s.dim());
  for (int i = 0; i < s.dim(); ++i) {
    h ^= std::hash<int>{}(s[i]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

int l1_distance(const Site& a, const Site& b) {
  int d = 0;
  for (int i = 0; i < a.dim(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

int linf_distance(const Site& a, const Site& b) {
  int d = 0;
  for (int i = 0; i < a.dim(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct LatticeBox::Topology {
  Site lower;
  std::vector<int> sides;
  std::vector<std::size_t> strides;
  std::size_t num_sites = 0;
  std::vector<Bond> bonds;
  // bond id of the +e_a bond at each site, or npos.
  std::vector<std::size_t> forward_bond;
  std::vector<std::size_t> incidence_offset;
  std::vector<Incidence> incidence;
  std::vector<std::uint8_t> on_boundary;
  std::vector<std::size_t> boundary;
};

namespace {
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
}

LatticeBox::LatticeBox(Site lower, std::vector<int> sides) {
  if (sides.size() < 2 || sides.size() > static_cast<std::size_t>(kMaxDim)) {
    throw std::invalid_argument("box dimension must be in [2, " +
                                std::to_string(kMaxDim) + "]");
  }
  if (lower.dim() != static_cast<int>(sides.size())) {
    throw std::invalid_argument("lower corner dimension does not match sides");
  }
  for (int s : sides) {
    if (s < 0) throw std::invalid_argument("box sides must be nonnegative");
  }
  auto t = std::make_shared<Topology>();
  const int d = static_cast<int>(sides.size());
  t->lower = lower;
  t->sides = std::move(sides);
  t->strides.assign(d, 1);
  for (int a = d - 2; a >= 0; --a) t->strides[a] = t->strides[a + 1] * t->sides[a + 1];
  t->num_sites = 1;
  for (int s : t->sides) t->num_sites *= static_cast<std::size_t>(s);

  const std::size_t n = t->num_sites;
  t->forward_bond.assign(n * d, kNone);
  t->on_boundary.assign(n, 0);
  std::vector<int> coord(d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rem = i;
    for (int a = 0; a < d; ++a) {
      coord[a] = static_cast<int>(rem / t->strides[a]);
      rem %= t->strides[a];
    }
    for (int a = 0; a < d; ++a) {
      if (coord[a] == 0 || coord[a] == t->sides[a] - 1) t->on_boundary[i] = 1;
      if (coord[a] + 1 < t->sides[a]) {
        t->forward_bond[i * d + a] = t->bonds.size();
        t->bonds.push_back(Bond{i, i + t->strides[a], a});
      }
    }
    if (t->on_boundary[i]) t->boundary.push_back(i);
  }

  std::vector<std::size_t> degree(n, 0);
  for (const Bond& b : t->bonds) {
    ++degree[b.lo];
    ++degree[b.hi];
  }
  t->incidence_offset.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) t->incidence_offset[i + 1] = t->incidence_offset[i] + degree[i];
  t->incidence.resize(t->incidence_offset[n]);
  std::vector<std::size_t> fill(t->incidence_offset.begin(), t->incidence_offset.end() - 1);
  for (std::size_t e = 0; e < t->bonds.size(); ++e) {
    const Bond& b = t->bonds[e];
    t->incidence[fill[b.lo]++] = Incidence{e, b.hi};
    t->incidence[fill[b.hi]++] = Incidence{e, b.lo};
  }
  topo_ = std::move(t);
}

LatticeBox LatticeBox::with_sides(std::vector<int> sides) {
  Site lower = Site::zeros(static_cast<int>(sides.size()));
  return LatticeBox(lower, std::move(sides));
}

int LatticeBox::dim() const { return static_cast<int>(topo_->sides.size()); }
const Site& LatticeBox::lower() const { return topo_->lower; }
const std::vector<int>& LatticeBox::sides() const { return topo_->sides; }
std::size_t LatticeBox::num_sites() const { return topo_ ? topo_->num_sites : 0; }
std::size_t LatticeBox::num_bonds() const { return topo_ ? topo_->bonds.size() : 0; }

Site LatticeBox::site(std::size_t index) const {
  Site s = topo_->lower;
  for (int a = 0; a < dim(); ++a) {
    s[a] += static_cast<int>(index / topo_->strides[a]);
    index %= topo_->strides[a];
  }
  return s;
}

std::optional<std::size_t> LatticeBox::index_of(const Site& s) const {
  if (!topo_ || s.dim() != dim()) return std::nullopt;
  std::size_t idx = 0;
  for (int a = 0; a < dim(); ++a) {
    const int off = s[a] - topo_->lower[a];
    if (off < 0 || off >= topo_->sides[a]) return std::nullopt;
    idx += static_cast<std::size_t>(off) * topo_->strides[a];
  }
  return idx;
}

bool LatticeBox::contains(const Site& s) const { return index_of(s).has_value(); }

std::span<const Bond> LatticeBox::bonds() const {
  if (!topo_) return {};
  return topo_->bonds;
}

std::pair<Site, Site> LatticeBox::bond_sites(std::size_t bond) const {
  const Bond& b = topo_->bonds.at(bond);
  return {site(b.lo), site(b.hi)};
}

std::optional<std::size_t> LatticeBox::bond_between(std::size_t a, std::size_t b) const {
  if (a > b) std::swap(a, b);
  const std::size_t diff = b - a;
  for (int ax = 0; ax < dim(); ++ax) {
    if (diff != topo_->strides[ax]) continue;
    const std::size_t e = topo_->forward_bond[a * dim() + ax];
    if (e != kNone && topo_->bonds[e].hi == b) return e;
  }
  return std::nullopt;
}

std::span<const Incidence> LatticeBox::incident(std::size_t site) const {
  const auto begin = topo_->incidence_offset[site];
  const auto end = topo_->incidence_offset[site + 1];
  return std::span<const Incidence>(topo_->incidence.data() + begin, end - begin);
}

bool LatticeBox::is_boundary(std::size_t site) const { return topo_->on_boundary[site] != 0; }

std::span<const std::size_t> LatticeBox::boundary_indices() const {
  if (!topo_) return {};
  return topo_->boundary;
}

Site LatticeBox::center() const {
  Site c = topo_->lower;
  for (int a = 0; a < dim(); ++a) c[a] += (topo_->sides[a] - 1) / 2;
  return c;
}

bool operator==(const LatticeBox& a, const LatticeBox& b) {
  if (a.topo_ == b.topo_) return true;
  if (!a.topo_ || !b.topo_) return a.num_sites() == 0 && b.num_sites() == 0;
  return a.topo_->lower == b.topo_->lower && a.topo_->sides == b.topo_->sides;
}

std::vector<Bond> bonds_of(const LatticeBox& box) {
  auto span = box.bonds();
  return {span.begin(), span.end()};
}

std::vector<Site> boundary(const LatticeBox& box) {
  std::vector<Site> out;
  for (std::size_t i : box.boundary_indices()) out.push_back(box.site(i));
  return out;
}

std::vector<Site> star_neighbors(const Site& x) {
  const int d = x.dim();
  std::vector<Site> out;
  std::array<int, kMaxDim> off{};
  off.fill(-1);
  while (true) {
    bool zero = true;
    Site y = x;
    for (int a = 0; a < d; ++a) {
      y[a] += off[a];
      zero = zero && off[a] == 0;
    }
    if (!zero) out.push_back(y);
    int a = d - 1;
    while (a >= 0 && off[a] == 1) off[a--] = -1;
    if (a < 0) break;
    ++off[a];
  }
  return out;
}

std::vector<Site> nearest_neighbors(const Site& x) {
  std::vector<Site> out;
  for (int a = 0; a < x.dim(); ++a) {
    for (int s : {-1, 1}) {
      Site y = x;
      y[a] += s;
      out.push_back(y);
    }
  }
  return out;
}

int set_distance(std::span<const Site> a, std::span<const Site> b) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("set_distance: infimum over an empty set is undefined");
  }
  int best = std::numeric_limits<int>::max();
  for (const Site& x : a) {
    for (const Site& y : b) best = std::min(best, l1_distance(x, y));
  }
  return best;
}

std::strong_ordering pair_order(const SitePair& a, const SitePair& b) {
  const int la = l1_distance(a.first, a.second);
  const int lb = l1_distance(b.first, b.second);
  if (la != lb) return la <=> lb;
  if (auto c = a.first <=> b.first; c != 0) return c;
  return a.second <=> b.second;
}

SitePair canonical_pair(const Site& u, const Site& v) {
  return u <= v ? SitePair{u, v} : SitePair{v, u};
}

}  // namespace fkp
