#include "fkpoisson/fk.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>
#include <type_traits>

#include "fkpoisson/union_find.hpp"

namespace fkp {

BoundaryCondition BoundaryCondition::free_bc() { return {}; }

BoundaryCondition BoundaryCondition::wired() {
  BoundaryCondition bc;
  bc.kind_ = Kind::kWired;
  return bc;
}

BoundaryCondition BoundaryCondition::partition(std::vector<std::vector<Site>> classes) {
  BoundaryCondition bc;
  bc.kind_ = Kind::kPartition;
  for (auto& c : classes) std::sort(c.begin(), c.end());
  std::sort(classes.begin(), classes.end());
  bc.classes_ = std::move(classes);
  return bc;
}

BoundaryCondition BoundaryCondition::partial_partition(const LatticeBox& box,
                                                       std::vector<std::vector<Site>> classes) {
  std::set<Site> listed;
  for (const auto& c : classes) listed.insert(c.begin(), c.end());
  for (const Site& s : boundary(box)) {
    if (!listed.contains(s)) classes.push_back({s});
  }
  return partition(std::move(classes));
}

std::string BoundaryCondition::tag() const {
  switch (kind_) {
    case Kind::kFree:
      return "free";
    case Kind::kWired:
      return "wired";
    case Kind::kPartition:
      return "partition";
  }
  return "free";
}

ResolvedBoundary resolve(const BoundaryCondition& bc, const LatticeBox& box) {
  ResolvedBoundary rb;
  rb.class_of.assign(box.num_sites(), -1);
  switch (bc.kind()) {
    case BoundaryCondition::Kind::kFree:
      break;
    case BoundaryCondition::Kind::kWired: {
      auto b = box.boundary_indices();
      if (b.size() > 1) {
        rb.members.emplace_back(b.begin(), b.end());
        for (std::size_t s : b) rb.class_of[s] = 0;
      }
      break;
    }
    case BoundaryCondition::Kind::kPartition: {
      std::vector<std::uint8_t> seen(box.num_sites(), 0);
      std::size_t covered = 0;
      for (const auto& cls : bc.classes()) {
        if (cls.empty()) throw std::invalid_argument("boundary partition has an empty class");
        std::vector<std::size_t> idx;
        for (const Site& s : cls) {
          auto i = box.index_of(s);
          if (!i || !box.is_boundary(*i)) {
            throw std::invalid_argument("boundary partition site " + s.str() +
                                        " is not a boundary site of the box");
          }
          if (seen[*i]) {
            throw std::invalid_argument("boundary partition classes overlap at " + s.str());
          }
          seen[*i] = 1;
          ++covered;
          idx.push_back(*i);
        }
        if (idx.size() > 1) {
          const int id = static_cast<int>(rb.members.size());
          for (std::size_t i : idx) rb.class_of[i] = id;
          rb.members.push_back(std::move(idx));
        }
      }
      if (covered != box.boundary_indices().size()) {
        throw std::invalid_argument("boundary partition does not cover the box boundary");
      }
      break;
    }
  }
  return rb;
}

void FKParams::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  if (!(q >= 1.0) || !std::isfinite(q)) throw std::invalid_argument("q must be a finite real >= 1");
}

bool FKParams::integer_q() const { return q == std::floor(q) && q >= 1.0; }

BondConfig::BondConfig(LatticeBox box, bool all_open)
    : box_(std::move(box)), state_(box_.num_bonds(), all_open ? 1 : 0) {}

BondConfig::BondConfig(LatticeBox box, std::vector<std::uint8_t> state)
    : box_(std::move(box)), state_(std::move(state)) {
  if (state_.size() != box_.num_bonds()) {
    throw std::invalid_argument("bond state length does not match the box");
  }
  for (auto& b : state_) b = b ? 1 : 0;
}

BondConfig BondConfig::from_mask(LatticeBox box, std::uint64_t mask) {
  if (box.num_bonds() > 64) throw std::invalid_argument("from_mask needs at most 64 bonds");
  BondConfig c(std::move(box));
  for (std::size_t e = 0; e < c.size(); ++e) c.state_[e] = (mask >> e) & 1U;
  return c;
}

std::size_t BondConfig::num_open() const {
  return static_cast<std::size_t>(std::count(state_.begin(), state_.end(), 1));
}

std::uint64_t BondConfig::mask() const {
  if (state_.size() > 64) throw std::invalid_argument("mask() needs at most 64 bonds");
  std::uint64_t m = 0;
  for (std::size_t e = 0; e < state_.size(); ++e) m |= std::uint64_t{state_[e]} << e;
  return m;
}

namespace {

DisjointSets pi_components(const BondConfig& omega, const ResolvedBoundary& rb) {
  const LatticeBox& box = omega.box();
  DisjointSets ds(box.num_sites());
  auto bonds = box.bonds();
  for (std::size_t e = 0; e < bonds.size(); ++e) {
    if (omega.open(e)) ds.unite(bonds[e].lo, bonds[e].hi);
  }
  for (const auto& cls : rb.members) {
    for (std::size_t i = 1; i < cls.size(); ++i) ds.unite(cls[0], cls[i]);
  }
  return ds;
}

}  // namespace

std::size_t cluster_count(const BondConfig& omega, const ResolvedBoundary& rb) {
  DisjointSets ds = pi_components(omega, rb);
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) count += ds.find(i) == i;
  return count;
}

std::size_t cluster_count(const BondConfig& omega, const BoundaryCondition& bc) {
  return cluster_count(omega, resolve(bc, omega.box()));
}

double log_weight(const BondConfig& omega, const FKParams& params) {
  params.validate();
  const std::size_t open = omega.num_open();
  const std::size_t closed = omega.size() - open;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double lw = 0.0;
  if (open > 0) {
    if (params.p == 0.0) return kNegInf;
    lw += static_cast<double>(open) * std::log(params.p);
  }
  if (closed > 0) {
    if (params.p == 1.0) return kNegInf;
    lw += static_cast<double>(closed) * std::log1p(-params.p);
  }
  if (params.q != 1.0) {
    lw += static_cast<double>(cluster_count(omega, params.boundary)) * std::log(params.q);
  }
  return lw;
}

double weight(const BondConfig& omega, const FKParams& params) {
  return std::exp(log_weight(omega, params));
}

bool connected_off(const BondConfig& omega, const ResolvedBoundary& rb, std::size_t bond) {
  const LatticeBox& box = omega.box();
  const Bond& target = box.bonds()[bond];
  const std::size_t src = target.lo;
  const std::size_t dst = target.hi;
  std::vector<std::uint8_t> seen(box.num_sites(), 0);
  std::vector<std::uint8_t> class_seen(rb.members.size(), 0);
  std::vector<std::size_t> stack{src};
  seen[src] = 1;
  auto visit = [&](std::size_t s) {
    if (!seen[s]) {
      seen[s] = 1;
      stack.push_back(s);
    }
  };
  while (!stack.empty()) {
    const std::size_t s = stack.back();
    stack.pop_back();
    if (s == dst) return true;
    for (const Incidence& inc : box.incident(s)) {
      if (inc.bond != bond && omega.open(inc.bond)) visit(inc.neighbor);
    }
    const int c = rb.class_of[s];
    if (c >= 0 && !class_seen[c]) {
      class_seen[c] = 1;
      for (std::size_t m : rb.members[c]) visit(m);
    }
  }
  return false;
}

double heatbath_open_probability(const BondConfig& omega, const FKParams& params,
                                 const ResolvedBoundary& rb, std::size_t bond) {
  const double p = params.p;
  if (params.q == 1.0 || connected_off(omega, rb, bond)) return p;
  return p / (p + params.q * (1.0 - p));
}

BondConfig heatbath_step(const BondConfig& omega, const FKParams& params, std::size_t bond,
                         double u) {
  params.validate();
  if (bond >= omega.size()) throw std::out_of_range("heatbath_step: bond not in the box");
  const ResolvedBoundary rb = resolve(params.boundary, omega.box());
  BondConfig out = omega;
  out.set(bond, u < heatbath_open_probability(omega, params, rb, bond));
  return out;
}

namespace {

void rebond(BondConfig& omega, const FKParams& params, const ResolvedBoundary& rb, Rng& rng,
            std::vector<std::size_t>& color) {
  const LatticeBox& box = omega.box();
  DisjointSets ds = pi_components(omega, rb);
  const auto q = static_cast<std::uint64_t>(params.q);
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  color.assign(box.num_sites(), kUnset);
  // Colours are drawn per component in order of first appearance, which
  // fixes the random stream for a given configuration.
  for (std::size_t i = 0; i < box.num_sites(); ++i) {
    const std::size_t r = ds.find(i);
    if (color[r] == kUnset) color[r] = q == 1 ? 0 : rng.uniform_int(q);
    color[i] = color[r];
  }
  auto bonds = box.bonds();
  for (std::size_t e = 0; e < bonds.size(); ++e) {
    const bool same = color[bonds[e].lo] == color[bonds[e].hi];
    omega.set(e, same && rng.uniform() < params.p);
  }
}

}  // namespace

BondConfig swendsen_wang_step(const BondConfig& omega, const FKParams& params, Rng& rng) {
  params.validate();
  if (!params.integer_q()) {
    throw std::invalid_argument(
        "swendsen_wang_step needs integer q; use heatbath_step for real q");
  }
  const ResolvedBoundary rb = resolve(params.boundary, omega.box());
  BondConfig out = omega;
  std::vector<std::size_t> color;
  rebond(out, params, rb, rng, color);
  return out;
}

FKSampler::FKSampler(LatticeBox box, FKParams params, std::uint64_t seed)
    : params_(std::move(params)), state_(box, true), rng_(seed) {
  params_.validate();
  resolved_ = resolve(params_.boundary, box);
  cluster_sweeps_ = params_.integer_q();
}

void FKSampler::cluster_sweep() { rebond(state_, params_, resolved_, rng_, color_); }

void FKSampler::heatbath_sweep() {
  for (std::size_t e = 0; e < state_.size(); ++e) {
    const double u = rng_.uniform();
    state_.set(e, u < heatbath_open_probability(state_, params_, resolved_, e));
  }
}

void FKSampler::sweep() {
  if (cluster_sweeps_) {
    cluster_sweep();
  } else {
    heatbath_sweep();
  }
  ++sweeps_;
}

void FKSampler::run(std::size_t sweeps) {
  for (std::size_t i = 0; i < sweeps; ++i) sweep();
}

BondConfig sample(const FKParams& params, const LatticeBox& box, std::size_t sweeps,
                  std::uint64_t seed) {
  if (sweeps < 1) throw std::invalid_argument("sample needs at least one sweep");
  FKSampler s(box, params, seed);
  s.run(sweeps);
  return s.state();
}

std::size_t default_burn_in(const LatticeBox& box) { return 10 * box.num_sites(); }

double finite_energy_floor(const FKParams& params) {
  params.validate();
  const double p = params.p;
  if (p <= 0.0 || p >= 1.0) {
    throw std::domain_error("finite-energy floor needs 0 < p < 1");
  }
  return std::min(p, 1.0 - p) / (std::max(p, 1.0 - p) * params.q);
}

// ---- serialization ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'F', 'K', 'C', 'F'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_integral_v<T>);
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    os.put(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  static_assert(sizeof bits == sizeof v);
  std::memcpy(&bits, &v, sizeof v);
  put_le(os, bits);
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) {
      throw std::runtime_error("truncated configuration record");
    }
    u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(c)) << (8 * i));
  }
  return static_cast<T>(u);
}

double get_f64(std::istream& is) {
  const auto bits = get_le<std::uint64_t>(is);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

void write_config(std::ostream& os, const SerializedConfig& rec) {
  const LatticeBox& box = rec.config.box();
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kFormatVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(box.dim()));
  for (int a = 0; a < box.dim(); ++a) put_le<std::int32_t>(os, box.lower()[a]);
  for (int s : box.sides()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s));
  put_f64(os, rec.params.p);
  put_f64(os, rec.params.q);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(rec.params.boundary.kind()));
  if (rec.params.boundary.kind() == BoundaryCondition::Kind::kPartition) {
    const auto& classes = rec.params.boundary.classes();
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(classes.size()));
    for (const auto& cls : classes) {
      put_le<std::uint32_t>(os, static_cast<std::uint32_t>(cls.size()));
      for (const Site& s : cls) {
        auto idx = box.index_of(s);
        if (!idx) throw std::invalid_argument("partition site outside the box");
        put_le<std::uint64_t>(os, *idx);
      }
    }
  }
  put_le<std::uint64_t>(os, rec.seed);
  put_le<std::uint64_t>(os, rec.sweep);
  put_le<std::uint64_t>(os, rec.config.size());
  auto bits = rec.config.bits();
  for (std::size_t byte = 0; byte < (bits.size() + 7) / 8; ++byte) {
    std::uint8_t b = 0;
    for (std::size_t k = 0; k < 8 && byte * 8 + k < bits.size(); ++k) {
      b |= static_cast<std::uint8_t>(bits[byte * 8 + k] << k);
    }
    put_le<std::uint8_t>(os, b);
  }
}

SerializedConfig read_config(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw std::runtime_error("not a bond configuration record");
  }
  if (get_le<std::uint32_t>(is) != kFormatVersion) {
    throw std::runtime_error("unsupported configuration format version");
  }
  const auto d = get_le<std::uint32_t>(is);
  if (d < 2 || d > static_cast<std::uint32_t>(kMaxDim)) {
    throw std::runtime_error("bad dimension in configuration record");
  }
  std::vector<int> lower(d), sides(d);
  for (auto& l : lower) l = get_le<std::int32_t>(is);
  for (auto& s : sides) s = static_cast<int>(get_le<std::uint32_t>(is));
  LatticeBox box(Site(std::span<const int>(lower)), sides);

  SerializedConfig rec;
  rec.params.p = get_f64(is);
  rec.params.q = get_f64(is);
  const auto kind = get_le<std::uint8_t>(is);
  switch (kind) {
    case 0:
      rec.params.boundary = BoundaryCondition::free_bc();
      break;
    case 1:
      rec.params.boundary = BoundaryCondition::wired();
      break;
    case 2: {
      std::vector<std::vector<Site>> classes(get_le<std::uint32_t>(is));
      for (auto& cls : classes) {
        const auto n = get_le<std::uint32_t>(is);
        for (std::uint32_t k = 0; k < n; ++k) {
          const auto idx = get_le<std::uint64_t>(is);
          if (idx >= box.num_sites()) throw std::runtime_error("partition site out of range");
          cls.push_back(box.site(idx));
        }
      }
      rec.params.boundary = BoundaryCondition::partition(std::move(classes));
      break;
    }
    default:
      throw std::runtime_error("unknown boundary tag in configuration record");
  }
  rec.seed = get_le<std::uint64_t>(is);
  rec.sweep = get_le<std::uint64_t>(is);
  const auto nbonds = get_le<std::uint64_t>(is);
  if (nbonds != box.num_bonds()) throw std::runtime_error("bond count does not match the box");
  std::vector<std::uint8_t> state(nbonds, 0);
  for (std::size_t byte = 0; byte < (nbonds + 7) / 8; ++byte) {
    const auto b = get_le<std::uint8_t>(is);
    for (std::size_t k = 0; k < 8 && byte * 8 + k < nbonds; ++k) state[byte * 8 + k] = (b >> k) & 1U;
  }
  rec.config = BondConfig(std::move(box), std::move(state));
  return rec;
}

}  // namespace fkp
