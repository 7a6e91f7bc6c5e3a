#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fkpoisson/lattice.hpp"
#include "fkpoisson/rng.hpp"

namespace fkp {

/// Free, wired, or an explicit partition of the box boundary.
class BoundaryCondition {
 public:
  enum class Kind { kFree, kWired, kPartition };

  static BoundaryCondition free_bc();
  static BoundaryCondition wired();
  /// Classes must be disjoint, nonempty, and cover the boundary of the box
  /// the condition is later resolved against.
  static BoundaryCondition partition(std::vector<std::vector<Site>> classes);
  /// Like partition(), but boundary sites not listed become singletons.
  static BoundaryCondition partial_partition(const LatticeBox& box,
                                             std::vector<std::vector<Site>> classes);

  Kind kind() const { return kind_; }
  const std::vector<std::vector<Site>>& classes() const { return classes_; }
  std::string tag() const;

  friend bool operator==(const BoundaryCondition&, const BoundaryCondition&) = default;

 private:
  Kind kind_ = Kind::kFree;
  std::vector<std::vector<Site>> classes_;
};

/// Boundary condition bound to a box: the non-trivial classes as lists of
/// linear site indices (singleton classes are dropped).
struct ResolvedBoundary {
  std::vector<int> class_of;  // per site, -1 when not in a multi-site class
  std::vector<std::vector<std::size_t>> members;
};

/// Throws std::invalid_argument if the condition is not a partition of the
/// boundary of `box`.
ResolvedBoundary resolve(const BoundaryCondition& bc, const LatticeBox& box);

struct FKParams {
  double p = 0.5;
  double q = 1.0;
  BoundaryCondition boundary = BoundaryCondition::free_bc();

  /// Throws std::invalid_argument unless p in [0,1] and q >= 1.
  void validate() const;
  bool integer_q() const;
};

/// One bit per bond of a box, in bonds_of() order.
class BondConfig {
 public:
  BondConfig() = default;
  explicit BondConfig(LatticeBox box, bool all_open = false);
  BondConfig(LatticeBox box, std::vector<std::uint8_t> state);
  /// Bit i of `mask` is bond i; requires at most 64 bonds.
  static BondConfig from_mask(LatticeBox box, std::uint64_t mask);

  const LatticeBox& box() const { return box_; }
  std::size_t size() const { return state_.size(); }
  bool open(std::size_t bond) const { return state_[bond] != 0; }
  void set(std::size_t bond, bool open) { state_[bond] = open ? 1 : 0; }
  std::size_t num_open() const;
  std::span<const std::uint8_t> bits() const { return state_; }
  std::uint64_t mask() const;

  friend bool operator==(const BondConfig& a, const BondConfig& b) {
    return a.box_ == b.box_ && a.state_ == b.state_;
  }

 private:
  LatticeBox box_;
  std::vector<std::uint8_t> state_;
};

/// Number of pi-clusters: components under open bonds plus the virtual
/// identification of each boundary class.
std::size_t cluster_count(const BondConfig& omega, const BoundaryCondition& bc);
std::size_t cluster_count(const BondConfig& omega, const ResolvedBoundary& rb);

/// log of prod_e p^w(e) (1-p)^(1-w(e)) * q^cl_pi(omega); -inf when p in {0,1}
/// forbids a bond state present in omega.
double log_weight(const BondConfig& omega, const FKParams& params);
double weight(const BondConfig& omega, const FKParams& params);

/// True when the endpoints of `bond` are joined by open bonds other than
/// `bond` itself, counting boundary identifications.
bool connected_off(const BondConfig& omega, const ResolvedBoundary& rb, std::size_t bond);

/// Probability that `bond` is open given every other bond.
double heatbath_open_probability(const BondConfig& omega, const FKParams& params,
                                 const ResolvedBoundary& rb, std::size_t bond);

/// Resample one bond from its exact conditional law; opens iff u < P(open).
BondConfig heatbath_step(const BondConfig& omega, const FKParams& params, std::size_t bond,
                         double u);

/// One colour-then-rebond sweep of the joint (Edwards-Sokal) representation.
/// Throws std::invalid_argument for non-integer q (use heatbath_step).
BondConfig swendsen_wang_step(const BondConfig& omega, const FKParams& params, Rng& rng);

/// Markov chain on a box started from the all-open configuration. Integer q
/// uses cluster sweeps, other q a systematic heat-bath scan of all bonds.
class FKSampler {
 public:
  FKSampler(LatticeBox box, FKParams params, std::uint64_t seed);

  void sweep();
  void run(std::size_t sweeps);
  const BondConfig& state() const { return state_; }
  const FKParams& params() const { return params_; }
  std::uint64_t sweeps_done() const { return sweeps_; }
  bool uses_cluster_sweeps() const { return cluster_sweeps_; }

 private:
  void cluster_sweep();
  void heatbath_sweep();

  FKParams params_;
  ResolvedBoundary resolved_;
  BondConfig state_;
  Rng rng_;
  std::uint64_t sweeps_ = 0;
  bool cluster_sweeps_ = false;
  std::vector<std::size_t> color_;
};

/// Deterministic in (params, box, sweeps, seed).
BondConfig sample(const FKParams& params, const LatticeBox& box, std::size_t sweeps,
                  std::uint64_t seed);

/// Documented burn-in default: 10 sweeps per site.
std::size_t default_burn_in(const LatticeBox& box);

/// delta = min(p, 1-p) / (max(p, 1-p) q): a lower bound on the weight ratio
/// of any two configurations differing in one bond. Throws std::domain_error
/// for p in {0, 1}.
double finite_energy_floor(const FKParams& params);

struct SerializedConfig {
  BondConfig config;
  FKParams params;
  std::uint64_t seed = 0;
  std::uint64_t sweep = 0;
};

/// Binary layout (little-endian), see README "Configuration files".
void write_config(std::ostream& os, const SerializedConfig& rec);
SerializedConfig read_config(std::istream& is);

}  // namespace fkp
