#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fkpoisson/census.hpp"
#include "fkpoisson/fk.hpp"
#include "fkpoisson/lattice.hpp"

namespace fkp {

/// Site colours of a pair of configurations on the same box. A site is
/// white when every incident bond inside the box is open in both.
struct Coloring {
  LatticeBox box;
  std::vector<std::uint8_t> white;

  bool is_white(std::size_t site) const { return white[site] != 0; }
  bool is_black(std::size_t site) const { return white[site] == 0; }
};

Coloring color_sites(const BondConfig& omega1, const BondConfig& omega2);

/// V together with every black site joined to V by a star-path whose sites
/// before the endpoint are all black. Sorted site indices.
std::vector<std::size_t> black_cluster(const Coloring& coloring, std::span<const std::size_t> v);

struct InteriorRegion {
  std::vector<std::size_t> interior;  ///< I: reachable from Gamma avoiding B
  std::vector<std::size_t> boundary;  ///< D: sites of I with a star-neighbour in B
};

/// I and D for the black cluster `b` and target set `gamma` (site indices).
InteriorRegion interior_region(const Coloring& coloring, std::span<const std::size_t> b,
                               std::span<const std::size_t> gamma);
std::vector<std::size_t> interior_boundary(const Coloring& coloring, std::span<const std::size_t> b,
                                           std::span<const std::size_t> gamma);

/// Site indices of `gamma`; throws std::invalid_argument if a site lies
/// outside the box.
std::vector<std::size_t> gamma_indices(const LatticeBox& box, std::span<const Site> gamma);

struct ClaimCheck {
  bool star_connected = false;
  bool nn_connected = false;
  bool all_white = false;
  bool measurable = false;      ///< D recomputed with I recoloured white is unchanged
  bool boundary_adjacent = false;  ///< every site just outside I touches D

  bool passes() const { return star_connected && all_white && measurable && boundary_adjacent; }
};

struct CouplingOutcome {
  Coloring coloring;
  std::vector<std::size_t> black;  ///< B(boundary of the box)
  InteriorRegion region;
  bool k_event = false;
};

/// Colours the pair and evaluates K for `gamma`.
CouplingOutcome analyze_pair(const BondConfig& omega1, const BondConfig& omega2,
                             std::span<const Site> gamma);
CouplingOutcome analyze_coloring(const Coloring& coloring, std::span<const std::size_t> black,
                                 std::span<const std::size_t> gamma);

bool k_event(const BondConfig& omega1, const BondConfig& omega2, std::span<const Site> gamma);

/// The four structural facts that accompany K. Meaningful when K holds.
ClaimCheck check_claims(const CouplingOutcome& outcome, std::span<const std::size_t> gamma);

struct GammaSpec {
  std::string label;
  std::vector<Site> sites;
};

/// Centred cubes of the given odd sides.
std::vector<GammaSpec> centered_gammas(const LatticeBox& box, std::span<const int> sides);

struct InfluenceRow {
  std::string label;
  int distance = 0;  ///< L1 distance from Gamma to the box boundary
  double phi_eta = 0.0;
  double phi_xi = 0.0;
  double diff = 0.0;
  double diff_se = 0.0;
  double p_k = 0.0;
  double p_k_se = 0.0;
  std::uint64_t k_count = 0;
  std::uint64_t claim_failures = 0;  ///< outcomes with K whose claims failed
  bool inequality_holds = false;     ///< diff <= 1 - p_k + 3 * combined se
};

struct ExponentialFit {
  std::optional<double> rate;
  double r_squared = 0.0;
  std::size_t points = 0;
};

struct InfluenceDecay {
  FKParams eta_params;
  FKParams xi_params;
  std::size_t event_bond = 0;
  std::uint64_t pairs = 0;
  std::vector<InfluenceRow> rows;
  ExponentialFit diff_fit;  ///< diff ~ 2 |boundary| exp(-c dist)
  ExponentialFit k_fit;     ///< 1 - P(K) ~ |boundary| exp(-c dist)
};

/// Two independent chains with boundary conditions eta and xi; for each
/// Gamma of the schedule, the influence on "event_bond open" and P(K).
InfluenceDecay influence_decay(double p, double q, const LatticeBox& box,
                               const BoundaryCondition& eta, const BoundaryCondition& xi,
                               std::span<const GammaSpec> schedule, std::size_t event_bond,
                               const SamplingPlan& plan, std::uint64_t seed);

struct RegionPair {
  std::vector<std::size_t> a;  ///< bond indices
  std::vector<std::size_t> b;
  double separation = 0.0;
};

/// Single bonds along the last axis through the box centre row: bond a
/// starts at `first`, bond b sits `s` lattice steps further, for each s.
std::vector<RegionPair> axis_region_pairs(const LatticeBox& box, const Site& first,
                                          std::span<const int> separations);

struct MixingRow {
  double separation = 0.0;
  bool skipped = false;  ///< some conditioning event was never observed
  double weak = 0.0;     ///< max |P(E | F) - P(E)| over single-bond cylinders
  double weak_se = 0.0;
  double ratio = 0.0;    ///< max |P(E & F) / (P(E) P(F)) - 1|
  double ratio_se = 0.0;
  std::optional<double> exact_weak;
  std::optional<double> exact_ratio;
};

struct MixingScan {
  FKParams params;
  std::string event_family = "single-bond cylinders";
  std::uint64_t samples = 0;
  std::vector<MixingRow> rows;
  ExponentialFit weak_fit;
  ExponentialFit ratio_fit;
};

/// Sampled weak and ratio mixing coefficients per region pair. When the box admits
/// exact enumeration and `exact_crosscheck` is set, exact coefficients for
/// the same regions are attached.
MixingScan mixing_scan(const FKParams& params, const LatticeBox& box,
                       std::span<const RegionPair> pairs, const SamplingPlan& plan,
                       std::uint64_t seed, bool exact_crosscheck = true);

/// Least squares of log(value) on distance; zero values are dropped. With
/// `log_prefactor` set the intercept is fixed to it.
ExponentialFit fit_exponential(std::span<const double> distance, std::span<const double> value,
                               std::optional<double> log_prefactor = std::nullopt);

void write_influence_csv(std::ostream& os, const InfluenceDecay& table);
void write_mixing_csv(std::ostream& os, const MixingScan& table);

}  // namespace fkp
