#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "fkpoisson/census.hpp"
#include "fkpoisson/fk.hpp"
#include "fkpoisson/lattice.hpp"

namespace fkp {

/// A computation refused because it would exceed a configured size cap.
class ResourceLimitError : public std::runtime_error {
 public:
  ResourceLimitError(const std::string& what, std::uint64_t requested)
      : std::runtime_error(what), requested_(requested) {}
  std::uint64_t requested() const { return requested_; }

 private:
  std::uint64_t requested_;
};

inline constexpr std::size_t kMaxEnumerationBonds = 24;
inline constexpr std::size_t kMaxMixingRegionBonds = 10;

/// Exact FK law of a box: probability of every configuration, indexed by
/// the bond mask (bit i = bond i in bonds_of() order).
struct ExactDistribution {
  LatticeBox box;
  FKParams params;
  std::vector<double> prob;
  double log_z = 0.0;

  double z() const;
  BondConfig config(std::uint64_t index) const { return BondConfig::from_mask(box, index); }
};

/// Exhaustive enumeration of all 2^|E| configurations. Throws
/// ResourceLimitError above kMaxEnumerationBonds bonds.
ExactDistribution enumerate(const LatticeBox& box, const FKParams& params);

double event_probability(const ExactDistribution& dist,
                         const std::function<bool(const BondConfig&)>& predicate);

/// Law of a {0,1}-valued field over at most 64 sites; keys are site masks.
struct PatternLaw {
  std::size_t num_sites = 0;
  std::map<std::uint64_t, double> prob;

  double marginal(std::size_t site) const;
  double total() const;
};

PatternLaw exact_point_process_law(const ExactDistribution& dist, std::size_t n,
                                   PointVariant variant = PointVariant::kPlain,
                                   Finiteness rule = Finiteness::kAvoidsBoundary);

/// Independent Bernoulli field with the given marginals (at most 24 sites).
PatternLaw product_law(std::span<const double> marginals);

/// Sum over patterns of |P1 - P2|. Throws on mismatched site counts.
double exact_tv(const PatternLaw& a, const PatternLaw& b);

/// 2 sup_A |P1(A) - P2(A)|, evaluated at the maximising event {P1 > P2}.
double exact_tv_sup(const PatternLaw& a, const PatternLaw& b);

struct TwoClusterRow {
  Site x;
  Site y;
  double lhs = 0.0;  ///< P(n <= |C(x)|, n <= |C(y)| finite, C(x) != C(y))
  double rhs = 0.0;  ///< P(2n <= |C(c)| finite) at the box centre c
  bool holds = true;
};

TwoClusterRow two_cluster_check(const ExactDistribution& dist, std::size_t n, const Site& x,
                                 const Site& y, Finiteness rule = Finiteness::kAvoidsBoundary);
TwoClusterRow two_cluster_check(const LatticeBox& box, const FKParams& params, std::size_t n,
                                 const Site& x, const Site& y,
                                 Finiteness rule = Finiteness::kAvoidsBoundary);
/// All unordered pairs x < y of the box.
std::vector<TwoClusterRow> two_cluster_table(const ExactDistribution& dist, std::size_t n,
                                              Finiteness rule = Finiteness::kAvoidsBoundary);

/// sup |P(E & F) / (P(E) P(F)) - 1| over events E generated by the bonds of
/// region_a and F generated by region_b. Regions must be disjoint with at
/// most kMaxMixingRegionBonds bonds each.
double exact_ratio_mixing(const ExactDistribution& dist, std::span<const std::size_t> region_a,
                          std::span<const std::size_t> region_b);

/// sup |P(E | F) - P(E)| over the same event classes; region_b is limited
/// to 4 bonds since the search runs over all unions of its atoms.
double exact_weak_mixing(const ExactDistribution& dist, std::span<const std::size_t> region_a,
                         std::span<const std::size_t> region_b);

}  // namespace fkp
