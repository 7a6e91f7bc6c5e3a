#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fkpoisson/census.hpp"
#include "fkpoisson/fk.hpp"
#include "fkpoisson/lattice.hpp"

namespace fkp {

/// The pair_order-minimal element of c x c2. Throws std::invalid_argument
/// when either set is empty or they overlap.
SitePair first_pair(std::span<const Site> c, std::span<const Site> c2);

/// Lattice path from u to v through t_0 = u, ..., t_d = v, where t_i keeps
/// the first d - i coordinates of u and takes the rest from v (so the last
/// coordinate is corrected first). Contains |u - v|_1 + 1 distinct sites.
std::vector<Site> axis_path(const Site& u, const Site& v);

struct SurgeryResult {
  BondConfig input;
  BondConfig output;
  SitePair pair;
  std::vector<Site> path;            ///< u_0 = u, ..., u_k = v
  std::vector<std::size_t> merged;   ///< site indices of C, C' and the interior path
  std::vector<std::size_t> opened;   ///< bond indices, ascending
  std::vector<std::size_t> closed;

  std::size_t path_length() const { return path.empty() ? 0 : path.size() - 1; }
  std::size_t changed() const { return opened.size() + closed.size(); }
};

/// Opens the path bonds between the first pair of c x c2 and closes every
/// other bond at an interior path site. `c` and `c2` are site indices of two
/// distinct clusters of `omega`; throws std::invalid_argument otherwise.
SurgeryResult transform(const BondConfig& omega, std::span<const std::size_t> c,
                        std::span<const std::size_t> c2);

struct SizeWindow {
  std::size_t c = 0;
  std::size_t c2 = 0;
  std::size_t merged = 0;
  std::size_t k = 0;
  bool additive = false;  ///< |C| + |C'| <= |C~| <= |C| + |C'| + k - 1
  bool hypotheses = false;  ///< n <= |C|, |C'| < n^2 and k <= K ln n
  bool window = false;      ///< 2n <= |C~| < 4n + K ln n
};

SizeWindow size_window(const SurgeryResult& r, std::size_t n, double K);

struct WeightRatio {
  double log_ratio = 0.0;
  double log_floor = 0.0;
  double ratio = 1.0;
  double floor = 1.0;  ///< delta^m, m = changed bonds
  bool holds = true;
};

/// Compares Phi(omega~)/Phi(omega) with the finite-energy floor, in log space.
WeightRatio weight_ratio_check(const SurgeryResult& r, const FKParams& params);

/// (3n^2)^d (2K ln n)^d 2^(2dK ln n).
double antecedent_bound(std::size_t n, double K, int dim);

struct AntecedentCount {
  std::uint64_t count = 0;            ///< distinct antecedent configurations
  std::uint64_t candidate_pairs = 0;  ///< (u, v) with 1 <= |u - v|_1 <= K ln n
  std::uint64_t search_space = 0;     ///< bond-state assignments tried
  std::vector<BondConfig> antecedents;
};

/// Every omega holding two clusters C, C' with n <= |C|, |C'| < n^2, finite
/// under `rule`, d(C, C') <= K ln n, such that transform(omega, C, C') equals
/// `target`. Throws ResourceLimitError when the assignment count would
/// exceed `cap`.
AntecedentCount count_antecedents(const BondConfig& target, std::size_t n, double K,
                                  Finiteness rule = Finiteness::kAvoidsBoundary,
                                  std::uint64_t cap = std::uint64_t{1} << 26);

struct SurgeryScan {
  std::uint64_t instances = 0;
  std::uint64_t configurations = 0;  ///< sampled configurations inspected
  std::uint64_t merge_failures = 0;  ///< C~ not exactly one cluster of omega~
  std::uint64_t bond_bound_failures = 0;  ///< changed > 2d |u - v|_1
  std::uint64_t locality_failures = 0;    ///< a changed bond misses the path
  std::uint64_t weight_failures = 0;
  std::uint64_t additive_failures = 0;
  std::uint64_t determinism_failures = 0;
  std::uint64_t hypothesis_cases = 0;  ///< instances meeting the size/distance hypotheses
  std::uint64_t window_holds = 0;      ///< of those, 2n <= |C~| < 4n + K ln n
  std::size_t max_changed = 0;
  double min_log_margin = 0.0;  ///< min over instances of log ratio - log floor

  bool all_hold() const {
    return merge_failures + bond_bound_failures + locality_failures + weight_failures +
               additive_failures + determinism_failures ==
           0;
  }
};

/// Random surgeries: configurations come from an FK chain on `box`; each
/// instance is a uniformly chosen pair of distinct clusters of size >= n at
/// distance <= K ln n. Throws std::runtime_error when `max_configurations`
/// configurations yield fewer than `instances` instances.
SurgeryScan surgery_scan(const FKParams& params, const LatticeBox& box, std::size_t n, double K,
                         std::size_t instances, std::uint64_t seed,
                         std::size_t max_configurations = 1000000);

struct AntecedentRow {
  std::uint64_t count = 0;
  double bound = 0.0;
  bool within_bound = false;
  bool constructed = false;   ///< target produced by an actual surgery
  bool preimage_found = false;
  std::uint64_t search_space = 0;
};

/// Exhaustive antecedent counts on targets drawn from a small box. A target
/// is the surgery of a close qualifying pair (under `generation_K`) when one
/// exists, else the sampled configuration itself.
std::vector<AntecedentRow> antecedent_scan(const FKParams& params, const LatticeBox& box,
                                           std::size_t n, double K, double generation_K,
                                           Finiteness rule, std::size_t instances,
                                           std::uint64_t seed,
                                           std::uint64_t cap = std::uint64_t{1} << 26);

}  // namespace fkp
