#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fkpoisson/fk.hpp"
#include "fkpoisson/lattice.hpp"
#include "fkpoisson/stats.hpp"

namespace fkp {

/// How a cluster of a finite box stands in for "|C| < infinity".
enum class Finiteness {
  kAvoidsBoundary,  ///< finite iff the cluster does not meet the box boundary
  kAllFinite,       ///< every cluster counts as finite (strips, tiny boxes)
};

std::string to_string(Finiteness f);
Finiteness finiteness_from_string(const std::string& s);

struct Cluster {
  std::vector<std::size_t> sites;  ///< linear site indices, ascending
  bool touches_boundary = false;
  Site mass_center;

  std::size_t size() const { return sites.size(); }
  bool finite(Finiteness rule) const {
    return rule == Finiteness::kAllFinite || !touches_boundary;
  }
};

struct ClusterSet {
  LatticeBox box;
  std::vector<Cluster> clusters;
  std::vector<std::size_t> cluster_of;  ///< site index -> cluster index

  std::vector<Site> sites_of(const Cluster& c) const;
};

/// Connected components under open bonds (no boundary identification),
/// ordered by smallest member site.
ClusterSet label_clusters(const BondConfig& omega);

/// Coordinate-wise floor of the mean. Throws std::invalid_argument on an
/// empty set.
Site mass_center(std::span<const Site> sites);

enum class PointVariant {
  kPlain,      ///< n <= |C|
  kTruncated,  ///< n <= |C| < n^2/4
};

/// True when a cluster of this size and finiteness marks its mass centre.
bool qualifies(const Cluster& c, std::size_t n, PointVariant variant, Finiteness rule);

struct PointField {
  LatticeBox box;
  std::size_t n = 1;
  PointVariant variant = PointVariant::kPlain;
  Finiteness rule = Finiteness::kAvoidsBoundary;
  std::vector<std::uint8_t> x;  ///< indicator per site
  std::size_t collisions = 0;   ///< qualifying clusters whose centre was already marked

  std::size_t count() const;
  bool at(const Site& s) const;
};

/// Indicator field of mass centres of qualifying clusters.
PointField point_process(const ClusterSet& cs, std::size_t n, PointVariant variant,
                         Finiteness rule = Finiteness::kAvoidsBoundary);

/// Pattern of a point field as a bit mask (requires at most 64 sites).
std::uint64_t pattern_mask(const PointField& field);

struct PxLambdaEstimate {
  double px = 0.0;
  double px_se = 0.0;
  double lambda_translation = 0.0;  ///< |Lambda| * p_x
  double lambda_translation_se = 0.0;
  double lambda_direct = 0.0;  ///< mean of sum_x X(x)
  double lambda_direct_se = 0.0;
  double discrepancy = 0.0;
  std::uint64_t samples = 0;
};

/// Sufficient statistics of a stream of point fields sharing (box, n,
/// variant, rule). All counts are integers so merging is exact.
class PointFieldAccumulator {
 public:
  PointFieldAccumulator() = default;
  PointFieldAccumulator(LatticeBox box, std::size_t n, PointVariant variant, Finiteness rule);

  /// Rebuilds an accumulator from stored counts; throws on inconsistent sizes.
  static PointFieldAccumulator from_counts(LatticeBox box, std::size_t n, PointVariant variant,
                                           Finiteness rule, std::uint64_t samples,
                                           std::uint64_t collisions,
                                           std::vector<std::uint64_t> site_hits,
                                           std::map<std::uint64_t, std::uint64_t> histogram);

  /// Throws std::invalid_argument if the field's parameters differ.
  void add(const PointField& field);
  void merge(const PointFieldAccumulator& other);

  std::uint64_t samples() const { return samples_; }
  const LatticeBox& box() const { return box_; }
  std::size_t n() const { return n_; }
  PointVariant variant() const { return variant_; }
  Finiteness rule() const { return rule_; }
  std::uint64_t site_count(std::size_t site) const { return site_hits_[site]; }
  const std::map<std::uint64_t, std::uint64_t>& count_histogram() const { return histogram_; }
  std::uint64_t collisions() const { return collisions_; }

  /// Per-site p_x estimates.
  std::vector<double> px_field() const;
  PxLambdaEstimate estimate(const Site& x) const;

 private:
  bool matches(const LatticeBox& box, std::size_t n, PointVariant v, Finiteness r) const;

  LatticeBox box_;
  std::size_t n_ = 1;
  PointVariant variant_ = PointVariant::kPlain;
  Finiteness rule_ = Finiteness::kAvoidsBoundary;
  std::uint64_t samples_ = 0;
  std::uint64_t collisions_ = 0;
  std::vector<std::uint64_t> site_hits_;
  std::map<std::uint64_t, std::uint64_t> histogram_;  ///< N -> frequency
};

/// p_x and lambda from a list of fields; needs at least two samples.
PxLambdaEstimate estimate_px_lambda(std::span<const PointField> samples, const Site& x);

/// Sampling schedule shared by the Monte Carlo estimators.
struct SamplingPlan {
  std::size_t burn_in = 0;   ///< 0 means default_burn_in(box)
  std::size_t thinning = 1;  ///< sweeps between recorded samples
  std::size_t samples = 1000;
};

struct DecayRow {
  std::size_t n = 0;
  int box_side = 0;
  double prob_origin = 0.0;  ///< Phi(n <= |C(0)| < inf), averaged over the window
  double prob_origin_se = 0.0;
  std::optional<double> a_origin;  ///< -ln(prob) / n^((d-1)/d)
  double px = 0.0;
  double px_se = 0.0;
  std::optional<double> a_px;
  std::optional<double> ratio;  ///< a_px / a_origin
};

struct DecayEstimate {
  FKParams params;
  double window_fraction = 0.5;
  std::uint64_t samples_per_n = 0;
  std::vector<DecayRow> rows;
};

struct DecayScheduleEntry {
  std::size_t n = 1;
  int box_side = 16;
};

/// Surface-order decay estimates for the cluster of a site and for p_x.
/// Both probabilities are averaged over the central window of each box
/// (side window_fraction * box_side) by translation invariance.
DecayEstimate decay_rate(const FKParams& params, int dim,
                         std::span<const DecayScheduleEntry> schedule, const SamplingPlan& plan,
                         std::uint64_t seed, double window_fraction = 0.5);

/// Fraction of samples whose cluster at `origin` meets the box boundary.
double theta_estimate(std::span<const ClusterSet> samples, const Site& origin);

}  // namespace fkp
