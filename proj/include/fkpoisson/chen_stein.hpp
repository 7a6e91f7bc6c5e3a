#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fkpoisson/census.hpp"
#include "fkpoisson/exact.hpp"
#include "fkpoisson/lattice.hpp"

namespace fkp {

/// Half-width of the dependence box B_x: the box of side n^2 is realized
/// with the odd side 2 floor(n^2/2) + 1, i.e. |y_i - x_i| <= floor(n^2/2).
int neighborhood_half_width(std::size_t n);

/// B_x intersected with the box, in lexicographic order.
std::vector<Site> neighborhood(const Site& x, std::size_t n, const LatticeBox& box);
std::vector<Site> neighborhood_with_half_width(const Site& x, int half_width,
                                               const LatticeBox& box);

/// Nonzero offsets z with max_i |z_i| <= half_width, lexicographic.
std::vector<Site> neighborhood_offsets(int dim, int half_width);

/// Number of x in the box with x + z also in the box.
std::uint64_t offset_positions(const LatticeBox& box, const Site& z);

struct OffsetPairStats {
  Site offset;
  std::uint64_t positions = 0;  ///< x with x, x+z in the box
  double pxy = 0.0;             ///< P(X(x) = X(x+z) = 1), averaged over x
  double pxy_se = 0.0;
  double truncated = 0.0;  ///< both clusters with n <= |C| < n^2
  double truncated_se = 0.0;
  double close = 0.0;  ///< truncated, with d(C, C') <= K ln n
  double close_se = 0.0;
  double distant = 0.0;  ///< truncated and not close
  double distant_se = 0.0;
};

struct PairStats {
  std::size_t n = 1;
  double K = 5.0;
  double close_threshold = 0.0;  ///< K ln n
  std::uint64_t samples = 0;
  std::vector<OffsetPairStats> offsets;
  double b2 = 0.0;  ///< sum over offsets of positions * pxy
  double b2_se = 0.0;
};

/// Pair co-occurrence counts for the chosen offsets. A pattern pair (x, y)
/// is "close" when some qualifying cluster pair with those centres is
/// within K ln n, otherwise "distant", so close + distant = truncated.
class PairAccumulator {
 public:
  PairAccumulator() = default;
  PairAccumulator(LatticeBox box, std::size_t n, double K, Finiteness rule,
                  std::vector<Site> offsets);

  void add(const ClusterSet& cs);
  void merge(const PairAccumulator& other);
  PairStats stats() const;

  std::uint64_t samples() const { return samples_; }
  const std::vector<Site>& offsets() const { return offsets_; }

 private:
  struct Moments {
    std::uint64_t sum = 0;
    std::uint64_t sumsq = 0;
    void add(std::uint64_t v) {
      sum += v;
      sumsq += v * v;
    }
    void merge(const Moments& o) {
      sum += o.sum;
      sumsq += o.sumsq;
    }
  };
  struct PerOffset {
    Moments plain, truncated, close, distant;
  };

  LatticeBox box_;
  std::size_t n_ = 1;
  double K_ = 5.0;
  Finiteness rule_ = Finiteness::kAvoidsBoundary;
  std::vector<Site> offsets_;
  std::unordered_map<Site, std::size_t, SiteHash> offset_index_;
  std::vector<PerOffset> per_offset_;
  Moments b2_total_;
  std::uint64_t samples_ = 0;
};

/// Convenience wrapper over PairAccumulator.
PairStats estimate_pxy(std::span<const ClusterSet> samples, std::size_t n, double K,
                       Finiteness rule, std::vector<Site> offsets);

struct B1B2 {
  double b1 = 0.0;
  double b2 = 0.0;
};

/// b1 = sum_x sum_{y in B_x} p_x p_y and b2 = sum_x sum_{y in B_x \ x} p_xy.
/// `px` is indexed by site. Throws std::invalid_argument listing any offset
/// of B_0 (present in the box) missing from `pairs`.
B1B2 compute_b1_b2(std::span<const double> px, const PairStats& pairs, const LatticeBox& box,
                   int half_width);

double compute_b1(std::span<const double> px, const LatticeBox& box, int half_width);

/// Second moments of a point-field stream, for the delta-method error of b1.
class CoOccurrenceAccumulator {
 public:
  CoOccurrenceAccumulator() = default;
  explicit CoOccurrenceAccumulator(std::size_t sites);
  void add(const PointField& f);
  void merge(const CoOccurrenceAccumulator& o);
  std::uint64_t samples() const { return samples_; }
  /// Standard error of b1 computed from the sample marginals.
  double b1_standard_error(const LatticeBox& box, int half_width) const;
  std::vector<double> px() const;

 private:
  std::size_t sites_ = 0;
  std::uint64_t samples_ = 0;
  std::vector<std::uint64_t> hits_;
  std::vector<std::uint64_t> co_;
};

enum class B3Method { kExact, kStratified, kSkipped };
std::string to_string(B3Method m);

struct B3Estimate {
  B3Method method = B3Method::kSkipped;
  std::optional<double> point;  ///< absent when no bin reached the occupancy floor
  double lower = 0.0;
  double upper = 0.0;
  double unpopulated_mass = 0.0;  ///< summed over x, weight of the merged "other" bins
};

/// Exact b3 from the joint law of the point field.
double exact_b3(const PatternLaw& law, const LatticeBox& box, int half_width);

/// Stratified b3 estimate: per site, samples are binned by the pattern of X
/// outside B_x. Bins below `min_occupancy` are merged into one "other" bin
/// whose contribution is bounded by its frequency. The interval adds three
/// standard errors per populated bin. Requires at most 64 sites.
class StratifiedB3Accumulator {
 public:
  StratifiedB3Accumulator() = default;
  StratifiedB3Accumulator(LatticeBox box, int half_width);
  void add(const PointField& f);
  void merge(const StratifiedB3Accumulator& o);
  B3Estimate estimate(std::uint64_t min_occupancy = 100) const;
  std::uint64_t samples() const { return samples_; }

 private:
  struct Bin {
    std::uint64_t count = 0;
    std::uint64_t hits = 0;
  };
  LatticeBox box_;
  int half_width_ = 0;
  std::vector<std::uint64_t> outside_mask_;
  std::vector<std::map<std::uint64_t, Bin>> bins_;
  std::vector<std::uint64_t> hits_;
  std::uint64_t samples_ = 0;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool is_point() const { return lower == upper; }
};

/// 2(2 b1 + 2 b2 + b3) + 4 sum_x p_x^2; an interval when b3 is one.
Interval tv_bound(double b1, double b2, Interval b3, double sum_px_sq);
double tv_bound(double b1, double b2, double b3, double sum_px_sq);

/// Every Chen-Stein quantity computed exactly from an enumerated law.
struct ExactChenStein {
  std::vector<double> px;
  double lambda = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
  double sum_px_sq = 0.0;
  double bound = 0.0;
  double tv = 0.0;      ///< sum form, X vs the product law with the same marginals
  double tv_sup = 0.0;  ///< 2 sup form
  PatternLaw law;
};

ExactChenStein exact_chen_stein(const ExactDistribution& dist, std::size_t n,
                                Finiteness rule, int half_width,
                                PointVariant variant = PointVariant::kPlain);

/// exact p_xy averaged over x for one offset, from the joint law.
double exact_offset_pxy(const PatternLaw& law, const LatticeBox& box, const Site& offset);

struct PoissonComparison {
  std::uint64_t samples = 0;
  double lambda_hat = 0.0;
  double tv = 0.0;  ///< sum_k |P(N = k) - Poisson(lambda_hat)(k)|
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool degenerate = false;  ///< lambda_hat == 0
  std::uint64_t truncation = 0;  ///< last k of the Poisson series evaluated
};

/// Poisson pmf up to the point where the remaining mass is below 1e-12
/// (and at least up to `min_k`).
std::vector<double> poisson_pmf(double lambda, std::uint64_t min_k = 0);

/// TV between the empirical law of N (histogram N -> frequency) and
/// Poisson(mean N), with a percentile bootstrap interval.
PoissonComparison poisson_count_test(const std::map<std::uint64_t, std::uint64_t>& histogram,
                                     std::size_t bootstrap_reps, std::uint64_t seed);

}  // namespace fkp
