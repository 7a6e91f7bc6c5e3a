#include "fkpoisson/census.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fkpoisson/union_find.hpp"

namespace fkp {

std::string to_string(Finiteness f) {
  return f == Finiteness::kAllFinite ? "all_finite" : "avoids_boundary";
}

Finiteness finiteness_from_string(const std::string& s) {
  if (s == "all_finite") return Finiteness::kAllFinite;
  if (s == "avoids_boundary") return Finiteness::kAvoidsBoundary;
  throw std::invalid_argument("unknown finiteness rule '" + s + "'");
}

std::vector<Site> ClusterSet::sites_of(const Cluster& c) const {
  std::vector<Site> out;
  out.reserve(c.sites.size());
  for (std::size_t i : c.sites) out.push_back(box.site(i));
  return out;
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

Site mass_center(std::span<const Site> sites) {
  if (sites.empty()) throw std::invalid_argument("mass centre of an empty cluster");
  const int d = sites.front().dim();
  std::array<std::int64_t, kMaxDim> sum{};
  for (const Site& s : sites) {
    for (int a = 0; a < d; ++a) sum[a] += s[a];
  }
  Site m = Site::zeros(d);
  const auto n = static_cast<std::int64_t>(sites.size());
  for (int a = 0; a < d; ++a) m[a] = static_cast<int>(floor_div(sum[a], n));
  return m;
}

ClusterSet label_clusters(const BondConfig& omega) {
  const LatticeBox& box = omega.box();
  const std::size_t n = box.num_sites();
  DisjointSets ds(n);
  auto bonds = box.bonds();
  for (std::size_t e = 0; e < bonds.size(); ++e) {
    if (omega.open(e)) ds.unite(bonds[e].lo, bonds[e].hi);
  }
  ClusterSet cs;
  cs.box = box;
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> label(n, kUnset);
  cs.cluster_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = ds.find(i);
    if (label[r] == kUnset) {
      label[r] = cs.clusters.size();
      cs.clusters.emplace_back();
    }
    Cluster& c = cs.clusters[label[r]];
    c.sites.push_back(i);
    c.touches_boundary = c.touches_boundary || box.is_boundary(i);
    cs.cluster_of[i] = label[r];
  }
  const int d = box.dim();
  for (Cluster& c : cs.clusters) {
    std::array<std::int64_t, kMaxDim> sum{};
    for (std::size_t i : c.sites) {
      const Site s = box.site(i);
      for (int a = 0; a < d; ++a) sum[a] += s[a];
    }
    c.mass_center = Site::zeros(d);
    const auto sz = static_cast<std::int64_t>(c.sites.size());
    for (int a = 0; a < d; ++a) c.mass_center[a] = static_cast<int>(floor_div(sum[a], sz));
  }
  return cs;
}

bool qualifies(const Cluster& c, std::size_t n, PointVariant variant, Finiteness rule) {
  if (!c.finite(rule) || c.size() < n) return false;
  if (variant == PointVariant::kTruncated) return 4 * c.size() < n * n;
  return true;
}

std::size_t PointField::count() const {
  return static_cast<std::size_t>(std::count(x.begin(), x.end(), 1));
}

bool PointField::at(const Site& s) const {
  auto i = box.index_of(s);
  return i && x[*i] != 0;
}

PointField point_process(const ClusterSet& cs, std::size_t n, PointVariant variant,
                         Finiteness rule) {
  if (n < 1) throw std::invalid_argument("point_process needs n >= 1");
  PointField f;
  f.box = cs.box;
  f.n = n;
  f.variant = variant;
  f.rule = rule;
  f.x.assign(cs.box.num_sites(), 0);
  for (const Cluster& c : cs.clusters) {
    if (!qualifies(c, n, variant, rule)) continue;
    auto idx = cs.box.index_of(c.mass_center);
    if (!idx) continue;
    if (f.x[*idx]) {
      ++f.collisions;
    } else {
      f.x[*idx] = 1;
    }
  }
  return f;
}

std::uint64_t pattern_mask(const PointField& field) {
  if (field.x.size() > 64) throw std::invalid_argument("pattern_mask needs at most 64 sites");
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < field.x.size(); ++i) m |= std::uint64_t{field.x[i]} << i;
  return m;
}

PointFieldAccumulator::PointFieldAccumulator(LatticeBox box, std::size_t n, PointVariant variant,
                                             Finiteness rule)
    : box_(std::move(box)), n_(n), variant_(variant), rule_(rule),
      site_hits_(box_.num_sites(), 0) {}

PointFieldAccumulator PointFieldAccumulator::from_counts(
    LatticeBox box, std::size_t n, PointVariant variant, Finiteness rule, std::uint64_t samples,
    std::uint64_t collisions, std::vector<std::uint64_t> site_hits,
    std::map<std::uint64_t, std::uint64_t> histogram) {
  PointFieldAccumulator acc(std::move(box), n, variant, rule);
  if (site_hits.size() != acc.site_hits_.size()) {
    throw std::invalid_argument("stored site counts do not match the box");
  }
  std::uint64_t total = 0;
  for (const auto& [k, v] : histogram) total += v;
  if (total != samples) throw std::invalid_argument("stored count histogram does not sum to the sample count");
  for (std::uint64_t h : site_hits) {
    if (h > samples) throw std::invalid_argument("stored site count exceeds the sample count");
  }
  acc.samples_ = samples;
  acc.collisions_ = collisions;
  acc.site_hits_ = std::move(site_hits);
  acc.histogram_ = std::move(histogram);
  return acc;
}

bool PointFieldAccumulator::matches(const LatticeBox& box, std::size_t n, PointVariant v,
                                    Finiteness r) const {
  return box == box_ && n == n_ && v == variant_ && r == rule_;
}

void PointFieldAccumulator::add(const PointField& field) {
  if (!matches(field.box, field.n, field.variant, field.rule)) {
    throw std::invalid_argument("point field parameters differ from the accumulator's");
  }
  std::uint64_t count = 0;
  for (std::size_t i = 0; i < field.x.size(); ++i) {
    if (field.x[i]) {
      ++site_hits_[i];
      ++count;
    }
  }
  ++histogram_[count];
  collisions_ += field.collisions;
  ++samples_;
}

void PointFieldAccumulator::merge(const PointFieldAccumulator& other) {
  if (!matches(other.box_, other.n_, other.variant_, other.rule_)) {
    throw std::invalid_argument("cannot merge point-field statistics with different parameters");
  }
  for (std::size_t i = 0; i < site_hits_.size(); ++i) site_hits_[i] += other.site_hits_[i];
  for (const auto& [k, v] : other.histogram_) histogram_[k] += v;
  collisions_ += other.collisions_;
  samples_ += other.samples_;
}

std::vector<double> PointFieldAccumulator::px_field() const {
  std::vector<double> out(site_hits_.size(), 0.0);
  if (samples_ == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<double>(site_hits_[i]) / static_cast<double>(samples_);
  }
  return out;
}

PxLambdaEstimate PointFieldAccumulator::estimate(const Site& x) const {
  auto idx = box_.index_of(x);
  if (!idx) throw std::invalid_argument("site " + x.str() + " is outside the box");
  if (samples_ < 2) throw std::invalid_argument("p_x estimation needs at least two samples");
  PxLambdaEstimate e;
  e.samples = samples_;
  const auto m = static_cast<double>(samples_);
  e.px = static_cast<double>(site_hits_[*idx]) / m;
  e.px_se = binomial_se(site_hits_[*idx], samples_);
  const auto sites = static_cast<double>(box_.num_sites());
  e.lambda_translation = sites * e.px;
  e.lambda_translation_se = sites * e.px_se;
  double s1 = 0, s2 = 0;
  for (const auto& [k, v] : histogram_) {
    s1 += static_cast<double>(k) * static_cast<double>(v);
    s2 += static_cast<double>(k) * static_cast<double>(k) * static_cast<double>(v);
  }
  e.lambda_direct = s1 / m;
  const double var = std::max(0.0, (s2 - s1 * s1 / m) / (m - 1.0));
  e.lambda_direct_se = std::sqrt(var / m);
  e.discrepancy = e.lambda_translation - e.lambda_direct;
  return e;
}

PxLambdaEstimate estimate_px_lambda(std::span<const PointField> samples, const Site& x) {
  if (samples.size() < 2) throw std::invalid_argument("p_x estimation needs at least two samples");
  const PointField& f0 = samples.front();
  PointFieldAccumulator acc(f0.box, f0.n, f0.variant, f0.rule);
  for (const PointField& f : samples) acc.add(f);
  return acc.estimate(x);
}

DecayEstimate decay_rate(const FKParams& params, int dim,
                         std::span<const DecayScheduleEntry> schedule, const SamplingPlan& plan,
                         std::uint64_t seed, double window_fraction) {
  params.validate();
  if (plan.samples < 2) throw std::invalid_argument("decay_rate needs at least two samples per n");
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
    throw std::invalid_argument("window_fraction must lie in (0, 1]");
  }
  DecayEstimate out;
  out.params = params;
  out.window_fraction = window_fraction;
  out.samples_per_n = plan.samples;
  const double surface = static_cast<double>(dim - 1) / static_cast<double>(dim);

  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto [n, side] = schedule[k];
    if (n < 1 || side < 1) throw std::invalid_argument("decay schedule entries need n, side >= 1");
    LatticeBox box = LatticeBox::with_sides(std::vector<int>(dim, side));
    const int wside = std::max(1, static_cast<int>(std::lround(window_fraction * side)));
    const int woff = (side - wside) / 2;
    auto in_window = [&](const Site& s) {
      for (int a = 0; a < dim; ++a) {
        if (s[a] < woff || s[a] >= woff + wside) return false;
      }
      return true;
    };
    std::vector<std::uint8_t> window_site(box.num_sites(), 0);
    std::size_t window_size = 0;
    for (std::size_t i = 0; i < box.num_sites(); ++i) {
      window_site[i] = in_window(box.site(i));
      window_size += window_site[i];
    }

    FKSampler sampler(box, params, derive_seed(seed, k));
    sampler.run(plan.burn_in ? plan.burn_in : default_burn_in(box));
    MeanAccumulator origin_acc, px_acc;
    for (std::size_t s = 0; s < plan.samples; ++s) {
      if (s > 0) sampler.run(plan.thinning);
      const ClusterSet cs = label_clusters(sampler.state());
      std::uint64_t hits = 0, centers = 0;
      for (const Cluster& c : cs.clusters) {
        if (c.touches_boundary || c.size() < n) continue;
        for (std::size_t i : c.sites) hits += window_site[i];
        if (in_window(c.mass_center)) ++centers;
      }
      origin_acc.add(static_cast<double>(hits) / static_cast<double>(window_size));
      px_acc.add(static_cast<double>(centers) / static_cast<double>(window_size));
    }
    DecayRow row;
    row.n = n;
    row.box_side = side;
    row.prob_origin = origin_acc.mean();
    row.prob_origin_se = origin_acc.standard_error();
    row.px = px_acc.mean();
    row.px_se = px_acc.standard_error();
    const double scale = std::pow(static_cast<double>(n), surface);
    if (row.prob_origin > 0.0) row.a_origin = -std::log(row.prob_origin) / scale;
    if (row.px > 0.0) row.a_px = -std::log(row.px) / scale;
    if (row.a_origin && row.a_px && *row.a_origin != 0.0) row.ratio = *row.a_px / *row.a_origin;
    out.rows.push_back(row);
  }
  return out;
}

double theta_estimate(std::span<const ClusterSet> samples, const Site& origin) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const ClusterSet& cs : samples) {
    auto idx = cs.box.index_of(origin);
    if (!idx) throw std::invalid_argument("origin " + origin.str() + " is outside the box");
    hits += cs.clusters[cs.cluster_of[*idx]].touches_boundary;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace fkp
