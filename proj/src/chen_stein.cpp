#include "fkpoisson/chen_stein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

#include "fkpoisson/rng.hpp"

namespace fkp {

int neighborhood_half_width(std::size_t n) {
  if (n < 1) throw std::invalid_argument("neighborhood needs n >= 1");
  return static_cast<int>(n * n / 2);
}

std::vector<Site> neighborhood_with_half_width(const Site& x, int half_width,
                                               const LatticeBox& box) {
  if (half_width < 0) throw std::invalid_argument("negative neighborhood half-width");
  const int d = box.dim();
  std::vector<Site> out;
  Site lo = Site::zeros(d), hi = Site::zeros(d);
  for (int a = 0; a < d; ++a) {
    lo[a] = std::max(x[a] - half_width, box.lower()[a]);
    hi[a] = std::min(x[a] + half_width, box.lower()[a] + box.sides()[a] - 1);
    if (lo[a] > hi[a]) return out;
  }
  Site s = lo;
  while (true) {
    out.push_back(s);
    int a = d - 1;
    while (a >= 0 && s[a] == hi[a]) {
      s[a] = lo[a];
      --a;
    }
    if (a < 0) break;
    ++s[a];
  }
  return out;
}

std::vector<Site> neighborhood(const Site& x, std::size_t n, const LatticeBox& box) {
  return neighborhood_with_half_width(x, neighborhood_half_width(n), box);
}

std::vector<Site> neighborhood_offsets(int dim, int half_width) {
  if (half_width < 0) throw std::invalid_argument("negative neighborhood half-width");
  std::vector<Site> out;
  Site z = Site::zeros(dim);
  for (int a = 0; a < dim; ++a) z[a] = -half_width;
  while (true) {
    if (z != Site::zeros(dim)) out.push_back(z);
    int a = dim - 1;
    while (a >= 0 && z[a] == half_width) {
      z[a] = -half_width;
      --a;
    }
    if (a < 0) break;
    ++z[a];
  }
  return out;
}

std::uint64_t offset_positions(const LatticeBox& box, const Site& z) {
  std::uint64_t count = 1;
  for (int a = 0; a < box.dim(); ++a) {
    const int free = box.sides()[a] - std::abs(z[a]);
    if (free <= 0) return 0;
    count *= static_cast<std::uint64_t>(free);
  }
  return count;
}

PairAccumulator::PairAccumulator(LatticeBox box, std::size_t n, double K, Finiteness rule,
                                 std::vector<Site> offsets)
    : box_(std::move(box)), n_(n), K_(K), rule_(rule), offsets_(std::move(offsets)) {
  if (n_ < 1) throw std::invalid_argument("pair statistics need n >= 1");
  if (!(K_ > 0.0)) throw std::invalid_argument("the close/distant constant K must be positive");
  for (std::size_t i = 0; i < offsets_.size(); ++i) {
    if (offsets_[i].dim() != box_.dim()) throw std::invalid_argument("offset dimension mismatch");
    if (offsets_[i] == Site::zeros(box_.dim())) {
      throw std::invalid_argument("the zero offset is not a pair offset");
    }
    if (!offset_index_.emplace(offsets_[i], i).second) {
      throw std::invalid_argument("duplicate offset " + offsets_[i].str());
    }
  }
  per_offset_.resize(offsets_.size());
}

namespace {

double min_distance(const ClusterSet& cs, const Cluster& a, const Cluster& b) {
  int best = std::numeric_limits<int>::max();
  for (std::size_t i : a.sites) {
    const Site u = cs.box.site(i);
    for (std::size_t j : b.sites) {
      best = std::min(best, l1_distance(u, cs.box.site(j)));
      if (best <= 1) return best;
    }
  }
  return best;
}

}  // namespace

void PairAccumulator::add(const ClusterSet& cs) {
  if (!(cs.box == box_)) throw std::invalid_argument("cluster set box differs from the accumulator's");
  const double threshold = K_ * std::log(static_cast<double>(n_));
  const std::size_t n2 = n_ * n_;

  std::vector<std::size_t> qualifying;
  std::unordered_set<std::size_t> marked_set;
  for (std::size_t c = 0; c < cs.clusters.size(); ++c) {
    const Cluster& cl = cs.clusters[c];
    if (!qualifies(cl, n_, PointVariant::kPlain, rule_)) continue;
    qualifying.push_back(c);
    marked_set.insert(*box_.index_of(cl.mass_center));
  }
  std::vector<std::size_t> marked(marked_set.begin(), marked_set.end());
  std::sort(marked.begin(), marked.end());

  std::unordered_map<std::size_t, std::uint64_t> plain;
  std::uint64_t total = 0;
  for (std::size_t a : marked) {
    const Site sa = box_.site(a);
    for (std::size_t b : marked) {
      if (a == b) continue;
      auto it = offset_index_.find(box_.site(b) - sa);
      if (it == offset_index_.end()) continue;
      ++plain[it->second];
      ++total;
    }
  }

  // (x, y) -> close flag, over pairs of distinct truncated clusters.
  std::map<std::pair<std::size_t, std::size_t>, bool> truncated_pairs;
  std::vector<std::size_t> small;
  for (std::size_t c : qualifying) {
    if (cs.clusters[c].size() < n2) small.push_back(c);
  }
  for (std::size_t i : small) {
    const Cluster& ci = cs.clusters[i];
    for (std::size_t j : small) {
      if (i == j) continue;
      const Cluster& cj = cs.clusters[j];
      if (ci.mass_center == cj.mass_center) continue;
      if (!offset_index_.contains(cj.mass_center - ci.mass_center)) continue;
      const auto key = std::make_pair(*box_.index_of(ci.mass_center), *box_.index_of(cj.mass_center));
      bool& close = truncated_pairs[key];
      if (!close) close = min_distance(cs, ci, cj) <= threshold;
    }
  }
  std::unordered_map<std::size_t, std::array<std::uint64_t, 3>> trunc;
  for (const auto& [key, close] : truncated_pairs) {
    const Site z = box_.site(key.second) - box_.site(key.first);
    auto& t = trunc[offset_index_.at(z)];
    ++t[0];
    ++t[close ? 1 : 2];
  }

  for (const auto& [k, v] : plain) per_offset_[k].plain.add(v);
  for (const auto& [k, t] : trunc) {
    per_offset_[k].truncated.add(t[0]);
    per_offset_[k].close.add(t[1]);
    per_offset_[k].distant.add(t[2]);
  }
  b2_total_.add(total);
  ++samples_;
}

void PairAccumulator::merge(const PairAccumulator& other) {
  if (!(other.box_ == box_) || other.n_ != n_ || other.K_ != K_ || other.rule_ != rule_ ||
      other.offsets_ != offsets_) {
    throw std::invalid_argument("cannot merge pair statistics with different parameters");
  }
  for (std::size_t i = 0; i < per_offset_.size(); ++i) {
    per_offset_[i].plain.merge(other.per_offset_[i].plain);
    per_offset_[i].truncated.merge(other.per_offset_[i].truncated);
    per_offset_[i].close.merge(other.per_offset_[i].close);
    per_offset_[i].distant.merge(other.per_offset_[i].distant);
  }
  b2_total_.merge(other.b2_total_);
  samples_ += other.samples_;
}

namespace {

// Mean and standard error of v / scale where v has the given sample moments.
std::pair<double, double> scaled_moments(std::uint64_t sum, std::uint64_t sumsq,
                                         std::uint64_t samples, double scale) {
  if (samples == 0 || scale <= 0.0) return {0.0, 0.0};
  const auto s = static_cast<double>(samples);
  const double mean = static_cast<double>(sum) / s;
  double se = 0.0;
  if (samples > 1) {
    const double var =
        std::max(0.0, (static_cast<double>(sumsq) - s * mean * mean) / (s - 1.0));
    se = std::sqrt(var / s);
  }
  return {mean / scale, se / scale};
}

}  // namespace

PairStats PairAccumulator::stats() const {
  PairStats out;
  out.n = n_;
  out.K = K_;
  out.close_threshold = K_ * std::log(static_cast<double>(n_));
  out.samples = samples_;
  for (std::size_t i = 0; i < offsets_.size(); ++i) {
    OffsetPairStats o;
    o.offset = offsets_[i];
    o.positions = offset_positions(box_, offsets_[i]);
    const auto scale = static_cast<double>(o.positions);
    const PerOffset& p = per_offset_[i];
    std::tie(o.pxy, o.pxy_se) = scaled_moments(p.plain.sum, p.plain.sumsq, samples_, scale);
    std::tie(o.truncated, o.truncated_se) =
        scaled_moments(p.truncated.sum, p.truncated.sumsq, samples_, scale);
    std::tie(o.close, o.close_se) = scaled_moments(p.close.sum, p.close.sumsq, samples_, scale);
    std::tie(o.distant, o.distant_se) =
        scaled_moments(p.distant.sum, p.distant.sumsq, samples_, scale);
    out.offsets.push_back(o);
  }
  std::tie(out.b2, out.b2_se) = scaled_moments(b2_total_.sum, b2_total_.sumsq, samples_, 1.0);
  return out;
}

PairStats estimate_pxy(std::span<const ClusterSet> samples, std::size_t n, double K,
                       Finiteness rule, std::vector<Site> offsets) {
  if (samples.empty()) throw std::invalid_argument("estimate_pxy needs at least one sample");
  PairAccumulator acc(samples.front().box, n, K, rule, std::move(offsets));
  for (const ClusterSet& cs : samples) acc.add(cs);
  return acc.stats();
}

double compute_b1(std::span<const double> px, const LatticeBox& box, int half_width) {
  if (px.size() != box.num_sites()) throw std::invalid_argument("p_x field size mismatch");
  double b1 = 0.0;
  for (std::size_t i = 0; i < box.num_sites(); ++i) {
    if (px[i] == 0.0) continue;
    double inner = 0.0;
    for (const Site& y : neighborhood_with_half_width(box.site(i), half_width, box)) {
      inner += px[*box.index_of(y)];
    }
    b1 += px[i] * inner;
  }
  return b1;
}

B1B2 compute_b1_b2(std::span<const double> px, const PairStats& pairs, const LatticeBox& box,
                   int half_width) {
  std::unordered_map<Site, const OffsetPairStats*, SiteHash> have;
  for (const OffsetPairStats& o : pairs.offsets) have[o.offset] = &o;
  B1B2 out;
  out.b1 = compute_b1(px, box, half_width);
  std::vector<std::string> missing;
  for (const Site& z : neighborhood_offsets(box.dim(), half_width)) {
    const std::uint64_t positions = offset_positions(box, z);
    if (positions == 0) continue;
    auto it = have.find(z);
    if (it == have.end()) {
      missing.push_back(z.str());
      continue;
    }
    out.b2 += static_cast<double>(positions) * it->second->pxy;
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "pair statistics lack " << missing.size() << " offset(s):";
    for (const auto& m : missing) msg << ' ' << m;
    throw std::invalid_argument(msg.str());
  }
  return out;
}

CoOccurrenceAccumulator::CoOccurrenceAccumulator(std::size_t sites)
    : sites_(sites), hits_(sites, 0), co_(sites * sites, 0) {
  if (sites > 256) throw std::invalid_argument("co-occurrence tracking supports at most 256 sites");
}

void CoOccurrenceAccumulator::add(const PointField& f) {
  if (f.x.size() != sites_) throw std::invalid_argument("point field size mismatch");
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < sites_; ++i) {
    if (f.x[i]) on.push_back(i);
  }
  for (std::size_t i : on) {
    ++hits_[i];
    for (std::size_t j : on) ++co_[i * sites_ + j];
  }
  ++samples_;
}

void CoOccurrenceAccumulator::merge(const CoOccurrenceAccumulator& o) {
  if (o.sites_ != sites_) throw std::invalid_argument("co-occurrence size mismatch");
  for (std::size_t i = 0; i < hits_.size(); ++i) hits_[i] += o.hits_[i];
  for (std::size_t i = 0; i < co_.size(); ++i) co_[i] += o.co_[i];
  samples_ += o.samples_;
}

std::vector<double> CoOccurrenceAccumulator::px() const {
  std::vector<double> p(sites_, 0.0);
  if (samples_ == 0) return p;
  for (std::size_t i = 0; i < sites_; ++i) {
    p[i] = static_cast<double>(hits_[i]) / static_cast<double>(samples_);
  }
  return p;
}

double CoOccurrenceAccumulator::b1_standard_error(const LatticeBox& box, int half_width) const {
  if (box.num_sites() != sites_) throw std::invalid_argument("box size mismatch");
  if (samples_ < 2) return 0.0;
  const std::vector<double> p = px();
  std::vector<double> g(sites_, 0.0);
  for (std::size_t i = 0; i < sites_; ++i) {
    for (const Site& y : neighborhood_with_half_width(box.site(i), half_width, box)) {
      g[i] += 2.0 * p[*box.index_of(y)];
    }
  }
  const auto s = static_cast<double>(samples_);
  double var = 0.0;
  for (std::size_t i = 0; i < sites_; ++i) {
    for (std::size_t j = 0; j < sites_; ++j) {
      const double cov = static_cast<double>(co_[i * sites_ + j]) / s - p[i] * p[j];
      var += g[i] * g[j] * cov;
    }
  }
  return std::sqrt(std::max(0.0, var) / (s - 1.0));
}

std::string to_string(B3Method m) {
  switch (m) {
    case B3Method::kExact: return "exact";
    case B3Method::kStratified: return "stratified";
    case B3Method::kSkipped: return "skipped";
  }
  return "skipped";
}

namespace {

std::uint64_t outside_mask(const LatticeBox& box, std::size_t x, int half_width) {
  std::uint64_t inside = 0;
  for (const Site& y : neighborhood_with_half_width(box.site(x), half_width, box)) {
    inside |= std::uint64_t{1} << *box.index_of(y);
  }
  const std::size_t n = box.num_sites();
  const std::uint64_t all = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  return all & ~inside;
}

}  // namespace

double exact_b3(const PatternLaw& law, const LatticeBox& box, int half_width) {
  if (law.num_sites != box.num_sites()) throw std::invalid_argument("law and box size differ");
  if (law.num_sites > 64) throw std::invalid_argument("exact b3 needs at most 64 sites");
  double b3 = 0.0;
  for (std::size_t x = 0; x < law.num_sites; ++x) {
    const double px = law.marginal(x);
    const std::uint64_t out = outside_mask(box, x, half_width);
    std::map<std::uint64_t, std::pair<double, double>> groups;  // key -> (mass, mass with X(x)=1)
    for (const auto& [pattern, p] : law.prob) {
      auto& g = groups[pattern & out];
      g.first += p;
      if ((pattern >> x) & 1U) g.second += p;
    }
    for (const auto& [key, g] : groups) {
      if (g.first > 0.0) b3 += g.first * std::abs(g.second / g.first - px);
    }
  }
  return b3;
}

StratifiedB3Accumulator::StratifiedB3Accumulator(LatticeBox box, int half_width)
    : box_(std::move(box)), half_width_(half_width) {
  if (box_.num_sites() > 64) {
    throw std::invalid_argument("stratified b3 supports at most 64 sites");
  }
  for (std::size_t x = 0; x < box_.num_sites(); ++x) {
    outside_mask_.push_back(outside_mask(box_, x, half_width_));
  }
  bins_.resize(box_.num_sites());
  hits_.assign(box_.num_sites(), 0);
}

void StratifiedB3Accumulator::add(const PointField& f) {
  if (!(f.box == box_)) throw std::invalid_argument("point field box differs");
  const std::uint64_t pattern = pattern_mask(f);
  for (std::size_t x = 0; x < bins_.size(); ++x) {
    Bin& b = bins_[x][pattern & outside_mask_[x]];
    ++b.count;
    const bool on = (pattern >> x) & 1U;
    b.hits += on;
    hits_[x] += on;
  }
  ++samples_;
}

void StratifiedB3Accumulator::merge(const StratifiedB3Accumulator& o) {
  if (!(o.box_ == box_) || o.half_width_ != half_width_) {
    throw std::invalid_argument("cannot merge b3 statistics with different parameters");
  }
  for (std::size_t x = 0; x < bins_.size(); ++x) {
    for (const auto& [k, b] : o.bins_[x]) {
      bins_[x][k].count += b.count;
      bins_[x][k].hits += b.hits;
    }
    hits_[x] += o.hits_[x];
  }
  samples_ += o.samples_;
}

B3Estimate StratifiedB3Accumulator::estimate(std::uint64_t min_occupancy) const {
  B3Estimate e;
  e.method = B3Method::kStratified;
  if (samples_ == 0) return e;
  const auto s = static_cast<double>(samples_);
  double point = 0.0;
  bool any_populated = false;
  for (std::size_t x = 0; x < bins_.size(); ++x) {
    const double px = static_cast<double>(hits_[x]) / s;
    const double px_var = static_cast<double>(hits_[x] + 1) *
                          static_cast<double>(samples_ - hits_[x] + 1) / ((s + 2.0) * (s + 2.0)) / s;
    std::uint64_t other_count = 0, other_hits = 0;
    for (const auto& [key, b] : bins_[x]) {
      if (b.count < min_occupancy) {
        other_count += b.count;
        other_hits += b.hits;
        continue;
      }
      any_populated = true;
      const auto nb = static_cast<double>(b.count);
      const double w = nb / s;
      const double m = static_cast<double>(b.hits) / nb;
      const double m_var = static_cast<double>(b.hits + 1) *
                           static_cast<double>(b.count - b.hits + 1) / ((nb + 2.0) * (nb + 2.0)) / nb;
      const double se = std::sqrt(m_var + px_var);
      const double dev = std::abs(m - px);
      point += w * dev;
      e.lower += w * std::max(0.0, dev - 3.0 * se);
      e.upper += w * (dev + 3.0 * se);
    }
    if (other_count > 0) {
      const double w = static_cast<double>(other_count) / s;
      point += w * std::abs(static_cast<double>(other_hits) / static_cast<double>(other_count) - px);
      e.upper += w;
      e.unpopulated_mass += w;
    }
  }
  if (any_populated) e.point = point;
  return e;
}

Interval tv_bound(double b1, double b2, Interval b3, double sum_px_sq) {
  if (b1 < 0 || b2 < 0 || b3.lower < 0 || b3.upper < b3.lower || sum_px_sq < 0) {
    throw std::invalid_argument("tv_bound inputs must be nonnegative");
  }
  const double base = 4.0 * b1 + 4.0 * b2 + 4.0 * sum_px_sq;
  return {base + 2.0 * b3.lower, base + 2.0 * b3.upper};
}

double tv_bound(double b1, double b2, double b3, double sum_px_sq) {
  return tv_bound(b1, b2, Interval{b3, b3}, sum_px_sq).lower;
}

double exact_offset_pxy(const PatternLaw& law, const LatticeBox& box, const Site& offset) {
  const std::uint64_t positions = offset_positions(box, offset);
  if (positions == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < box.num_sites(); ++i) {
    auto j = box.index_of(box.site(i) + offset);
    if (!j) continue;
    const std::uint64_t both = (std::uint64_t{1} << i) | (std::uint64_t{1} << *j);
    for (const auto& [pattern, p] : law.prob) {
      if ((pattern & both) == both) total += p;
    }
  }
  return total / static_cast<double>(positions);
}

ExactChenStein exact_chen_stein(const ExactDistribution& dist, std::size_t n, Finiteness rule,
                                int half_width, PointVariant variant) {
  ExactChenStein out;
  const LatticeBox& box = dist.box;
  out.law = exact_point_process_law(dist, n, variant, rule);
  for (std::size_t i = 0; i < box.num_sites(); ++i) out.px.push_back(out.law.marginal(i));
  out.lambda = std::accumulate(out.px.begin(), out.px.end(), 0.0);
  for (double p : out.px) out.sum_px_sq += p * p;
  out.b1 = compute_b1(out.px, box, half_width);
  for (std::size_t i = 0; i < box.num_sites(); ++i) {
    for (const Site& y : neighborhood_with_half_width(box.site(i), half_width, box)) {
      const std::size_t j = *box.index_of(y);
      if (j == i) continue;
      const std::uint64_t both = (std::uint64_t{1} << i) | (std::uint64_t{1} << j);
      for (const auto& [pattern, p] : out.law.prob) {
        if ((pattern & both) == both) out.b2 += p;
      }
    }
  }
  out.b3 = exact_b3(out.law, box, half_width);
  out.bound = tv_bound(out.b1, out.b2, out.b3, out.sum_px_sq);
  const PatternLaw product = product_law(out.px);
  out.tv = exact_tv(out.law, product);
  out.tv_sup = exact_tv_sup(out.law, product);
  return out;
}

std::vector<double> poisson_pmf(double lambda, std::uint64_t min_k) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("Poisson mean must be finite and nonnegative");
  }
  std::vector<double> pmf;
  if (lambda == 0.0) {
    pmf.assign(min_k + 1, 0.0);
    pmf[0] = 1.0;
    return pmf;
  }
  const double log_lambda = std::log(lambda);
  double cumulative = 0.0;
  for (std::uint64_t k = 0;; ++k) {
    const double kd = static_cast<double>(k);
    const double p = std::exp(-lambda + kd * log_lambda - std::lgamma(kd + 1.0));
    pmf.push_back(p);
    cumulative += p;
    if (k >= min_k && kd > lambda && 1.0 - cumulative < 1e-12) break;
  }
  return pmf;
}

namespace {

double count_tv(const std::vector<std::uint64_t>& freq, std::uint64_t samples, double lambda) {
  const std::vector<double> pmf = poisson_pmf(lambda, freq.empty() ? 0 : freq.size() - 1);
  const auto s = static_cast<double>(samples);
  double tv = 0.0, covered = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    const double emp = k < freq.size() ? static_cast<double>(freq[k]) / s : 0.0;
    tv += std::abs(emp - pmf[k]);
    covered += pmf[k];
  }
  return tv + std::max(0.0, 1.0 - covered);
}

}  // namespace

PoissonComparison poisson_count_test(const std::map<std::uint64_t, std::uint64_t>& histogram,
                                     std::size_t bootstrap_reps, std::uint64_t seed) {
  PoissonComparison out;
  std::uint64_t max_k = 0;
  double sum = 0.0;
  for (const auto& [k, v] : histogram) {
    out.samples += v;
    sum += static_cast<double>(k) * static_cast<double>(v);
    if (v > 0) max_k = std::max(max_k, k);
  }
  if (out.samples == 0) throw std::invalid_argument("poisson_count_test needs at least one sample");
  out.lambda_hat = sum / static_cast<double>(out.samples);
  out.degenerate = out.lambda_hat == 0.0;
  std::vector<std::uint64_t> freq(max_k + 1, 0);
  std::vector<std::uint64_t> values;
  values.reserve(out.samples);
  for (const auto& [k, v] : histogram) {
    if (v == 0) continue;
    freq[k] += v;
    values.insert(values.end(), v, k);
  }
  out.tv = count_tv(freq, out.samples, out.lambda_hat);
  out.truncation = poisson_pmf(out.lambda_hat, max_k).size() - 1;
  out.ci_lower = out.ci_upper = out.tv;
  if (bootstrap_reps == 0 || out.degenerate) return out;

  Rng rng(seed);
  std::vector<double> reps;
  reps.reserve(bootstrap_reps);
  std::vector<std::uint64_t> bf;
  for (std::size_t r = 0; r < bootstrap_reps; ++r) {
    bf.assign(max_k + 1, 0);
    double bsum = 0.0;
    for (std::uint64_t i = 0; i < out.samples; ++i) {
      const std::uint64_t k = values[rng.uniform_int(values.size())];
      ++bf[k];
      bsum += static_cast<double>(k);
    }
    while (bf.size() > 1 && bf.back() == 0) bf.pop_back();
    reps.push_back(count_tv(bf, out.samples, bsum / static_cast<double>(out.samples)));
  }
  std::sort(reps.begin(), reps.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(reps.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, reps.size() - 1);
    return reps[lo] + (pos - static_cast<double>(lo)) * (reps[hi] - reps[lo]);
  };
  out.ci_lower = quantile(0.025);
  out.ci_upper = quantile(0.975);
  return out;
}

}  // namespace fkp
