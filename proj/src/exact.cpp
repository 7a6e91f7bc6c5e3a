#include "fkpoisson/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>


namespace fkp {

double ExactDistribution::z() const { return std::exp(log_z); }

ExactDistribution enumerate(const LatticeBox& box, const FKParams& params) {
  params.validate();
  const std::size_t m = box.num_bonds();
  if (m > kMaxEnumerationBonds) {
    throw ResourceLimitError("exact enumeration refused: " + std::to_string(m) +
                                 " bonds exceeds the cap of " +
                                 std::to_string(kMaxEnumerationBonds),
                             std::uint64_t{1} << std::min<std::size_t>(m, 63));
  }
  const ResolvedBoundary rb = resolve(params.boundary, box);
  const std::uint64_t count = std::uint64_t{1} << m;
  std::vector<double> logw(count);
  auto bonds = box.bonds();
  const std::size_t ns = box.num_sites();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const double lp = params.p > 0.0 ? std::log(params.p) : kNegInf;
  const double lq = params.p < 1.0 ? std::log1p(-params.p) : kNegInf;
  const double lnq = std::log(params.q);
  std::vector<std::size_t> parent(ns);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    std::size_t comps = ns;
    auto unite = [&](std::size_t a, std::size_t b) {
      a = find(a);
      b = find(b);
      if (a != b) {
        parent[b] = a;
        --comps;
      }
    };
    for (const auto& cls : rb.members) {
      for (std::size_t i = 1; i < cls.size(); ++i) unite(cls[0], cls[i]);
    }
    std::size_t open = 0;
    for (std::size_t e = 0; e < m; ++e) {
      if ((mask >> e) & 1U) {
        ++open;
        unite(bonds[e].lo, bonds[e].hi);
      }
    }
    double lw = 0.0;
    if (open > 0) lw += static_cast<double>(open) * lp;
    if (open < m) lw += static_cast<double>(m - open) * lq;
    lw += static_cast<double>(comps) * lnq;
    logw[mask] = lw;
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double s = 0.0;
  for (double lw : logw) s += std::exp(lw - mx);
  ExactDistribution dist;
  dist.box = box;
  dist.params = params;
  dist.log_z = mx + std::log(s);
  dist.prob.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) dist.prob[i] = std::exp(logw[i] - dist.log_z);
  return dist;
}

double event_probability(const ExactDistribution& dist,
                         const std::function<bool(const BondConfig&)>& predicate) {
  double total = 0.0;
  for (std::uint64_t i = 0; i < dist.prob.size(); ++i) {
    if (dist.prob[i] > 0.0 && predicate(dist.config(i))) total += dist.prob[i];
  }
  return total;
}

double PatternLaw::marginal(std::size_t site) const {
  double m = 0.0;
  for (const auto& [pat, pr] : prob) {
    if ((pat >> site) & 1U) m += pr;
  }
  return m;
}

double PatternLaw::total() const {
  double t = 0.0;
  for (const auto& kv : prob) t += kv.second;
  return t;
}

PatternLaw exact_point_process_law(const ExactDistribution& dist, std::size_t n,
                                   PointVariant variant, Finiteness rule) {
  if (dist.box.num_sites() > 64) throw std::invalid_argument("pattern laws need at most 64 sites");
  PatternLaw law;
  law.num_sites = dist.box.num_sites();
  for (std::uint64_t i = 0; i < dist.prob.size(); ++i) {
    if (dist.prob[i] <= 0.0) continue;
    const PointField f = point_process(label_clusters(dist.config(i)), n, variant, rule);
    law.prob[pattern_mask(f)] += dist.prob[i];
  }
  return law;
}

PatternLaw product_law(std::span<const double> marginals) {
  if (marginals.size() > 24) throw ResourceLimitError("product law over more than 24 sites", marginals.size());
  PatternLaw law;
  law.num_sites = marginals.size();
  const std::uint64_t count = std::uint64_t{1} << marginals.size();
  for (std::uint64_t pat = 0; pat < count; ++pat) {
    double pr = 1.0;
    for (std::size_t i = 0; i < marginals.size(); ++i) {
      pr *= ((pat >> i) & 1U) ? marginals[i] : 1.0 - marginals[i];
    }
    if (pr > 0.0) law.prob[pat] = pr;
  }
  return law;
}

namespace {

template <typename F>
void for_each_pattern(const PatternLaw& a, const PatternLaw& b, F&& f) {
  if (a.num_sites != b.num_sites) {
    throw std::invalid_argument("pattern laws live on different site spaces");
  }
  std::set<std::uint64_t> keys;
  for (const auto& kv : a.prob) keys.insert(kv.first);
  for (const auto& kv : b.prob) keys.insert(kv.first);
  for (std::uint64_t k : keys) {
    auto ia = a.prob.find(k);
    auto ib = b.prob.find(k);
    f(ia == a.prob.end() ? 0.0 : ia->second, ib == b.prob.end() ? 0.0 : ib->second);
  }
}

}  // namespace

double exact_tv(const PatternLaw& a, const PatternLaw& b) {
  double s = 0.0;
  for_each_pattern(a, b, [&](double pa, double pb) { s += std::abs(pa - pb); });
  return s;
}

double exact_tv_sup(const PatternLaw& a, const PatternLaw& b) {
  // The event {P1 > P2} maximises P1(A) - P2(A); its complement maximises
  // the reverse difference, and both maxima are equal.
  double pa_on = 0.0, pb_on = 0.0, pa_off = 0.0, pb_off = 0.0;
  for_each_pattern(a, b, [&](double pa, double pb) {
    if (pa > pb) {
      pa_on += pa;
      pb_on += pb;
    } else {
      pa_off += pa;
      pb_off += pb;
    }
  });
  return 2.0 * std::max(std::abs(pa_on - pb_on), std::abs(pb_off - pa_off));
}

TwoClusterRow two_cluster_check(const ExactDistribution& dist, std::size_t n, const Site& x,
                                 const Site& y, Finiteness rule) {
  const LatticeBox& box = dist.box;
  auto ix = box.index_of(x);
  auto iy = box.index_of(y);
  if (!ix || !iy) throw std::invalid_argument("two_cluster_check: sites must lie in the box");
  const std::size_t ic = *box.index_of(box.center());
  TwoClusterRow row;
  row.x = x;
  row.y = y;
  for (std::uint64_t i = 0; i < dist.prob.size(); ++i) {
    const double pr = dist.prob[i];
    if (pr <= 0.0) continue;
    const ClusterSet cs = label_clusters(dist.config(i));
    const Cluster& cx = cs.clusters[cs.cluster_of[*ix]];
    const Cluster& cy = cs.clusters[cs.cluster_of[*iy]];
    const Cluster& cc = cs.clusters[cs.cluster_of[ic]];
    if (cs.cluster_of[*ix] != cs.cluster_of[*iy] && cx.finite(rule) && cy.finite(rule) &&
        cx.size() >= n && cy.size() >= n) {
      row.lhs += pr;
    }
    if (cc.finite(rule) && cc.size() >= 2 * n) row.rhs += pr;
  }
  row.holds = row.lhs <= row.rhs;
  return row;
}

TwoClusterRow two_cluster_check(const LatticeBox& box, const FKParams& params, std::size_t n,
                                 const Site& x, const Site& y, Finiteness rule) {
  return two_cluster_check(enumerate(box, params), n, x, y, rule);
}

std::vector<TwoClusterRow> two_cluster_table(const ExactDistribution& dist, std::size_t n,
                                              Finiteness rule) {
  const LatticeBox& box = dist.box;
  const std::size_t ns = box.num_sites();
  const std::size_t ic = *box.index_of(box.center());
  std::vector<double> lhs(ns * ns, 0.0);
  double rhs = 0.0;
  for (std::uint64_t i = 0; i < dist.prob.size(); ++i) {
    const double pr = dist.prob[i];
    if (pr <= 0.0) continue;
    const ClusterSet cs = label_clusters(dist.config(i));
    std::vector<std::uint8_t> ok(ns);
    for (std::size_t s = 0; s < ns; ++s) {
      const Cluster& c = cs.clusters[cs.cluster_of[s]];
      ok[s] = c.finite(rule) && c.size() >= n;
    }
    for (std::size_t a = 0; a < ns; ++a) {
      if (!ok[a]) continue;
      for (std::size_t b = a + 1; b < ns; ++b) {
        if (ok[b] && cs.cluster_of[a] != cs.cluster_of[b]) lhs[a * ns + b] += pr;
      }
    }
    const Cluster& cc = cs.clusters[cs.cluster_of[ic]];
    if (cc.finite(rule) && cc.size() >= 2 * n) rhs += pr;
  }
  std::vector<TwoClusterRow> rows;
  for (std::size_t a = 0; a < ns; ++a) {
    for (std::size_t b = a + 1; b < ns; ++b) {
      TwoClusterRow r;
      r.x = box.site(a);
      r.y = box.site(b);
      r.lhs = lhs[a * ns + b];
      r.rhs = rhs;
      r.holds = r.lhs <= r.rhs;
      rows.push_back(r);
    }
  }
  return rows;
}

namespace {

struct JointAtoms {
  std::size_t atoms_a = 1;
  std::size_t atoms_b = 1;
  std::vector<double> joint;  // joint[a * atoms_b + b]
  std::vector<double> mu;
  std::vector<double> nu;
};

JointAtoms joint_atoms(const ExactDistribution& dist, std::span<const std::size_t> ra,
                       std::span<const std::size_t> rb, std::size_t cap_b) {
  const std::size_t m = dist.box.num_bonds();
  std::set<std::size_t> sa(ra.begin(), ra.end()), sb(rb.begin(), rb.end());
  if (sa.size() != ra.size() || sb.size() != rb.size()) {
    throw std::invalid_argument("mixing regions must not repeat bonds");
  }
  for (std::size_t e : sa) {
    if (e >= m) throw std::invalid_argument("mixing region bond out of range");
    if (sb.contains(e)) throw std::invalid_argument("mixing regions overlap");
  }
  for (std::size_t e : sb) {
    if (e >= m) throw std::invalid_argument("mixing region bond out of range");
  }
  if (ra.size() > kMaxMixingRegionBonds || rb.size() > cap_b) {
    throw ResourceLimitError("mixing region exceeds the bond cap",
                             std::max(ra.size(), rb.size()));
  }
  JointAtoms j;
  j.atoms_a = std::size_t{1} << ra.size();
  j.atoms_b = std::size_t{1} << rb.size();
  j.joint.assign(j.atoms_a * j.atoms_b, 0.0);
  for (std::uint64_t cfg = 0; cfg < dist.prob.size(); ++cfg) {
    const double pr = dist.prob[cfg];
    if (pr <= 0.0) continue;
    std::size_t a = 0, b = 0;
    for (std::size_t k = 0; k < ra.size(); ++k) a |= ((cfg >> ra[k]) & 1U) << k;
    for (std::size_t k = 0; k < rb.size(); ++k) b |= ((cfg >> rb[k]) & 1U) << k;
    j.joint[a * j.atoms_b + b] += pr;
  }
  j.mu.assign(j.atoms_a, 0.0);
  j.nu.assign(j.atoms_b, 0.0);
  for (std::size_t a = 0; a < j.atoms_a; ++a) {
    for (std::size_t b = 0; b < j.atoms_b; ++b) {
      j.mu[a] += j.joint[a * j.atoms_b + b];
      j.nu[b] += j.joint[a * j.atoms_b + b];
    }
  }
  return j;
}

}  // namespace

double exact_ratio_mixing(const ExactDistribution& dist, std::span<const std::size_t> region_a,
                          std::span<const std::size_t> region_b) {
  const JointAtoms j = joint_atoms(dist, region_a, region_b, kMaxMixingRegionBonds);
  // For fixed F the ratio P(E&F)/(P(E)P(F)) is a ratio of sums over the
  // atoms of E, so it lies between its values on single atoms; the same
  // holds in F. The supremum over all event pairs is attained on atoms.
  double best = 0.0;
  for (std::size_t a = 0; a < j.atoms_a; ++a) {
    if (j.mu[a] <= 0.0) continue;
    for (std::size_t b = 0; b < j.atoms_b; ++b) {
      if (j.nu[b] <= 0.0) continue;
      best = std::max(best, std::abs(j.joint[a * j.atoms_b + b] / (j.mu[a] * j.nu[b]) - 1.0));
    }
  }
  return best;
}

double exact_weak_mixing(const ExactDistribution& dist, std::span<const std::size_t> region_a,
                         std::span<const std::size_t> region_b) {
  const JointAtoms j = joint_atoms(dist, region_a, region_b, 4);
  // For fixed F, sup_E |P(E|F) - P(E)| is the positive part of the signed
  // measure P(.|F) - P(.) over the atoms of region_a.
  double best = 0.0;
  const std::uint64_t subsets = std::uint64_t{1} << j.atoms_b;
  std::vector<double> cond(j.atoms_a);
  for (std::uint64_t f = 1; f < subsets; ++f) {
    double pf = 0.0;
    std::fill(cond.begin(), cond.end(), 0.0);
    for (std::size_t b = 0; b < j.atoms_b; ++b) {
      if (!((f >> b) & 1U)) continue;
      pf += j.nu[b];
      for (std::size_t a = 0; a < j.atoms_a; ++a) cond[a] += j.joint[a * j.atoms_b + b];
    }
    if (pf <= 0.0) continue;
    double pos = 0.0;
    for (std::size_t a = 0; a < j.atoms_a; ++a) pos += std::max(0.0, cond[a] / pf - j.mu[a]);
    best = std::max(best, pos);
  }
  return best;
}

}  // namespace fkp
