#include "fkpoisson/surgery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "fkpoisson/exact.hpp"

namespace fkp {

SitePair first_pair(std::span<const Site> c, std::span<const Site> c2) {
  if (c.empty() || c2.empty()) throw std::invalid_argument("first_pair needs two nonempty sets");
  std::set<Site> seen(c.begin(), c.end());
  for (const Site& s : c2) {
    if (seen.contains(s)) throw std::invalid_argument("clusters overlap at " + s.str());
  }
  SitePair best{c.front(), c2.front()};
  for (const Site& u : c) {
    for (const Site& v : c2) {
      SitePair cand{u, v};
      if (pair_order(cand, best) < 0) best = cand;
    }
  }
  return best;
}

std::vector<Site> axis_path(const Site& u, const Site& v) {
  if (u.dim() != v.dim()) throw std::invalid_argument("axis_path endpoints differ in dimension");
  std::vector<Site> path{u};
  Site cur = u;
  for (int a = u.dim() - 1; a >= 0; --a) {
    const int step = v[a] > cur[a] ? 1 : -1;
    while (cur[a] != v[a]) {
      cur[a] += step;
      path.push_back(cur);
    }
  }
  return path;
}

namespace {

std::vector<std::size_t> cluster_of_site(const ClusterSet& cs, std::size_t site) {
  return cs.clusters[cs.cluster_of[site]].sites;
}

void require_cluster(const ClusterSet& cs, std::span<const std::size_t> c, const char* name) {
  if (c.empty()) throw std::invalid_argument(std::string(name) + " is empty");
  for (std::size_t i : c) {
    if (i >= cs.box.num_sites()) throw std::invalid_argument(std::string(name) + " has a site outside the box");
  }
  std::vector<std::size_t> sorted(c.begin(), c.end());
  std::sort(sorted.begin(), sorted.end());
  if (cluster_of_site(cs, sorted.front()) != sorted) {
    throw std::invalid_argument(std::string(name) + " is not a cluster of the configuration");
  }
}

SurgeryResult transform_labelled(const BondConfig& omega, std::span<const std::size_t> c, std::span<const std::size_t> c2) {
  const LatticeBox& box = omega.box();
  std::vector<Site> sc, sc2;
  for (std::size_t i : c) sc.push_back(box.site(i));
  for (std::size_t i : c2) sc2.push_back(box.site(i));

  SurgeryResult r;
  r.input = omega;
  r.output = omega;
  r.pair = first_pair(sc, sc2);
  r.path = axis_path(r.pair.first, r.pair.second);
  std::vector<std::size_t> idx;
  for (const Site& s : r.path) {
    auto i = box.index_of(s);
    if (!i) throw std::invalid_argument("surgery path leaves the box at " + s.str());
    idx.push_back(*i);
  }
  const std::size_t k = idx.size() - 1;
  std::set<std::size_t> path_bonds;
  for (std::size_t i = 0; i < k; ++i) path_bonds.insert(*box.bond_between(idx[i], idx[i + 1]));

  std::set<std::size_t> members(c.begin(), c.end());
  members.insert(c2.begin(), c2.end());
  for (std::size_t i = 1; i < k; ++i) {
    if (members.contains(idx[i])) {
      throw std::logic_error("surgery path meets a merged cluster at " + r.path[i].str());
    }
  }

  for (std::size_t b : path_bonds) {
    if (!omega.open(b)) {
      r.output.set(b, true);
      r.opened.push_back(b);
    }
  }
  std::set<std::size_t> closed;
  for (std::size_t i = 1; i < k; ++i) {
    for (const Incidence& inc : box.incident(idx[i])) {
      if (path_bonds.contains(inc.bond) || !omega.open(inc.bond)) continue;
      closed.insert(inc.bond);
    }
    members.insert(idx[i]);
  }
  for (std::size_t b : closed) r.output.set(b, false);
  r.closed.assign(closed.begin(), closed.end());
  r.merged.assign(members.begin(), members.end());
  return r;
}

}  // namespace

SurgeryResult transform(const BondConfig& omega, std::span<const std::size_t> c,
                        std::span<const std::size_t> c2) {
  const ClusterSet cs = label_clusters(omega);
  require_cluster(cs, c, "first cluster");
  require_cluster(cs, c2, "second cluster");
  if (cs.cluster_of[c.front()] == cs.cluster_of[c2.front()]) {
    throw std::invalid_argument("the two clusters coincide");
  }
  return transform_labelled(omega, c, c2);
}

SizeWindow size_window(const SurgeryResult& r, std::size_t n, double K) {
  const ClusterSet cs = label_clusters(r.input);
  const LatticeBox& box = r.input.box();
  SizeWindow w;
  w.c = cs.clusters[cs.cluster_of[*box.index_of(r.pair.first)]].size();
  w.c2 = cs.clusters[cs.cluster_of[*box.index_of(r.pair.second)]].size();
  w.merged = r.merged.size();
  w.k = r.path_length();
  w.additive = w.c + w.c2 <= w.merged && w.merged + 1 <= w.c + w.c2 + w.k;
  const double kln = K * std::log(static_cast<double>(n));
  w.hypotheses = n <= w.c && w.c < n * n && n <= w.c2 && w.c2 < n * n &&
                 static_cast<double>(w.k) <= kln;
  const auto m = static_cast<double>(w.merged);
  w.window = 2 * n <= w.merged && m < 4.0 * static_cast<double>(n) + kln;
  return w;
}

WeightRatio weight_ratio_check(const SurgeryResult& r, const FKParams& params) {
  WeightRatio w;
  w.log_ratio = log_weight(r.output, params) - log_weight(r.input, params);
  const std::size_t m = r.changed();
  if (m == 0) {
    w.log_floor = 0.0;
  } else {
    w.log_floor = static_cast<double>(m) * std::log(finite_energy_floor(params));
  }
  w.ratio = std::exp(w.log_ratio);
  w.floor = std::exp(w.log_floor);
  w.holds = w.log_ratio >= w.log_floor - 1e-9 * (1.0 + std::abs(w.log_floor));
  return w;
}

double antecedent_bound(std::size_t n, double K, int dim) {
  const double d = dim;
  const double nn = static_cast<double>(n);
  const double kln = K * std::log(nn);
  return std::pow(3.0 * nn * nn, d) * std::pow(2.0 * kln, d) * std::pow(2.0, 2.0 * d * kln);
}

AntecedentCount count_antecedents(const BondConfig& target, std::size_t n, double K,
                                  Finiteness rule, std::uint64_t cap) {
  if (n < 1) throw std::invalid_argument("count_antecedents needs n >= 1");
  const LatticeBox& box = target.box();
  const double kln = K * std::log(static_cast<double>(n));
  AntecedentCount out;

  struct Candidate {
    std::size_t u, v;
    std::vector<std::size_t> free_bonds;
  };
  std::vector<Candidate> candidates;
  std::uint64_t space = 0;
  for (std::size_t u = 0; u < box.num_sites(); ++u) {
    for (std::size_t v = 0; v < box.num_sites(); ++v) {
      const int dist = l1_distance(box.site(u), box.site(v));
      if (dist < 1 || static_cast<double>(dist) > kln) continue;
      ++out.candidate_pairs;
      const std::vector<Site> path = axis_path(box.site(u), box.site(v));
      std::vector<std::size_t> idx;
      for (const Site& s : path) idx.push_back(*box.index_of(s));
      std::set<std::size_t> path_bonds, touched;
      for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        path_bonds.insert(*box.bond_between(idx[i], idx[i + 1]));
      }
      bool consistent = true;
      for (std::size_t b : path_bonds) consistent = consistent && target.open(b);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (const Incidence& inc : box.incident(idx[i])) {
          touched.insert(inc.bond);
          const bool interior = i > 0 && i + 1 < idx.size();
          if (interior && !path_bonds.contains(inc.bond) && target.open(inc.bond)) consistent = false;
        }
      }
      if (!consistent) continue;
      if (touched.size() >= 63) throw ResourceLimitError("antecedent search space overflows", UINT64_MAX);
      space += std::uint64_t{1} << touched.size();
      if (space > cap) {
        throw ResourceLimitError("antecedent search needs more than " + std::to_string(cap) +
                                     " assignments",
                                 space);
      }
      candidates.push_back({u, v, std::vector<std::size_t>(touched.begin(), touched.end())});
    }
  }
  out.search_space = space;

  std::set<std::vector<std::uint8_t>> found;
  for (const Candidate& cand : candidates) {
    const std::size_t m = cand.free_bonds.size();
    BondConfig omega = target;
    for (std::uint64_t a = 0; a < (std::uint64_t{1} << m); ++a) {
      for (std::size_t j = 0; j < m; ++j) omega.set(cand.free_bonds[j], (a >> j) & 1U);
      const ClusterSet cs = label_clusters(omega);
      const std::size_t cu = cs.cluster_of[cand.u], cv = cs.cluster_of[cand.v];
      if (cu == cv) continue;
      const Cluster& c = cs.clusters[cu];
      const Cluster& c2 = cs.clusters[cv];
      auto ok = [&](const Cluster& cl) {
        return cl.finite(rule) && cl.size() >= n && cl.size() < n * n;
      };
      if (!ok(c) || !ok(c2)) continue;
      const SurgeryResult r = transform_labelled(omega, c.sites, c2.sites);
      if (*box.index_of(r.pair.first) != cand.u || *box.index_of(r.pair.second) != cand.v) continue;
      if (!(r.output == target)) continue;
      std::vector<std::uint8_t> bits(omega.bits().begin(), omega.bits().end());
      if (found.insert(bits).second) out.antecedents.push_back(omega);
    }
  }
  out.count = found.size();
  return out;
}

}  // namespace fkp

namespace fkp {

namespace {

struct ClosePair {
  std::size_t a, b;
};

std::vector<ClosePair> close_pairs(const ClusterSet& cs, std::size_t n, double limit,
                                   std::size_t max_size, Finiteness rule) {
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < cs.clusters.size(); ++c) {
    const Cluster& cl = cs.clusters[c];
    if (cl.size() >= n && cl.size() < max_size && cl.finite(rule)) eligible.push_back(c);
  }
  std::vector<ClosePair> out;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    const auto si = cs.sites_of(cs.clusters[eligible[i]]);
    for (std::size_t j = i + 1; j < eligible.size(); ++j) {
      const auto sj = cs.sites_of(cs.clusters[eligible[j]]);
      if (static_cast<double>(set_distance(si, sj)) <= limit) {
        out.push_back({eligible[i], eligible[j]});
      }
    }
  }
  return out;
}

}  // namespace

SurgeryScan surgery_scan(const FKParams& params, const LatticeBox& box, std::size_t n, double K,
                         std::size_t instances, std::uint64_t seed,
                         std::size_t max_configurations) {
  params.validate();
  const double limit = K * std::log(static_cast<double>(std::max<std::size_t>(n, 1)));
  const int d = box.dim();
  SurgeryScan out;
  out.min_log_margin = std::numeric_limits<double>::infinity();
  FKSampler chain(box, params, derive_seed(seed, 0));
  Rng pick(derive_seed(seed, 1));
  chain.run(default_burn_in(box));
  while (out.instances < instances) {
    if (out.configurations >= max_configurations) {
      throw std::runtime_error("surgery scan found only " + std::to_string(out.instances) +
                               " close pairs in " + std::to_string(out.configurations) +
                               " configurations");
    }
    chain.run(2);
    ++out.configurations;
    const BondConfig& omega = chain.state();
    const ClusterSet cs = label_clusters(omega);
    const auto pairs = close_pairs(cs, n, limit, std::numeric_limits<std::size_t>::max(),
                                   Finiteness::kAllFinite);
    if (pairs.empty()) continue;
    const ClosePair cp = pairs[pick.uniform_int(pairs.size())];
    const Cluster& c = cs.clusters[cp.a];
    const Cluster& c2 = cs.clusters[cp.b];
    const SurgeryResult r = transform(omega, c.sites, c2.sites);
    ++out.instances;

    const ClusterSet after = label_clusters(r.output);
    if (after.clusters[after.cluster_of[r.merged.front()]].sites != r.merged) ++out.merge_failures;
    const std::size_t k = r.path_length();
    if (r.changed() > 2 * static_cast<std::size_t>(d) * k) ++out.bond_bound_failures;
    out.max_changed = std::max(out.max_changed, r.changed());
    std::set<std::size_t> path_sites;
    for (const Site& s : r.path) path_sites.insert(*box.index_of(s));
    auto on_path = [&](std::size_t b) {
      const Bond& bd = box.bonds()[b];
      return path_sites.contains(bd.lo) || path_sites.contains(bd.hi);
    };
    for (std::size_t b : r.opened) out.locality_failures += !on_path(b);
    for (std::size_t b : r.closed) out.locality_failures += !on_path(b);
    std::size_t diff = 0;
    for (std::size_t b = 0; b < box.num_bonds(); ++b) diff += omega.open(b) != r.output.open(b);
    if (diff != r.changed()) ++out.locality_failures;

    const WeightRatio w = weight_ratio_check(r, params);
    if (!w.holds) ++out.weight_failures;
    out.min_log_margin = std::min(out.min_log_margin, w.log_ratio - w.log_floor);
    const SizeWindow sw = size_window(r, n, K);
    if (!sw.additive) ++out.additive_failures;
    if (sw.hypotheses) {
      ++out.hypothesis_cases;
      out.window_holds += sw.window;
    }
    const SurgeryResult again = transform(omega, c.sites, c2.sites);
    if (!(again.output == r.output) || again.opened != r.opened || again.closed != r.closed) {
      ++out.determinism_failures;
    }
  }
  return out;
}

std::vector<AntecedentRow> antecedent_scan(const FKParams& params, const LatticeBox& box,
                                           std::size_t n, double K, double generation_K,
                                           Finiteness rule, std::size_t instances,
                                           std::uint64_t seed, std::uint64_t cap) {
  params.validate();
  const double gen_limit = generation_K * std::log(static_cast<double>(n));
  std::vector<AntecedentRow> rows;
  FKSampler chain(box, params, derive_seed(seed, 0));
  Rng pick(derive_seed(seed, 1));
  chain.run(default_burn_in(box));
  const std::size_t max_configs = 50 * instances + 100;
  std::size_t constructed = 0;
  for (std::size_t t = 0; rows.size() < instances && t < max_configs; ++t) {
    chain.run(2);
    const BondConfig omega = chain.state();
    const ClusterSet cs = label_clusters(omega);
    const auto pairs = close_pairs(cs, n, gen_limit, n * n, rule);
    AntecedentRow row;
    BondConfig target = omega;
    if (!pairs.empty()) {
      const ClosePair cp = pairs[pick.uniform_int(pairs.size())];
      target = transform(omega, cs.clusters[cp.a].sites, cs.clusters[cp.b].sites).output;
      row.constructed = true;
    } else if (constructed * 2 < rows.size() + 1 && t + 1 < max_configs) {
      continue;  // keep at least half the targets constructive while samples last
    }
    const AntecedentCount ac = count_antecedents(target, n, K, rule, cap);
    row.count = ac.count;
    row.search_space = ac.search_space;
    row.bound = antecedent_bound(n, K, box.dim());
    row.within_bound = static_cast<double>(row.count) <= row.bound;
    if (row.constructed) {
      ++constructed;
      for (const BondConfig& a : ac.antecedents) row.preimage_found = row.preimage_found || a == omega;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fkp
