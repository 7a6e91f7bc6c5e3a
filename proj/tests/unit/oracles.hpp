#pragma once
// Test-side reference implementations. They share only box geometry with
// the library and are deliberately naive.

#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "fkpoisson/fk.hpp"
#include "fkpoisson/lattice.hpp"

namespace oracle {

using fkp::BondConfig;
using fkp::LatticeBox;
using fkp::Site;

/// Component id per site by breadth-first search over open bonds, plus
/// optional extra edges (boundary identifications).
inline std::vector<int> bfs_components(const BondConfig& omega,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& extra = {}) {
  const LatticeBox& box = omega.box();
  const std::size_t ns = box.num_sites();
  std::vector<std::vector<std::size_t>> adj(ns);
  const auto bonds = box.bonds();
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    if (!omega.open(b)) continue;
    adj[bonds[b].lo].push_back(bonds[b].hi);
    adj[bonds[b].hi].push_back(bonds[b].lo);
  }
  for (auto [a, b] : extra) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> comp(ns, -1);
  int next = 0;
  for (std::size_t s = 0; s < ns; ++s) {
    if (comp[s] >= 0) continue;
    std::queue<std::size_t> q;
    q.push(s);
    comp[s] = next;
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t v : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = next;
          q.push(v);
        }
      }
    }
    ++next;
  }
  return comp;
}

inline int count_components(const std::vector<int>& comp) {
  return comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
}

/// Sites whose coordinates touch a face of the box.
inline std::vector<std::size_t> face_sites(const LatticeBox& box) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < box.num_sites(); ++s) {
    const Site x = box.site(s);
    bool face = false;
    for (int a = 0; a < box.dim(); ++a) {
      face = face || x[a] == box.lower()[a] || x[a] == box.lower()[a] + box.sides()[a] - 1;
    }
    if (face) out.push_back(s);
  }
  return out;
}

/// Unnormalised FK weight with free (wired = false) or wired boundary.
inline double fk_weight(const BondConfig& omega, double p, double q, bool wired) {
  std::vector<std::pair<std::size_t, std::size_t>> extra;
  if (wired) {
    const auto f = face_sites(omega.box());
    for (std::size_t i = 1; i < f.size(); ++i) extra.push_back({f[0], f[i]});
  }
  const int cl = count_components(bfs_components(omega, extra));
  double w = std::pow(q, cl);
  for (std::size_t b = 0; b < omega.size(); ++b) w *= omega.open(b) ? p : 1.0 - p;
  return w;
}

/// Normalised law over bond masks.
inline std::vector<double> fk_law(const LatticeBox& box, double p, double q, bool wired) {
  const std::size_t m = box.num_bonds();
  std::vector<double> w(std::size_t{1} << m);
  double z = 0.0;
  for (std::uint64_t mask = 0; mask < w.size(); ++mask) {
    w[mask] = fk_weight(BondConfig::from_mask(box, mask), p, q, wired);
    z += w[mask];
  }
  for (double& v : w) v /= z;
  return w;
}

inline double l1(const std::map<std::uint64_t, double>& a, const std::map<std::uint64_t, double>& b) {
  std::set<std::uint64_t> keys;
  for (const auto& [k, v] : a) keys.insert(k);
  for (const auto& [k, v] : b) keys.insert(k);
  double s = 0.0;
  for (auto k : keys) {
    const double x = a.contains(k) ? a.at(k) : 0.0;
    const double y = b.contains(k) ? b.at(k) : 0.0;
    s += std::abs(x - y);
  }
  return s;
}

}  // namespace oracle
