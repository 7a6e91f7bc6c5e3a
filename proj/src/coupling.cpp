#include "fkpoisson/coupling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "fkpoisson/exact.hpp"
#include "fkpoisson/stats.hpp"

namespace fkp {

Coloring color_sites(const BondConfig& omega1, const BondConfig& omega2) {
  if (!(omega1.box() == omega2.box())) throw std::invalid_argument("colouring needs configurations on the same box");
  Coloring c;
  c.box = omega1.box();
  c.white.assign(c.box.num_sites(), 1);
  for (std::size_t i = 0; i < c.box.num_sites(); ++i) {
    for (const Incidence& inc : c.box.incident(i)) {
      if (!omega1.open(inc.bond) || !omega2.open(inc.bond)) {
        c.white[i] = 0;
        break;
      }
    }
  }
  return c;
}

namespace {

std::vector<std::size_t> star_in_box(const LatticeBox& box, std::size_t site) {
  std::vector<std::size_t> out;
  for (const Site& y : star_neighbors(box.site(site))) {
    if (auto j = box.index_of(y)) out.push_back(*j);
  }
  return out;
}

std::vector<std::size_t> to_sorted(const std::vector<std::uint8_t>& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.push_back(i);
  }
  return out;
}

std::vector<std::uint8_t> to_mask(std::size_t n, std::span<const std::size_t> sites) {
  std::vector<std::uint8_t> m(n, 0);
  for (std::size_t s : sites) {
    if (s >= n) throw std::invalid_argument("site index outside the box");
    m[s] = 1;
  }
  return m;
}

bool connected(const LatticeBox& box, std::span<const std::size_t> set, bool star) {
  if (set.empty()) return true;
  const std::vector<std::uint8_t> in = to_mask(box.num_sites(), set);
  std::vector<std::uint8_t> seen(box.num_sites(), 0);
  std::deque<std::size_t> queue{set.front()};
  seen[set.front()] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    std::vector<std::size_t> next;
    if (star) {
      next = star_in_box(box, s);
    } else {
      for (const Incidence& inc : box.incident(s)) next.push_back(inc.neighbor);
    }
    for (std::size_t t : next) {
      if (in[t] && !seen[t]) {
        seen[t] = 1;
        ++reached;
        queue.push_back(t);
      }
    }
  }
  return reached == set.size();
}

}  // namespace

std::vector<std::size_t> black_cluster(const Coloring& coloring, std::span<const std::size_t> v) {
  const LatticeBox& box = coloring.box;
  std::vector<std::uint8_t> in = to_mask(box.num_sites(), v);
  std::deque<std::size_t> queue(v.begin(), v.end());
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    for (std::size_t t : star_in_box(box, s)) {
      if (!in[t] && coloring.is_black(t)) {
        in[t] = 1;
        queue.push_back(t);
      }
    }
  }
  return to_sorted(in);
}

InteriorRegion interior_region(const Coloring& coloring, std::span<const std::size_t> b,
                               std::span<const std::size_t> gamma) {
  const LatticeBox& box = coloring.box;
  const std::vector<std::uint8_t> in_b = to_mask(box.num_sites(), b);
  std::vector<std::uint8_t> in_i(box.num_sites(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t g : gamma) {
    if (g >= box.num_sites()) throw std::invalid_argument("Gamma site outside the box");
    if (!in_b[g] && !in_i[g]) {
      in_i[g] = 1;
      queue.push_back(g);
    }
  }
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    for (const Incidence& inc : box.incident(s)) {
      if (!in_b[inc.neighbor] && !in_i[inc.neighbor]) {
        in_i[inc.neighbor] = 1;
        queue.push_back(inc.neighbor);
      }
    }
  }
  InteriorRegion r;
  r.interior = to_sorted(in_i);
  for (std::size_t s : r.interior) {
    for (std::size_t t : star_in_box(box, s)) {
      if (in_b[t]) {
        r.boundary.push_back(s);
        break;
      }
    }
  }
  return r;
}

std::vector<std::size_t> interior_boundary(const Coloring& coloring, std::span<const std::size_t> b,
                                           std::span<const std::size_t> gamma) {
  return interior_region(coloring, b, gamma).boundary;
}

std::vector<std::size_t> gamma_indices(const LatticeBox& box, std::span<const Site> gamma) {
  std::vector<std::size_t> out;
  for (const Site& s : gamma) {
    auto i = box.index_of(s);
    if (!i) throw std::invalid_argument("Gamma is not contained in the box: " + s.str());
    out.push_back(*i);
  }
  return out;
}

CouplingOutcome analyze_coloring(const Coloring& coloring, std::span<const std::size_t> black,
                                 std::span<const std::size_t> gamma) {
  CouplingOutcome o;
  o.coloring = coloring;
  o.black.assign(black.begin(), black.end());
  o.region = interior_region(coloring, black, gamma);
  const std::vector<std::uint8_t> in_b = to_mask(coloring.box.num_sites(), black);
  const std::vector<std::uint8_t> in_d = to_mask(coloring.box.num_sites(), o.region.boundary);
  o.k_event = true;
  for (std::size_t g : gamma) {
    if (in_b[g] || in_d[g]) o.k_event = false;
  }
  return o;
}

CouplingOutcome analyze_pair(const BondConfig& omega1, const BondConfig& omega2,
                             std::span<const Site> gamma) {
  const Coloring c = color_sites(omega1, omega2);
  const std::vector<std::size_t> g = gamma_indices(c.box, gamma);
  const std::vector<std::size_t> b = black_cluster(c, c.box.boundary_indices());
  return analyze_coloring(c, b, g);
}

bool k_event(const BondConfig& omega1, const BondConfig& omega2, std::span<const Site> gamma) {
  return analyze_pair(omega1, omega2, gamma).k_event;
}

ClaimCheck check_claims(const CouplingOutcome& o, std::span<const std::size_t> gamma) {
  const LatticeBox& box = o.coloring.box;
  const auto& d = o.region.boundary;
  ClaimCheck c;
  c.star_connected = connected(box, d, true);
  c.nn_connected = connected(box, d, false);
  c.all_white = std::all_of(d.begin(), d.end(), [&](std::size_t s) { return o.coloring.is_white(s); });

  Coloring recoloured = o.coloring;
  for (std::size_t s : o.region.interior) recoloured.white[s] = 1;
  const std::vector<std::size_t> b2 = black_cluster(recoloured, box.boundary_indices());
  c.measurable = interior_region(recoloured, b2, gamma).boundary == d;

  const std::vector<std::uint8_t> in_i = to_mask(box.num_sites(), o.region.interior);
  const std::vector<std::uint8_t> in_d = to_mask(box.num_sites(), d);
  c.boundary_adjacent = true;
  for (std::size_t s = 0; s < box.num_sites() && c.boundary_adjacent; ++s) {
    if (in_i[s]) continue;
    bool outer = false, touches_d = false;
    for (const Incidence& inc : box.incident(s)) {
      outer = outer || in_i[inc.neighbor];
      touches_d = touches_d || in_d[inc.neighbor];
    }
    if (outer && !touches_d) c.boundary_adjacent = false;
  }
  return c;
}

std::vector<GammaSpec> centered_gammas(const LatticeBox& box, std::span<const int> sides) {
  const Site c = box.center();
  std::vector<GammaSpec> out;
  for (int side : sides) {
    if (side < 1 || side % 2 == 0) throw std::invalid_argument("Gamma sides must be odd and positive");
    const int h = side / 2;
    GammaSpec g;
    g.label = std::to_string(side);
    for (int a = 1; a < box.dim(); ++a) g.label += "x" + std::to_string(side);
    Site lo = c;
    for (int a = 0; a < box.dim(); ++a) lo[a] -= h;
    LatticeBox cube(lo, std::vector<int>(box.dim(), side));
    for (std::size_t i = 0; i < cube.num_sites(); ++i) g.sites.push_back(cube.site(i));
    gamma_indices(box, g.sites);
    out.push_back(std::move(g));
  }
  return out;
}

ExponentialFit fit_exponential(std::span<const double> distance, std::span<const double> value,
                               std::optional<double> log_prefactor) {
  if (distance.size() != value.size()) throw std::invalid_argument("fit inputs differ in length");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] > 0.0) {
      x.push_back(distance[i]);
      y.push_back(std::log(value[i]));
    }
  }
  ExponentialFit f;
  f.points = x.size();
  if (!log_prefactor) {
    if (x.size() < 2) return f;
    const LinearFit lf = least_squares(x, y);
    f.rate = -lf.slope;
    f.r_squared = lf.r_squared;
    return f;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * (y[i] - *log_prefactor);
    sxx += x[i] * x[i];
  }
  if (sxx == 0.0) return f;
  f.rate = -sxy / sxx;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = *log_prefactor - *f.rate * x[i];
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return f;
}

InfluenceDecay influence_decay(double p, double q, const LatticeBox& box,
                               const BoundaryCondition& eta, const BoundaryCondition& xi,
                               std::span<const GammaSpec> schedule, std::size_t event_bond,
                               const SamplingPlan& plan, std::uint64_t seed) {
  if (event_bond >= box.num_bonds()) throw std::invalid_argument("event bond outside the box");
  if (plan.samples < 2) throw std::invalid_argument("influence_decay needs at least two pairs");
  InfluenceDecay out;
  out.eta_params = FKParams{p, q, eta};
  out.xi_params = FKParams{p, q, xi};
  out.event_bond = event_bond;
  out.pairs = plan.samples;

  std::vector<std::vector<std::size_t>> gammas;
  std::vector<Site> boundary_sites;
  for (std::size_t i : box.boundary_indices()) boundary_sites.push_back(box.site(i));
  for (const GammaSpec& g : schedule) {
    gammas.push_back(gamma_indices(box, g.sites));
    InfluenceRow row;
    row.label = g.label;
    row.distance = set_distance(g.sites, boundary_sites);
    out.rows.push_back(row);
  }

  FKSampler s1(box, out.eta_params, derive_seed(seed, 0));
  FKSampler s2(box, out.xi_params, derive_seed(seed, 1));
  const std::size_t burn = plan.burn_in ? plan.burn_in : default_burn_in(box);
  s1.run(burn);
  s2.run(burn);
  std::uint64_t e1 = 0, e2 = 0;
  for (std::size_t t = 0; t < plan.samples; ++t) {
    if (t > 0) {
      s1.run(plan.thinning);
      s2.run(plan.thinning);
    }
    e1 += s1.state().open(event_bond);
    e2 += s2.state().open(event_bond);
    const Coloring c = color_sites(s1.state(), s2.state());
    const std::vector<std::size_t> b = black_cluster(c, box.boundary_indices());
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      const CouplingOutcome o = analyze_coloring(c, b, gammas[g]);
      if (!o.k_event) continue;
      ++out.rows[g].k_count;
      if (!check_claims(o, gammas[g]).passes()) ++out.rows[g].claim_failures;
    }
  }

  const std::uint64_t n = plan.samples;
  std::vector<double> dist, diffs, misses;
  for (InfluenceRow& row : out.rows) {
    row.phi_eta = static_cast<double>(e1) / static_cast<double>(n);
    row.phi_xi = static_cast<double>(e2) / static_cast<double>(n);
    row.diff = std::abs(row.phi_eta - row.phi_xi);
    row.diff_se = std::hypot(binomial_se(e1, n), binomial_se(e2, n));
    row.p_k = static_cast<double>(row.k_count) / static_cast<double>(n);
    row.p_k_se = binomial_se(row.k_count, n);
    row.inequality_holds = row.diff <= (1.0 - row.p_k) + 3.0 * std::hypot(row.diff_se, row.p_k_se);
    dist.push_back(row.distance);
    diffs.push_back(row.diff);
    misses.push_back(1.0 - row.p_k);
  }
  const double boundary = static_cast<double>(box.boundary_indices().size());
  out.diff_fit = fit_exponential(dist, diffs, std::log(2.0 * boundary));
  out.k_fit = fit_exponential(dist, misses, std::log(boundary));
  return out;
}

std::vector<RegionPair> axis_region_pairs(const LatticeBox& box, const Site& first,
                                          std::span<const int> separations) {
  const int axis = box.dim() - 1;
  auto bond_at = [&](Site s) {
    Site t = s;
    t[axis] += 1;
    auto i = box.index_of(s);
    auto j = box.index_of(t);
    if (!i || !j) throw std::invalid_argument("region bond at " + s.str() + " leaves the box");
    return *box.bond_between(*i, *j);
  };
  std::vector<RegionPair> out;
  for (int s : separations) {
    if (s < 1) throw std::invalid_argument("separations must be positive");
    Site second = first;
    second[axis] += s;
    out.push_back({{bond_at(first)}, {bond_at(second)}, static_cast<double>(s)});
  }
  return out;
}

namespace {

using Cells = std::array<double, 4>;  // index 2 * state(e) + state(f)

// value and delta-method standard error of g at the cell frequencies.
std::pair<double, double> delta_method(const std::function<double(const Cells&)>& g,
                                       const Cells& pi, double n) {
  const double v = g(pi);
  Cells grad{};
  for (int k = 0; k < 4; ++k) {
    const double h = 1e-7;
    Cells up = pi, dn = pi;
    up[k] += h;
    dn[k] -= h;
    grad[k] = (g(up) - g(dn)) / (2.0 * h);
  }
  double var = 0.0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const double cov = (a == b ? pi[a] : 0.0) - pi[a] * pi[b];
      var += grad[a] * grad[b] * cov;
    }
  }
  return {v, std::sqrt(std::max(0.0, var) / n)};
}

}  // namespace

MixingScan mixing_scan(const FKParams& params, const LatticeBox& box,
                       std::span<const RegionPair> pairs, const SamplingPlan& plan,
                       std::uint64_t seed, bool exact_crosscheck) {
  params.validate();
  if (plan.samples < 2) throw std::invalid_argument("mixing_scan needs at least two samples");
  MixingScan out;
  out.params = params;
  out.samples = plan.samples;

  struct Table {
    std::size_t e, f;
    std::array<std::uint64_t, 4> count{};
  };
  std::vector<std::vector<Table>> tables(pairs.size());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    if (pairs[r].a.empty() || pairs[r].b.empty()) throw std::invalid_argument("empty mixing region");
    for (std::size_t e : pairs[r].a) {
      for (std::size_t f : pairs[r].b) {
        if (e >= box.num_bonds() || f >= box.num_bonds()) throw std::invalid_argument("region bond outside the box");
        if (e == f) throw std::invalid_argument("mixing regions overlap");
        tables[r].push_back({e, f, {}});
      }
    }
  }

  FKSampler sampler(box, params, seed);
  sampler.run(plan.burn_in ? plan.burn_in : default_burn_in(box));
  for (std::size_t t = 0; t < plan.samples; ++t) {
    if (t > 0) sampler.run(plan.thinning);
    const BondConfig& w = sampler.state();
    for (auto& row : tables) {
      for (Table& tb : row) ++tb.count[2 * w.open(tb.e) + w.open(tb.f)];
    }
  }

  std::optional<ExactDistribution> dist;
  if (exact_crosscheck && box.num_bonds() <= kMaxEnumerationBonds) dist = enumerate(box, params);

  const auto n = static_cast<double>(plan.samples);
  std::vector<double> seps, weak_vals, ratio_vals;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    MixingRow row;
    row.separation = pairs[r].separation;
    double best_weak = -1.0, best_ratio = -1.0;
    for (const Table& tb : tables[r]) {
      Cells pi{};
      for (int k = 0; k < 4; ++k) pi[k] = static_cast<double>(tb.count[k]) / n;
      for (int se = 0; se < 2; ++se) {
        for (int sf = 0; sf < 2; ++sf) {
          auto pe = [se](const Cells& c) { return c[2 * se] + c[2 * se + 1]; };
          auto pf = [sf](const Cells& c) { return c[sf] + c[2 + sf]; };
          auto pef = [se, sf](const Cells& c) { return c[2 * se + sf]; };
          if (pf(pi) <= 0.0 || pe(pi) <= 0.0) {
            row.skipped = true;
            continue;
          }
          auto weak = [&](const Cells& c) { return pef(c) / pf(c) - pe(c); };
          auto ratio = [&](const Cells& c) { return pef(c) / (pe(c) * pf(c)) - 1.0; };
          const auto [wv, wse] = delta_method(weak, pi, n);
          const auto [rv, rse] = delta_method(ratio, pi, n);
          if (std::abs(wv) > best_weak) {
            best_weak = std::abs(wv);
            row.weak = best_weak;
            row.weak_se = wse;
          }
          if (std::abs(rv) > best_ratio) {
            best_ratio = std::abs(rv);
            row.ratio = best_ratio;
            row.ratio_se = rse;
          }
        }
      }
    }
    if (dist) {
      row.exact_ratio = exact_ratio_mixing(*dist, pairs[r].a, pairs[r].b);
      if (pairs[r].b.size() <= 4) row.exact_weak = exact_weak_mixing(*dist, pairs[r].a, pairs[r].b);
    }
    seps.push_back(row.separation);
    weak_vals.push_back(row.weak);
    ratio_vals.push_back(row.ratio);
    out.rows.push_back(row);
  }
  out.weak_fit = fit_exponential(seps, weak_vals);
  out.ratio_fit = fit_exponential(seps, ratio_vals);
  return out;
}

namespace {

void write_fit(std::ostream& os, const char* name, const ExponentialFit& f) {
  os << "# " << name << "_rate=";
  if (f.rate) {
    os << *f.rate;
  } else {
    os << "NA";
  }
  os << " r_squared=" << f.r_squared << " points=" << f.points << '\n';
}

}  // namespace

void write_influence_csv(std::ostream& os, const InfluenceDecay& t) {
  os << std::setprecision(10);
  write_fit(os, "diff", t.diff_fit);
  write_fit(os, "k_miss", t.k_fit);
  os << "gamma,distance,phi_eta,phi_xi,diff,diff_se,p_k,p_k_se,claim_failures,inequality_holds\n";
  for (const InfluenceRow& r : t.rows) {
    os << r.label << ',' << r.distance << ',' << r.phi_eta << ',' << r.phi_xi << ',' << r.diff << ','
       << r.diff_se << ',' << r.p_k << ',' << r.p_k_se << ',' << r.claim_failures << ','
       << (r.inequality_holds ? "true" : "false") << '\n';
  }
}

void write_mixing_csv(std::ostream& os, const MixingScan& t) {
  os << std::setprecision(10);
  os << "# event_family=" << t.event_family << " samples=" << t.samples << '\n';
  write_fit(os, "weak", t.weak_fit);
  write_fit(os, "ratio", t.ratio_fit);
  os << "separation,weak,weak_se,ratio,ratio_se,exact_weak,exact_ratio,skipped\n";
  for (const MixingRow& r : t.rows) {
    os << r.separation << ',' << r.weak << ',' << r.weak_se << ',' << r.ratio << ',' << r.ratio_se
       << ',';
    if (r.exact_weak) os << *r.exact_weak;
    os << ',';
    if (r.exact_ratio) os << *r.exact_ratio;
    os << ',' << (r.skipped ? "true" : "false") << '\n';
  }
}

}  // namespace fkp
