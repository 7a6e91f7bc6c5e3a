#include "fkpoisson/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "fkpoisson/chen_stein.hpp"
#include "fkpoisson/coupling.hpp"
#include "fkpoisson/exact.hpp"
#include "fkpoisson/surgery.hpp"
#include "fkpoisson/wulff.hpp"

#ifndef FKPOISSON_VERSION
#define FKPOISSON_VERSION "0.0.0"
#endif

namespace fkp {

namespace {

constexpr std::size_t kMaxCoOccurrenceSites = 256;
constexpr std::size_t kMaxStratifiedSites = 64;
constexpr std::size_t kMaxExactLawSites = 24;
constexpr std::size_t kEmpiricalShapeSamples = 256;

const std::map<std::string, Command>& command_names() {
  static const std::map<std::string, Command> names = {
      {"sample", Command::kSample},   {"census", Command::kCensus},
      {"chenstein", Command::kChenStein}, {"oracle", Command::kOracle},
      {"surgery", Command::kSurgery}, {"coupling", Command::kCoupling},
      {"wulff", Command::kWulff},     {"decay", Command::kDecay},
  };
  return names;
}

std::string json_type(const Json& v) { return v.type_name(); }

template <class T>
T get_as(const Json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(key, "expected a number, got " + json_type(v));
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(key, "expected an integer, got " + json_type(v));
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError(key, "must be nonnegative");
        }
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(key, "expected a string, got " + json_type(v));
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

template <class T>
std::vector<T> get_list(const Json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key, "expected an array, got " + json_type(v));
  std::vector<T> out;
  for (const Json& e : v) out.push_back(get_as<T>(e, key));
  return out;
}

Finiteness parse_finiteness(const Json& v, const std::string& key) {
  try {
    return finiteness_from_string(get_as<std::string>(v, key));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

Site to_site(const std::vector<int>& c, const std::string& key) {
  if (c.size() < 2 || c.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ConfigError(key, "coordinates must have 2 to " + std::to_string(kMaxDim) + " entries");
  }
  return Site(std::span<const int>(c));
}

std::vector<int> coords(const Site& s) {
  std::vector<int> out(s.dim());
  for (int a = 0; a < s.dim(); ++a) out[a] = s[a];
  return out;
}

BoundaryCondition named_boundary(const std::string& name, const std::string& key) {
  if (name == "free") return BoundaryCondition::free_bc();
  if (name == "wired") return BoundaryCondition::wired();
  throw ConfigError(key, "expected free or wired, got '" + name + "'");
}

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

/// Runs f(0), ..., f(count - 1) on up to `threads` workers; results keep
/// index order and the first failing index's exception is rethrown.
template <class R>
std::vector<R> fan_out(std::size_t count, std::size_t threads, const std::function<R(std::size_t)>& f) {
  std::vector<std::optional<R>> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            results[i].emplace(f(i));
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  std::vector<R> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    out.push_back(std::move(*results[i]));
  }
  return out;
}

/// Records `plan.samples` states of a chain after burn-in, `plan.thinning`
/// sweeps apart.
void run_chain(const ExperimentConfig& c, std::uint64_t seed,
               const std::function<void(const FKSampler&, std::size_t)>& visit) {
  const LatticeBox box = c.box();
  const SamplingPlan plan = c.plan();
  FKSampler chain(box, c.params(), seed);
  chain.run(plan.burn_in > 0 ? plan.burn_in : default_burn_in(box));
  for (std::size_t i = 0; i < plan.samples; ++i) {
    chain.run(plan.thinning);
    visit(chain, i);
  }
}

std::string bit_string(const BondConfig& omega) {
  std::string s(omega.size(), '0');
  for (std::size_t b = 0; b < omega.size(); ++b) s[b] = omega.open(b) ? '1' : '0';
  return s;
}

Json sites_json(const LatticeBox& box, std::span<const std::uint8_t> indicator) {
  Json out = Json::array();
  for (std::size_t s = 0; s < indicator.size(); ++s) {
    if (indicator[s]) out.push_back(coords(box.site(s)));
  }
  return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

using Artifacts = std::map<std::string, std::string>;

std::size_t center_bond(const LatticeBox& box) {
  const Site c = box.center();
  Site t = c;
  t[box.dim() - 1] += 1;
  const auto i = box.index_of(c);
  const auto j = box.index_of(t);
  if (!i || !j) throw ConfigError("event_bond", "the box has no bond at its centre");
  return *box.bond_between(*i, *j);
}

std::vector<GammaSpec> coupling_schedule(const ExperimentConfig& c, std::size_t event_bond) {
  const LatticeBox box = c.box();
  std::vector<GammaSpec> schedule;
  try {
    schedule = centered_gammas(box, c.gamma_sides);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("gamma_sides", e.what());
  }
  const auto [a, b] = box.bond_sites(event_bond);
  schedule.push_back({"bond", {a, b}});
  return schedule;
}

std::vector<RegionPair> mixing_pairs(const ExperimentConfig& c) {
  const LatticeBox box = c.box();
  const Site first = c.mixing_first ? to_site(*c.mixing_first, "mixing_first") : box.lower();
  try {
    return axis_region_pairs(box, first, c.separations);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("separations", e.what());
  }
}

ShapeMask load_shape(const ExperimentConfig& c) {
  ShapeMask w;
  if (c.shape == "ball") {
    w = ball_shape(c.dim(), c.raster, c.shape_radius);
  } else {
    std::ifstream in(c.shape_file);
    if (!in) throw ConfigError("shape_file", "cannot open '" + c.shape_file + "'");
    try {
      w = read_shape(in);
    } catch (const std::exception& e) {
      throw ConfigError("shape_file", e.what());
    }
    if (w.dim() != c.dim()) throw ConfigError("shape_file", "shape dimension differs from the box");
  }
  if (c.theta) {
    try {
      w = renormalize(w, *c.theta);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("theta", e.what());
    }
  }
  return w;
}

// ---- subcommands ------------------------------------------------------------

Artifacts run_sample(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds,
                     std::size_t threads) {
  struct Out {
    std::string lines;
    std::vector<std::uint64_t> open;
    std::uint64_t samples = 0;
  };
  const std::size_t bonds = c.box().num_bonds();
  const auto parts = fan_out<Out>(seeds.size(), threads, [&](std::size_t r) {
    Out o;
    o.open.assign(bonds, 0);
    run_chain(c, seeds[r], [&](const FKSampler& chain, std::size_t i) {
      const BondConfig& omega = chain.state();
      for (std::size_t b = 0; b < bonds; ++b) o.open[b] += omega.open(b);
      ++o.samples;
      Json rec = {{"replica", r}, {"index", i}, {"sweep", chain.sweeps_done()},
                  {"open", bit_string(omega)}};
      o.lines += rec.dump() + "\n";
    });
    return o;
  });
  std::string lines;
  std::vector<std::uint64_t> open(bonds, 0);
  std::uint64_t samples = 0;
  for (const Out& o : parts) {
    lines += o.lines;
    for (std::size_t b = 0; b < bonds; ++b) open[b] += o.open[b];
    samples += o.samples;
  }
  Json marginals = Json::array();
  Json ses = Json::array();
  double total = 0.0;
  for (std::uint64_t k : open) {
    marginals.push_back(static_cast<double>(k) / static_cast<double>(samples));
    ses.push_back(binomial_se(k, samples));
    total += static_cast<double>(k);
  }
  Json report = {
      {"kind", "sample"},
      {"config", to_json(c)},
      {"config_hash", config_hash(c)},
      {"seeds", seeds},
      {"samples", samples},
      {"bond_marginals", marginals},
      {"bond_marginal_se", ses},
      {"mean_open_fraction", bonds ? total / static_cast<double>(samples * bonds) : 0.0},
  };
  return {{"sample.json", dump(report)}, {"samples.jsonl", lines}};
}


struct CensusPart {
  PointFieldAccumulator acc;
  std::map<std::uint64_t, std::uint64_t> sizes;
  std::string lines;
};

CensusPart census_replica(const ExperimentConfig& c, std::size_t r, std::uint64_t seed) {
  const LatticeBox box = c.box();
  CensusPart o{PointFieldAccumulator(box, c.n, c.variant, c.finiteness), {}, {}};
  run_chain(c, seed, [&](const FKSampler& chain, std::size_t i) {
    const ClusterSet cs = label_clusters(chain.state());
    std::size_t finite = 0;
    for (const Cluster& cl : cs.clusters) {
      if (!cl.finite(c.finiteness)) continue;
      ++finite;
      ++o.sizes[cl.size()];
    }
    const PointField field = point_process(cs, c.n, c.variant, c.finiteness);
    o.acc.add(field);
    Json rec = {{"replica", r},
                {"index", i},
                {"clusters", cs.clusters.size()},
                {"finite_clusters", finite},
                {"N", field.count()},
                {"collisions", field.collisions},
                {"centers", sites_json(box, field.x)}};
    o.lines += rec.dump() + "\n";
  });
  return o;
}

Artifacts run_census(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds,
                     std::size_t threads) {
  auto parts = fan_out<CensusPart>(seeds.size(), threads, [&](std::size_t r) {
    return census_replica(c, r, seeds[r]);
  });
  PointFieldAccumulator acc = parts.front().acc;
  std::map<std::uint64_t, std::uint64_t> sizes = parts.front().sizes;
  std::string lines = parts.front().lines;
  for (std::size_t r = 1; r < parts.size(); ++r) {
    acc.merge(parts[r].acc);
    for (const auto& [k, v] : parts[r].sizes) sizes[k] += v;
    lines += parts[r].lines;
  }
  return {{"census.json", dump(census_report(c, acc, sizes, seeds))}, {"census.jsonl", lines}};
}

Json exact_chen_stein_json(const ExactChenStein& e) {
  return {{"lambda", e.lambda},       {"b1", e.b1},   {"b2", e.b2},
          {"b3", e.b3},               {"sum_px_sq", e.sum_px_sq},
          {"bound", e.bound},         {"tv", e.tv},   {"tv_sup", e.tv_sup},
          {"bound_holds", e.tv <= e.bound},           {"px", e.px}};
}

Artifacts run_chenstein(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds,
                        std::size_t threads) {
  const LatticeBox box = c.box();
  const std::size_t sites = box.num_sites();
  const int hw = c.half_width.value_or(neighborhood_half_width(c.n));
  std::vector<Site> offsets;
  for (const Site& z : neighborhood_offsets(c.dim(), hw)) {
    if (offset_positions(box, z) > 0) offsets.push_back(z);
  }

  std::optional<ExactChenStein> exact;
  const bool exact_possible = box.num_bonds() <= kMaxEnumerationBonds && sites <= kMaxExactLawSites;
  if (c.b3_method == "exact" || (c.b3_method == "auto" && exact_possible)) {
    if (!exact_possible) {
      throw ResourceLimitError("exact b3 needs at most " + std::to_string(kMaxEnumerationBonds) +
                                   " bonds and " + std::to_string(kMaxExactLawSites) + " sites",
                               box.num_bonds());
    }
    exact = exact_chen_stein(enumerate(box, c.params()), c.n, c.finiteness, hw, c.variant);
  }
  const bool stratified =
      c.b3_method == "stratified" || (c.b3_method == "auto" && !exact && sites <= kMaxStratifiedSites);
  if (stratified && sites > kMaxStratifiedSites) {
    throw ResourceLimitError("stratified b3 needs at most " + std::to_string(kMaxStratifiedSites) +
                                 " sites",
                             sites);
  }
  const bool co_moments = sites <= kMaxCoOccurrenceSites;

  struct Out {
    PointFieldAccumulator acc;
    PairAccumulator pairs;
    CoOccurrenceAccumulator co;
    StratifiedB3Accumulator strat;
  };
  auto parts = fan_out<Out>(seeds.size(), threads, [&](std::size_t r) {
    Out o{PointFieldAccumulator(box, c.n, c.variant, c.finiteness),
          PairAccumulator(box, c.n, c.K, c.finiteness, offsets),
          co_moments ? CoOccurrenceAccumulator(sites) : CoOccurrenceAccumulator(),
          stratified ? StratifiedB3Accumulator(box, hw) : StratifiedB3Accumulator()};
    run_chain(c, seeds[r], [&](const FKSampler& chain, std::size_t) {
      const ClusterSet cs = label_clusters(chain.state());
      const PointField field = point_process(cs, c.n, c.variant, c.finiteness);
      o.acc.add(field);
      o.pairs.add(cs);
      if (co_moments) o.co.add(field);
      if (stratified) o.strat.add(field);
    });
    return o;
  });
  Out& all = parts.front();
  for (std::size_t r = 1; r < parts.size(); ++r) {
    all.acc.merge(parts[r].acc);
    all.pairs.merge(parts[r].pairs);
    if (co_moments) all.co.merge(parts[r].co);
    if (stratified) all.strat.merge(parts[r].strat);
  }

  const std::vector<double> px = all.acc.px_field();
  const PairStats ps = all.pairs.stats();
  const B1B2 b12 = compute_b1_b2(px, ps, box, hw);
  double sum_sq = 0.0;
  for (double v : px) sum_sq += v * v;

  B3Estimate b3;
  if (exact) {
    b3.method = B3Method::kExact;
    b3.point = exact->b3;
    b3.lower = b3.upper = exact->b3;
  } else if (stratified) {
    b3 = all.strat.estimate(c.min_occupancy);
  }
  Json bound = nullptr;
  if (b3.method != B3Method::kSkipped) {
    const Interval iv = tv_bound(b12.b1, b12.b2, Interval{b3.lower, b3.upper}, sum_sq);
    bound = {{"lower", iv.lower}, {"upper", iv.upper}};
  }
  const PoissonComparison pc =
      poisson_count_test(all.acc.count_histogram(), c.bootstrap, mix64(c.seed ^ 0x706f6973736f6eULL));
  const PxLambdaEstimate est = all.acc.estimate(box.center());

  Json report = {
      {"kind", "chenstein"},
      {"config", to_json(c)},
      {"config_hash", config_hash(c)},
      {"seeds", seeds},
      {"samples", all.acc.samples()},
      {"half_width", hw},
      {"close_threshold", ps.close_threshold},
      {"px_center", est.px},
      {"px_center_se", est.px_se},
      {"lambda", est.lambda_direct},
      {"lambda_se", est.lambda_direct_se},
      {"b1", b12.b1},
      {"b1_se", co_moments ? number_or_null(all.co.b1_standard_error(box, hw)) : Json(nullptr)},
      {"b2", b12.b2},
      {"b2_se", ps.b2_se},
      {"b3",
       {{"method", to_string(b3.method)},
        {"point", optional_json(b3.point)},
        {"lower", b3.lower},
        {"upper", b3.upper},
        {"unpopulated_mass", b3.unpopulated_mass}}},
      {"sum_px_sq", sum_sq},
      {"bound", bound},
      {"poisson",
       {{"lambda_hat", pc.lambda_hat},
        {"tv", pc.tv},
        {"ci_lower", pc.ci_lower},
        {"ci_upper", pc.ci_upper},
        {"degenerate", pc.degenerate},
        {"bootstrap", c.bootstrap}}},
      {"exact", exact ? exact_chen_stein_json(*exact) : Json(nullptr)},
  };

  std::ostringstream csv;
  csv << "offset,positions,pxy,pxy_se,truncated,truncated_se,close,close_se,distant,distant_se\n";
  csv << std::setprecision(10);
  for (const OffsetPairStats& o : ps.offsets) {
    std::string z = o.offset.str();
    std::replace(z.begin(), z.end(), ',', ' ');
    csv << '"' << z << '"' << ',' << o.positions << ',' << o.pxy << ',' << o.pxy_se << ','
        << o.truncated << ',' << o.truncated_se << ',' << o.close << ',' << o.close_se << ','
        << o.distant << ',' << o.distant_se << '\n';
  }
  return {{"chenstein.json", dump(report)}, {"pairs.csv", csv.str()}};
}

Artifacts run_oracle(const ExperimentConfig& c) {
  const LatticeBox box = c.box();
  const ExactDistribution dist = enumerate(box, c.params());
  const std::size_t bonds = box.num_bonds();
  Json marginals = Json::array();
  for (std::size_t b = 0; b < bonds; ++b) {
    marginals.push_back(event_probability(dist, [b](const BondConfig& w) { return w.open(b); }));
  }
  Json configs = Json::array();
  if (bonds <= 12) {
    for (std::uint64_t i = 0; i < dist.prob.size(); ++i) {
      configs.push_back({{"open", bit_string(dist.config(i))}, {"prob", dist.prob[i]}});
    }
  }
  Json report = {{"kind", "oracle"},
                 {"config", to_json(c)},
                 {"config_hash", config_hash(c)},
                 {"bonds", bonds},
                 {"log_z", dist.log_z},
                 {"bond_marginals", marginals},
                 {"configurations", configs}};

  Artifacts out;
  if (box.num_sites() <= kMaxExactLawSites) {
    const int hw = c.half_width.value_or(neighborhood_half_width(c.n));
    const ExactChenStein e = exact_chen_stein(dist, c.n, c.finiteness, hw, c.variant);
    report["chen_stein"] = exact_chen_stein_json(e);
    report["chen_stein"]["half_width"] = hw;
    Json law = Json::array();
    for (const auto& [mask, pr] : e.law.prob) law.push_back({{"pattern", mask}, {"prob", pr}});
    report["point_law"] = law;
  } else {
    report["chen_stein"] = nullptr;
    report["point_law"] = nullptr;
  }

  const auto rows = two_cluster_table(dist, c.n, c.finiteness);
  std::size_t violations = 0;
  std::ostringstream csv;
  csv << std::setprecision(12) << "x,y,lhs,rhs,holds\n";
  for (const TwoClusterRow& r : rows) {
    violations += !r.holds;
    std::string x = r.x.str(), y = r.y.str();
    csv << '"' << x << "\",\"" << y << "\"," << r.lhs << ',' << r.rhs << ','
        << (r.holds ? "true" : "false") << '\n';
  }
  report["two_cluster"] = {{"pairs", rows.size()}, {"violations", violations}};
  out["oracle.json"] = dump(report);
  out["two_cluster.csv"] = csv.str();
  return out;
}

Artifacts run_surgery(const ExperimentConfig& c) {
  const SurgeryScan s =
      surgery_scan(c.params(), c.box(), c.n, c.K, c.instances, derive_seed(c.seed, 0));
  const LatticeBox tiny = LatticeBox::with_sides(c.antecedent_sides);
  const auto rows = antecedent_scan(c.params(), tiny, c.antecedent_n, c.antecedent_K,
                                    c.antecedent_generation_K, c.antecedent_finiteness,
                                    c.antecedent_instances, derive_seed(c.seed, 1),
                                    c.antecedent_cap);
  std::size_t exceed = 0, constructed = 0, found = 0;
  std::uint64_t max_count = 0;
  std::ostringstream csv;
  csv << "index,count,bound,within_bound,constructed,preimage_found,search_space\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const AntecedentRow& r = rows[i];
    exceed += !r.within_bound;
    constructed += r.constructed;
    found += r.preimage_found;
    max_count = std::max(max_count, r.count);
    csv << i << ',' << r.count << ',' << std::setprecision(12) << r.bound << ','
        << r.within_bound << ',' << r.constructed << ',' << r.preimage_found << ','
        << r.search_space << '\n';
  }
  Json report = {
      {"kind", "surgery"},
      {"config", to_json(c)},
      {"config_hash", config_hash(c)},
      {"scan",
       {{"instances", s.instances},
        {"configurations", s.configurations},
        {"merge_failures", s.merge_failures},
        {"bond_bound_failures", s.bond_bound_failures},
        {"locality_failures", s.locality_failures},
        {"weight_failures", s.weight_failures},
        {"additive_failures", s.additive_failures},
        {"determinism_failures", s.determinism_failures},
        {"hypothesis_cases", s.hypothesis_cases},
        {"window_holds", s.window_holds},
        {"max_changed", s.max_changed},
        {"min_log_margin", number_or_null(s.min_log_margin)},
        {"all_hold", s.all_hold()}}},
      {"antecedents",
       {{"instances", rows.size()},
        {"bound", antecedent_bound(c.antecedent_n, c.antecedent_K, tiny.dim())},
        {"max_count", max_count},
        {"exceeding", exceed},
        {"constructed", constructed},
        {"preimage_found", found}}},
  };
  return {{"surgery.json", dump(report)}, {"antecedents.csv", csv.str()}};
}

Json fit_json(const ExponentialFit& f) {
  return {{"rate", optional_json(f.rate)}, {"r_squared", f.r_squared}, {"points", f.points}};
}

Artifacts run_coupling(const ExperimentConfig& c) {
  const LatticeBox box = c.box();
  const std::size_t event = c.event_bond.value_or(center_bond(box));
  const auto schedule = coupling_schedule(c, event);
  const InfluenceDecay inf =
      influence_decay(c.p, c.q, box, named_boundary(c.eta, "eta"), named_boundary(c.xi, "xi"),
                      schedule, event, c.plan(), derive_seed(c.seed, 0));
  const auto pairs = mixing_pairs(c);
  const MixingScan mix = mixing_scan(c.params(), box, pairs, c.plan(), derive_seed(c.seed, 1),
                                     box.num_bonds() <= kMaxEnumerationBonds);

  std::size_t claim_failures = 0, inequality_failures = 0;
  for (const InfluenceRow& r : inf.rows) {
    claim_failures += r.claim_failures;
    inequality_failures += !r.inequality_holds;
  }
  Json report = {{"kind", "coupling"},
                 {"config", to_json(c)},
                 {"config_hash", config_hash(c)},
                 {"event_bond", event},
                 {"pairs", inf.pairs},
                 {"claim_failures", claim_failures},
                 {"inequality_failures", inequality_failures},
                 {"influence_fit", fit_json(inf.diff_fit)},
                 {"k_fit", fit_json(inf.k_fit)},
                 {"mixing_samples", mix.samples},
                 {"event_family", mix.event_family},
                 {"weak_fit", fit_json(mix.weak_fit)},
                 {"ratio_fit", fit_json(mix.ratio_fit)}};
  std::ostringstream icsv, mcsv;
  write_influence_csv(icsv, inf);
  write_mixing_csv(mcsv, mix);
  return {{"coupling.json", dump(report)}, {"influence.csv", icsv.str()}, {"mixing.csv", mcsv.str()}};
}

Artifacts run_wulff(const ExperimentConfig& c, const std::vector<std::uint64_t>& seeds,
                    std::size_t threads) {
  const ShapeMask w = load_shape(c);
  struct Out {
    std::string lines;
    MeanAccumulator volume;
    std::uint64_t indicators = 0;
    std::vector<ClusterSet> kept;
  };
  auto parts = fan_out<Out>(seeds.size(), threads, [&](std::size_t r) {
    Out o;
    run_chain(c, seeds[r], [&](const FKSampler& chain, std::size_t i) {
      ClusterSet cs = label_clusters(chain.state());
      const PointField field = point_process(cs, c.n, PointVariant::kPlain, c.finiteness);
      const auto clusters = marked_clusters(cs, c.n, c.finiteness);
      const ShapeDiagnostic d =
          symmetric_difference_stat(field, clusters, w, c.n, c.fattening, c.delta, c.cluster_scale);
      o.volume.add(d.volume);
      o.indicators += d.indicator;
      Json rec = {{"replica", r},        {"index", i},         {"centers", d.centers},
                  {"f", d.f},            {"volume", d.volume}, {"indicator", d.indicator}};
      o.lines += rec.dump() + "\n";
      if (o.kept.size() < kEmpiricalShapeSamples) o.kept.push_back(std::move(cs));
    });
    return o;
  });
  std::string lines;
  MeanAccumulator volume;
  std::uint64_t indicators = 0;
  std::vector<ClusterSet> kept;
  for (Out& o : parts) {
    lines += o.lines;
    volume.merge(o.volume);
    indicators += o.indicators;
    for (ClusterSet& cs : o.kept) kept.push_back(std::move(cs));
  }
  Artifacts out;
  Json report = {{"kind", "wulff"},
                 {"config", to_json(c)},
                 {"config_hash", config_hash(c)},
                 {"seeds", seeds},
                 {"samples", volume.count()},
                 {"shape_volume", w.volume()},
                 {"raster", w.h()},
                 {"f", c.fattening.value_or(default_fattening(c.n))},
                 {"mean_volume", volume.mean()},
                 {"mean_volume_se", volume.standard_error()},
                 {"indicator_frequency",
                  static_cast<double>(indicators) / static_cast<double>(volume.count())}};
  try {
    const ShapeMask emp = empirical_shape(kept, c.n, c.finiteness, c.raster);
    std::ostringstream os;
    write_shape(os, emp);
    out["empirical_shape.txt"] = os.str();
    report["empirical_shape_volume"] = emp.volume();
  } catch (const std::invalid_argument&) {
    report["empirical_shape_volume"] = nullptr;
  }
  out["wulff.json"] = dump(report);
  out["wulff.jsonl"] = lines;
  return out;
}

Artifacts run_decay(const ExperimentConfig& c) {
  std::vector<DecayScheduleEntry> schedule;
  for (std::size_t i = 0; i < c.decay_n.size(); ++i) schedule.push_back({c.decay_n[i], c.decay_sides[i]});
  const DecayEstimate est = decay_rate(c.params(), c.dim(), schedule, c.plan(), c.seed, c.window_fraction);
  Json rows = Json::array();
  std::ostringstream csv;
  csv << std::setprecision(12) << "n,box_side,prob_origin,prob_origin_se,a_origin,px,px_se,a_px,ratio\n";
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream os;
    os << std::setprecision(12);
    if (v) os << *v;
    return os.str();
  };
  for (const DecayRow& r : est.rows) {
    rows.push_back({{"n", r.n},
                    {"box_side", r.box_side},
                    {"prob_origin", r.prob_origin},
                    {"prob_origin_se", r.prob_origin_se},
                    {"a_origin", optional_json(r.a_origin)},
                    {"px", r.px},
                    {"px_se", r.px_se},
                    {"a_px", optional_json(r.a_px)},
                    {"ratio", optional_json(r.ratio)}});
    csv << r.n << ',' << r.box_side << ',' << r.prob_origin << ',' << r.prob_origin_se << ','
        << cell(r.a_origin) << ',' << r.px << ',' << r.px_se << ',' << cell(r.a_px) << ','
        << cell(r.ratio) << '\n';
  }
  Json report = {{"kind", "decay"},
                 {"config", to_json(c)},
                 {"config_hash", config_hash(c)},
                 {"samples_per_n", est.samples_per_n},
                 {"window_fraction", est.window_fraction},
                 {"rows", rows}};
  return {{"decay.json", dump(report)}, {"decay.csv", csv.str()}};
}

}  // namespace

std::string to_string(Command c) {
  for (const auto& [name, cmd] : command_names()) {
    if (cmd == c) return name;
  }
  return "sample";
}

Command command_from_string(const std::string& s) {
  const auto it = command_names().find(s);
  if (it == command_names().end()) throw ConfigError("command", "unknown subcommand '" + s + "'");
  return it->second;
}

std::string to_string(PointVariant v) { return v == PointVariant::kTruncated ? "truncated" : "plain"; }

PointVariant variant_from_string(const std::string& s) {
  if (s == "plain") return PointVariant::kPlain;
  if (s == "truncated") return PointVariant::kTruncated;
  throw ConfigError("variant", "expected plain or truncated, got '" + s + "'");
}

FKParams ExperimentConfig::params() const {
  FKParams out{p, q, BoundaryCondition::free_bc()};
  if (boundary == "wired") {
    out.boundary = BoundaryCondition::wired();
  } else if (boundary == "partition") {
    std::vector<std::vector<Site>> classes;
    for (const auto& cls : boundary_classes) {
      std::vector<Site> sites;
      for (const auto& s : cls) sites.push_back(to_site(s, "boundary_classes"));
      classes.push_back(std::move(sites));
    }
    out.boundary = BoundaryCondition::partial_partition(box(), std::move(classes));
  }
  return out;
}

SamplingPlan ExperimentConfig::plan() const { return {burn_in, thinning, samples}; }

ExperimentConfig parse_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "expected a JSON object");
  ExperimentConfig c;
  std::optional<int> dim;
  using Setter = std::function<void(const Json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"dim", [&](const Json& v, const std::string& k) { dim = get_as<int>(v, k); }},
      {"sides", [&](const Json& v, const std::string& k) { c.sides = get_list<int>(v, k); }},
      {"p", [&](const Json& v, const std::string& k) { c.p = get_as<double>(v, k); }},
      {"q", [&](const Json& v, const std::string& k) { c.q = get_as<double>(v, k); }},
      {"boundary", [&](const Json& v, const std::string& k) { c.boundary = get_as<std::string>(v, k); }},
      {"boundary_classes",
       [&](const Json& v, const std::string& k) {
         if (!v.is_array()) throw ConfigError(k, "expected an array of site lists");
         c.boundary_classes.clear();
         for (const Json& cls : v) {
           if (!cls.is_array()) throw ConfigError(k, "expected an array of site lists");
           std::vector<std::vector<int>> sites;
           for (const Json& s : cls) sites.push_back(get_list<int>(s, k));
           c.boundary_classes.push_back(std::move(sites));
         }
       }},
      {"n", [&](const Json& v, const std::string& k) { c.n = get_as<std::size_t>(v, k); }},
      {"K", [&](const Json& v, const std::string& k) { c.K = get_as<double>(v, k); }},
      {"fattening", [&](const Json& v, const std::string& k) { c.fattening = get_as<int>(v, k); }},
      {"delta", [&](const Json& v, const std::string& k) { c.delta = get_as<double>(v, k); }},
      {"finiteness", [&](const Json& v, const std::string& k) { c.finiteness = parse_finiteness(v, k); }},
      {"variant",
       [&](const Json& v, const std::string& k) { c.variant = variant_from_string(get_as<std::string>(v, k)); }},
      {"burn_in", [&](const Json& v, const std::string& k) { c.burn_in = get_as<std::size_t>(v, k); }},
      {"thinning", [&](const Json& v, const std::string& k) { c.thinning = get_as<std::size_t>(v, k); }},
      {"samples", [&](const Json& v, const std::string& k) { c.samples = get_as<std::size_t>(v, k); }},
      {"seed", [&](const Json& v, const std::string& k) { c.seed = get_as<std::uint64_t>(v, k); }},
      {"half_width", [&](const Json& v, const std::string& k) { c.half_width = get_as<int>(v, k); }},
      {"b3_method", [&](const Json& v, const std::string& k) { c.b3_method = get_as<std::string>(v, k); }},
      {"min_occupancy",
       [&](const Json& v, const std::string& k) { c.min_occupancy = get_as<std::uint64_t>(v, k); }},
      {"bootstrap", [&](const Json& v, const std::string& k) { c.bootstrap = get_as<std::size_t>(v, k); }},
      {"gamma_sides", [&](const Json& v, const std::string& k) { c.gamma_sides = get_list<int>(v, k); }},
      {"eta", [&](const Json& v, const std::string& k) { c.eta = get_as<std::string>(v, k); }},
      {"xi", [&](const Json& v, const std::string& k) { c.xi = get_as<std::string>(v, k); }},
      {"event_bond", [&](const Json& v, const std::string& k) { c.event_bond = get_as<std::size_t>(v, k); }},
      {"separations", [&](const Json& v, const std::string& k) { c.separations = get_list<int>(v, k); }},
      {"mixing_first", [&](const Json& v, const std::string& k) { c.mixing_first = get_list<int>(v, k); }},
      {"instances", [&](const Json& v, const std::string& k) { c.instances = get_as<std::size_t>(v, k); }},
      {"antecedent_instances",
       [&](const Json& v, const std::string& k) { c.antecedent_instances = get_as<std::size_t>(v, k); }},
      {"antecedent_sides",
       [&](const Json& v, const std::string& k) { c.antecedent_sides = get_list<int>(v, k); }},
      {"antecedent_n", [&](const Json& v, const std::string& k) { c.antecedent_n = get_as<std::size_t>(v, k); }},
      {"antecedent_K", [&](const Json& v, const std::string& k) { c.antecedent_K = get_as<double>(v, k); }},
      {"antecedent_generation_K",
       [&](const Json& v, const std::string& k) { c.antecedent_generation_K = get_as<double>(v, k); }},
      {"antecedent_finiteness",
       [&](const Json& v, const std::string& k) { c.antecedent_finiteness = parse_finiteness(v, k); }},
      {"antecedent_cap",
       [&](const Json& v, const std::string& k) { c.antecedent_cap = get_as<std::uint64_t>(v, k); }},
      {"shape", [&](const Json& v, const std::string& k) { c.shape = get_as<std::string>(v, k); }},
      {"shape_radius", [&](const Json& v, const std::string& k) { c.shape_radius = get_as<double>(v, k); }},
      {"shape_file", [&](const Json& v, const std::string& k) { c.shape_file = get_as<std::string>(v, k); }},
      {"raster", [&](const Json& v, const std::string& k) { c.raster = get_as<double>(v, k); }},
      {"theta", [&](const Json& v, const std::string& k) { c.theta = get_as<double>(v, k); }},
      {"cluster_scale", [&](const Json& v, const std::string& k) { c.cluster_scale = get_as<double>(v, k); }},
      {"decay_n", [&](const Json& v, const std::string& k) { c.decay_n = get_list<std::size_t>(v, k); }},
      {"decay_sides", [&](const Json& v, const std::string& k) { c.decay_sides = get_list<int>(v, k); }},
      {"window_fraction",
       [&](const Json& v, const std::string& k) { c.window_fraction = get_as<double>(v, k); }},
  };
  for (const auto& [key, value] : doc.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown key");
    if (value.is_null()) continue;
    it->second(value, key);
  }
  if (dim && *dim != c.dim()) {
    throw ConfigError("dim", "is " + std::to_string(*dim) + " but sides has " +
                                 std::to_string(c.sides.size()) + " entries");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("--config", e.what());
  }
  return parse_config(doc);
}

Json to_json(const ExperimentConfig& c) {
  return {
      {"sides", c.sides},
      {"p", c.p},
      {"q", c.q},
      {"boundary", c.boundary},
      {"boundary_classes", c.boundary_classes},
      {"n", c.n},
      {"K", c.K},
      {"fattening", optional_json(c.fattening)},
      {"delta", c.delta},
      {"finiteness", to_string(c.finiteness)},
      {"variant", to_string(c.variant)},
      {"burn_in", c.burn_in},
      {"thinning", c.thinning},
      {"samples", c.samples},
      {"seed", c.seed},
      {"half_width", optional_json(c.half_width)},
      {"b3_method", c.b3_method},
      {"min_occupancy", c.min_occupancy},
      {"bootstrap", c.bootstrap},
      {"gamma_sides", c.gamma_sides},
      {"eta", c.eta},
      {"xi", c.xi},
      {"event_bond", optional_json(c.event_bond)},
      {"separations", c.separations},
      {"mixing_first", optional_json(c.mixing_first)},
      {"instances", c.instances},
      {"antecedent_instances", c.antecedent_instances},
      {"antecedent_sides", c.antecedent_sides},
      {"antecedent_n", c.antecedent_n},
      {"antecedent_K", c.antecedent_K},
      {"antecedent_generation_K", c.antecedent_generation_K},
      {"antecedent_finiteness", to_string(c.antecedent_finiteness)},
      {"antecedent_cap", c.antecedent_cap},
      {"shape", c.shape},
      {"shape_radius", c.shape_radius},
      {"shape_file", c.shape_file},
      {"raster", c.raster},
      {"theta", optional_json(c.theta)},
      {"cluster_scale", optional_json(c.cluster_scale)},
      {"decay_n", c.decay_n},
      {"decay_sides", c.decay_sides},
      {"window_fraction", c.window_fraction},
  };
}

void validate(const ExperimentConfig& c, Command cmd, std::size_t replicas) {
  if (c.sides.size() < 2 || c.sides.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ConfigError("sides", "needs 2 to " + std::to_string(kMaxDim) + " entries");
  }
  for (int s : c.sides) {
    if (s < 1) throw ConfigError("sides", "every side must be at least 1");
  }
  if (!(c.p >= 0.0 && c.p <= 1.0)) throw ConfigError("p", "must lie in [0, 1]");
  if (!(c.q >= 1.0) || !std::isfinite(c.q)) throw ConfigError("q", "must be finite and at least 1");
  if (c.boundary != "free" && c.boundary != "wired" && c.boundary != "partition") {
    throw ConfigError("boundary", "expected free, wired or partition, got '" + c.boundary + "'");
  }
  if (c.boundary != "partition" && !c.boundary_classes.empty()) {
    throw ConfigError("boundary_classes", "only allowed with boundary = partition");
  }
  try {
    resolve(c.params().boundary, c.box());
  } catch (const std::invalid_argument& e) {
    throw ConfigError("boundary_classes", e.what());
  }
  if (c.n < 1) throw ConfigError("n", "must be at least 1");
  if (!(c.K > 0.0)) throw ConfigError("K", "must be positive");
  if (c.fattening && *c.fattening < 0) throw ConfigError("fattening", "must be nonnegative");
  if (!(c.delta > 0.0)) throw ConfigError("delta", "must be positive");
  if (c.thinning < 1) throw ConfigError("thinning", "must be at least 1");
  if (replicas < 1) throw ConfigError("--replicas", "must be at least 1");

  const bool sampling = cmd == Command::kSample || cmd == Command::kCensus ||
                        cmd == Command::kChenStein || cmd == Command::kWulff ||
                        cmd == Command::kCoupling || cmd == Command::kDecay;
  const std::size_t min_samples = cmd == Command::kChenStein ? 2 : 1;
  if (sampling && c.samples < min_samples) {
    throw ConfigError("samples", "must be at least " + std::to_string(min_samples));
  }
  const bool replicated = cmd == Command::kSample || cmd == Command::kCensus ||
                          cmd == Command::kChenStein || cmd == Command::kWulff;
  if (!replicated && replicas != 1) {
    throw ConfigError("--replicas", to_string(cmd) + " runs a single stream; use --replicas 1");
  }

  switch (cmd) {
    case Command::kChenStein:
      if (c.variant != PointVariant::kPlain) {
        throw ConfigError("variant", "chenstein pair statistics use the plain process");
      }
      if (c.b3_method != "auto" && c.b3_method != "exact" && c.b3_method != "stratified" &&
          c.b3_method != "skip") {
        throw ConfigError("b3_method", "expected auto, exact, stratified or skip");
      }
      if (c.half_width && *c.half_width < 0) throw ConfigError("half_width", "must be nonnegative");
      if (c.bootstrap < 1) throw ConfigError("bootstrap", "must be at least 1");
      break;
    case Command::kOracle:
      if (c.half_width && *c.half_width < 0) throw ConfigError("half_width", "must be nonnegative");
      break;
    case Command::kSurgery:
      if (c.instances < 1) throw ConfigError("instances", "must be at least 1");
      if (c.antecedent_sides.size() < 2 || c.antecedent_sides.size() > static_cast<std::size_t>(kMaxDim)) {
        throw ConfigError("antecedent_sides", "needs 2 to " + std::to_string(kMaxDim) + " entries");
      }
      for (int s : c.antecedent_sides) {
        if (s < 1) throw ConfigError("antecedent_sides", "every side must be at least 1");
      }
      if (c.antecedent_n < 2) throw ConfigError("antecedent_n", "must be at least 2");
      if (!(c.antecedent_K > 0.0)) throw ConfigError("antecedent_K", "must be positive");
      if (!(c.antecedent_generation_K > 0.0)) {
        throw ConfigError("antecedent_generation_K", "must be positive");
      }
      if (c.n < 2) throw ConfigError("n", "surgery needs n >= 2 so that K ln n > 0");
      if (c.p <= 0.0 || c.p >= 1.0) throw ConfigError("p", "surgery needs 0 < p < 1");
      break;
    case Command::kCoupling: {
      for (const std::string* name : {&c.eta, &c.xi}) named_boundary(*name, name == &c.eta ? "eta" : "xi");
      const LatticeBox box = c.box();
      const std::size_t event = c.event_bond.value_or(center_bond(box));
      if (event >= box.num_bonds()) throw ConfigError("event_bond", "no such bond");
      coupling_schedule(c, event);
      mixing_pairs(c);
      break;
    }
    case Command::kWulff:
      if (!(c.raster > 0.0)) throw ConfigError("raster", "must be positive");
      if (c.shape != "ball" && c.shape != "file") throw ConfigError("shape", "expected ball or file");
      if (c.shape == "ball" && !(c.shape_radius > 0.0)) {
        throw ConfigError("shape_radius", "must be positive");
      }
      if (c.cluster_scale && !(*c.cluster_scale > 0.0)) {
        throw ConfigError("cluster_scale", "must be positive");
      }
      load_shape(c);
      break;
    case Command::kDecay:
      if (c.decay_n.empty() || c.decay_n.size() != c.decay_sides.size()) {
        throw ConfigError("decay_sides", "needs one box side per entry of decay_n");
      }
      for (std::size_t i = 0; i < c.decay_n.size(); ++i) {
        if (c.decay_n[i] < 2) throw ConfigError("decay_n", "entries must be at least 2");
        if (c.decay_sides[i] < 3) throw ConfigError("decay_sides", "entries must be at least 3");
      }
      if (!(c.window_fraction > 0.0 && c.window_fraction <= 1.0)) {
        throw ConfigError("window_fraction", "must lie in (0, 1]");
      }
      break;
    default:
      break;
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

std::string config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("seed");
  return sha256_hex(j.dump());
}

Json to_json(const RunManifest& m) {
  Json outputs = Json::array();
  for (const OutputFile& f : m.outputs) {
    outputs.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  }
  return {{"command", m.command},   {"config_hash", m.config_hash}, {"version", m.version},
          {"seed", m.seed},         {"replica_seeds", m.replica_seeds},
          {"started", m.started},   {"finished", m.finished},       {"outputs", outputs},
          {"hash_chain", m.hash_chain}};
}

std::uint64_t replica_seed(std::uint64_t master, std::size_t replica) {
  return derive_seed(master, replica);
}

RunManifest run_experiment(Command cmd, const ExperimentConfig& config, const RunOptions& opts) {
  validate(config, cmd, opts.replicas);
  RunManifest m;
  m.command = to_string(cmd);
  m.config_hash = config_hash(config);
  m.version = FKPOISSON_VERSION;
  m.seed = config.seed;
  m.started = now_utc();
  for (std::size_t r = 0; r < opts.replicas; ++r) m.replica_seeds.push_back(replica_seed(config.seed, r));
  const std::size_t threads = std::max<std::size_t>(1, opts.threads);

  Artifacts artifacts;
  switch (cmd) {
    case Command::kSample:
      artifacts = run_sample(config, m.replica_seeds, threads);
      break;
    case Command::kCensus:
      artifacts = run_census(config, m.replica_seeds, threads);
      break;
    case Command::kChenStein:
      artifacts = run_chenstein(config, m.replica_seeds, threads);
      break;
    case Command::kOracle:
      artifacts = run_oracle(config);
      break;
    case Command::kSurgery:
      artifacts = run_surgery(config);
      break;
    case Command::kCoupling:
      artifacts = run_coupling(config);
      break;
    case Command::kWulff:
      artifacts = run_wulff(config, m.replica_seeds, threads);
      break;
    case Command::kDecay:
      artifacts = run_decay(config);
      break;
  }

  std::filesystem::create_directories(opts.out_dir);
  std::string chain = sha256_hex(m.config_hash);
  m.hash_chain.push_back(chain);
  for (const auto& [name, content] : artifacts) {
    std::ofstream out(opts.out_dir / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (opts.out_dir / name).string());
    const std::string digest = sha256_hex(content);
    m.outputs.push_back({name, digest, content.size()});
    chain = sha256_hex(chain + name + digest);
    m.hash_chain.push_back(chain);
  }
  m.finished = now_utc();
  std::ofstream out(opts.out_dir / "manifest.json");
  out << dump(to_json(m));
  return m;
}

Json census_report(const ExperimentConfig& config, const PointFieldAccumulator& acc,
                   const std::map<std::uint64_t, std::uint64_t>& size_histogram,
                   const std::vector<std::uint64_t>& seeds) {
  const LatticeBox& box = acc.box();
  Json hits = Json::array();
  for (std::size_t s = 0; s < box.num_sites(); ++s) hits.push_back(acc.site_count(s));
  Json counts = Json::array();
  for (const auto& [k, v] : acc.count_histogram()) counts.push_back({k, v});
  Json sizes = Json::array();
  for (const auto& [k, v] : size_histogram) sizes.push_back({k, v});
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  double px_max = 0.0;
  for (double v : acc.px_field()) px_max = std::max(px_max, v);
  Json estimates = nullptr;
  if (acc.samples() >= 2) {
    const PxLambdaEstimate e = acc.estimate(box.center());
    estimates = {{"center", coords(box.center())},
                 {"px", e.px},
                 {"px_se", e.px_se},
                 {"px_max", px_max},
                 {"lambda_translation", e.lambda_translation},
                 {"lambda_translation_se", e.lambda_translation_se},
                 {"lambda_direct", e.lambda_direct},
                 {"lambda_direct_se", e.lambda_direct_se},
                 {"discrepancy", e.discrepancy}};
  }
  return {
      {"kind", "census"},
      {"config", to_json(config)},
      {"config_hash", config_hash(config)},
      {"seeds", sorted},
      {"counts",
       {{"samples", acc.samples()},
        {"collisions", acc.collisions()},
        {"site_hits", hits},
        {"count_histogram", counts},
        {"size_histogram", sizes}}},
      {"estimates", estimates},
  };
}

Json merge_reports(const std::vector<Json>& reports) {
  if (reports.empty()) throw std::invalid_argument("merge needs at least one report");
  std::optional<ExperimentConfig> config;
  std::string hash;
  PointFieldAccumulator acc;
  std::map<std::uint64_t, std::uint64_t> sizes;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const Json& r = reports[i];
    const std::string where = "report " + std::to_string(i);
    if (!r.is_object() || r.value("kind", "") != "census") {
      throw std::invalid_argument(where + " is not a census report");
    }
    try {
      const ExperimentConfig c = parse_config(r.at("config"));
      const std::string h = config_hash(c);
      if (h != r.at("config_hash").get<std::string>()) {
        throw std::invalid_argument(where + " config does not match its hash");
      }
      const Json& counts = r.at("counts");
      std::map<std::uint64_t, std::uint64_t> hist;
      for (const Json& kv : counts.at("count_histogram")) hist[kv.at(0)] = kv.at(1).get<std::uint64_t>();
      PointFieldAccumulator part = PointFieldAccumulator::from_counts(
          c.box(), c.n, c.variant, c.finiteness, counts.at("samples").get<std::uint64_t>(),
          counts.at("collisions").get<std::uint64_t>(),
          counts.at("site_hits").get<std::vector<std::uint64_t>>(), std::move(hist));
      if (!config) {
        config = c;
        hash = h;
        acc = std::move(part);
      } else {
        if (h != hash) throw std::invalid_argument(where + " has a different config hash");
        acc.merge(part);
        // the reported config is the one with the smallest seed, so order does not matter
        if (c.seed < config->seed) config = c;
      }
      for (const Json& kv : counts.at("size_histogram")) sizes[kv.at(0)] += kv.at(1).get<std::uint64_t>();
      for (const Json& s : r.at("seeds")) seeds.push_back(s.get<std::uint64_t>());
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(where + " is malformed: " + e.what());
    }
  }
  return census_report(*config, acc, sizes, seeds);
}

}  // namespace fkp
